//! Frozen SHA-256 chain vectors, k = 4. Expected values come from
//! `tests/oracle/chain_vectors.py`, an independent hashlib implementation.

use tkey_core::chain::{self, ChainValue, SlotTime};
use tkey_core::checkpoint::{PlanConfig, Scheme};
use tkey_core::prover::ProverState;

#[path = "support/vectors.rs"]
mod frozen;

use frozen::{load, VECTORS};

#[test]
fn oracle_agreement() {
    frozen::check_all().unwrap();
}

#[test]
fn step_by_step_nodes_match_oracle() {
    for v in &VECTORS {
        let (params, sk, salt) = load(v);
        let t0 = SlotTime(v.t_init);
        let mut node = chain::head_value(&params, &sk, t0).unwrap();
        assert_eq!(node.value.to_hex(), v.nodes[0]);
        for expected in &v.nodes[1..] {
            node = chain::step_down(&params, &salt, t0, &node).unwrap();
            assert_eq!(node.value.to_hex(), *expected, "slot {}", node.at);
        }
        assert_eq!(node.at, t0);
        assert_eq!(chain::chain_tail(&params, &salt, &sk, t0).unwrap(), node);
    }
}

#[test]
fn prover_passwords_match_oracle() {
    for v in &VECTORS {
        let (params, sk, salt) = load(v);
        let plan = PlanConfig { scheme: Scheme::Naive, q_total: 1, ..PlanConfig::default() };
        let (state, enrollment, hashes) =
            ProverState::from_parts(params, plan, sk, salt, SlotTime(v.t_init)).unwrap();
        assert_eq!(hashes, 4);
        assert_eq!(enrollment.p_init.value.to_hex(), v.nodes[4]);
        for (i, expected) in v.nodes[..4].iter().enumerate() {
            let t = SlotTime(v.t_init + 4 - i as u64);
            let got: ChainValue = state.password_at(t).unwrap().password;
            assert_eq!(got.value.to_hex(), *expected);
        }
    }
}
