// Frozen SHA-256 chain vectors, k = 4. Expected values come from
// `tests/oracle/chain_vectors.py`, an independent hashlib implementation.

use tkey_core::bits::Bits;
use tkey_core::chain::{self, ChainValue, Params, Salt, SecretKey, SlotTime};
use tkey_core::checkpoint::{PlanConfig, Scheme};
use tkey_core::prover::ProverState;

pub struct Vector {
    pub sk: &'static str,
    pub salt: &'static str,
    pub t_init: u64,
    /// Nodes from the head (slot t_init + 4) down to the tail.
    pub nodes: [&'static str; 5],
}

pub const VECTORS: [Vector; 2] = [
    Vector {
        sk: "0000000000000000000000000000000040",
        salt: "00000000000000000000",
        t_init: 0,
        nodes: [
            "0000000000000000000000000000000040",
            "debc2c6716c903a7236b63bbe7de9dd2c0",
            "f929396584e4b9d085806f054146cb8a00",
            "3ab4d1ae227d1eb3a552433e21a5403ac0",
            "84ffd0b4c9b335bcb4edc780ea58486c40",
        ],
    },
    Vector {
        sk: "fffffffffffffffffffffffffffff3f1c0",
        salt: "0123456789abcdef0123",
        t_init: 56_000_000,
        nodes: [
            "fffffffffffffffffffffffffffff3f1c0",
            "d2991448d26af2ee39ff35ce0cdeecd900",
            "91d1403e45bf94983c168793c8e7ae14c0",
            "cceec21b7b360224d17d367e6eff09f2c0",
            "82e6cc59614a8b01f5168f7619f345e980",
        ],
    },
];

pub fn load(v: &Vector) -> (Params, SecretKey, Salt) {
    let params = Params::with_chain_length(4);
    let sk = SecretKey(Bits::from_hex(v.sk, 130).unwrap());
    let salt = Salt(Bits::from_hex(v.salt, 80).unwrap());
    (params, sk, salt)
}

/// Checks both the raw step function and the prover against every vector.
pub fn check_all() -> Result<(), String> {
    for v in &VECTORS {
        let (params, sk, salt) = load(v);
        let t0 = SlotTime(v.t_init);
        let mut node = chain::head_value(&params, &sk, t0).map_err(|e| e.to_string())?;
        for expected in &v.nodes[1..] {
            node = chain::step_down(&params, &salt, t0, &node).map_err(|e| e.to_string())?;
            if node.value.to_hex() != *expected {
                return Err(format!("step to slot {} gives {}", node.at, node.value.to_hex()));
            }
        }
        let plan = PlanConfig { scheme: Scheme::Naive, q_total: 1, ..PlanConfig::default() };
        let (state, enrollment, hashes) = ProverState::from_parts(params, plan, sk, salt, t0).map_err(|e| e.to_string())?;
        if hashes != 4 || enrollment.p_init.value.to_hex() != v.nodes[4] {
            return Err(format!("setup from {} disagrees", v.sk));
        }
        for (i, expected) in v.nodes[..4].iter().enumerate() {
            let got: ChainValue = state.password_at(SlotTime(v.t_init + 4 - i as u64)).map_err(|e| e.to_string())?.password;
            if got.value.to_hex() != *expected {
                return Err(format!("password at slot {} gives {}", got.at, got.value.to_hex()));
            }
        }
    }
    Ok(())
}
