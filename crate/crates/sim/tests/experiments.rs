use std::collections::HashSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tkey_core::checkpoint::{LoginModel, PlanConfig, Scheme, SolverConfig};
use tkey_sim::attacks::{attack_independent, attack_same_function, AttackConfig};
use tkey_sim::family::{Mode, Oracle, TabulatedFamily};
use tkey_sim::lemmas::{mc_collision_prob, mc_image_size, mc_preimage_stats};
use tkey_sim::logins::{mc_expected_cost, simulate_logins, LoginSimConfig};

#[test]
fn tabulated_images_match_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for k in 1..=4 {
        for mode in [Mode::Independent, Mode::Same] {
            let mut fam = TabulatedFamily::generate(1 << 8, k, mode, &mut rng).unwrap();
            let direct: HashSet<u32> = (0..256).map(|x| (1..=k).fold(x, |v, i| fam.eval(i, v))).collect();
            let via_oracle: HashSet<u32> = (0..256).map(|x| fam.compose(x)).collect();
            assert_eq!(direct, via_oracle);
            assert_eq!(fam.composition().image_size(), direct.len());
        }
    }
}

#[test]
fn small_domain_lemmas() {
    let n = 1 << 12;
    let image = mc_image_size(n, 32, 200, 1).unwrap();
    assert!(image.within(3.0), "{image:?}");
    let coll = mc_collision_prob(n, 16, 200, 2).unwrap();
    assert!(coll.within(3.0), "{coll:?}");
    let pre = mc_preimage_stats(n, 16, 200, 3, &[0.5, 0.1]).unwrap();
    assert!(pre.variance.at_most_reference(3.0), "{pre:?}");
    for t in &pre.tails {
        assert!(t.report.at_most_reference(3.0), "{t:?}");
    }
}

#[test]
fn same_function_chains_are_easier_to_invert() {
    let cfg = AttackConfig { n: 1 << 16, k: 16, budget: 1024, trials: 1000, seed: 9 };
    let same = attack_same_function(&cfg).unwrap();
    let indep = attack_independent(&cfg).unwrap();
    assert!(same.in_regime);
    assert!(same.success.at_least_reference(3.0), "{same:?}");
    assert!(indep.success.at_most_reference(3.0), "{indep:?}");
    assert!(same.success.estimate > 4.0 * indep.success.estimate, "{same:?} {indep:?}");
}

#[test]
fn closed_form_cost_matches_sampled_logins() {
    let model = LoginModel::from_mean_gap(20_160.0).unwrap();
    for scheme in Scheme::ALL {
        let plan = PlanConfig { scheme, q_total: 10, q_worst: 3, model, solver: SolverConfig::default() }.plan(1_050_000).unwrap();
        let r = mc_expected_cost(&plan, &model, 100_000, 4).unwrap();
        assert!(r.within(3.0), "{scheme}: {r:?}");
    }
}

#[test]
fn session_costs_order_schemes() {
    let cfg = LoginSimConfig {
        ell: 100_000,
        model: LoginModel::from_mean_gap(2_000.0).unwrap(),
        q_total: 10,
        q_worst: 2,
        sessions: 40,
        seed: 5,
        solver: SolverConfig::default(),
    };
    let r = simulate_logins(&cfg, &Scheme::ALL).unwrap();
    let mean = |s: Scheme| r.iter().find(|x| x.scheme == s).unwrap().mean_cost;
    assert!(mean(Scheme::ExpectationOptimal) <= mean(Scheme::Recursive));
    assert!(mean(Scheme::Recursive) <= mean(Scheme::Naive));
    let mixed = r.iter().find(|x| x.scheme == Scheme::Mixed).unwrap();
    assert!(mixed.max_cost <= 100_000u64.div_ceil(3));
}
