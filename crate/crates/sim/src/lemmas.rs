//! Statistics of `h_{[1,k]} = h_k ∘ ... ∘ h_1` for independent uniform
//! functions on `[N]`: image size, pairwise collisions and preimage counts.
//!
//! Each trial draws a fresh family as explicit tables, one layer at a time,
//! and pushes the whole domain through it.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::family::{check_domain, fill_table, Composition, Oracle, TabulatedFamily};
use crate::stats::{covariance, mean_se, report, trial_rng, StatReport};
use crate::SimError;

fn check(n: u32, k: usize, trials: usize) -> Result<(), SimError> {
    check_domain(n)?;
    if k == 0 || trials == 0 {
        return Err(SimError::InvalidConfig("k and trials must be positive".into()));
    }
    if (k as f64) > (n as f64).sqrt() {
        return Err(SimError::InvalidConfig(format!("k = {k} exceeds sqrt(N) for N = {n}")));
    }
    Ok(())
}

/// `h_{[1,k]}` applied to all of `[n]` for a fresh family from trial `i`.
fn fresh_composition(n: u32, k: usize, seed: u64, i: usize) -> Composition {
    let mut rng = trial_rng(seed, i);
    let mut table = Vec::with_capacity(n as usize);
    let mut c = Composition::identity(n);
    for _ in 0..k {
        fill_table(&mut rng, n, &mut table);
        c.apply(&table);
    }
    c
}

fn per_trial<T: Send>(trials: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    (0..trials).into_par_iter().map(f).collect()
}

/// `N·α_k` with `α_0 = 1` and `α_{i+1} = 1 − (1 − 1/N)^{α_i·N}`.
pub fn image_size_reference(n: u32, k: usize) -> f64 {
    let nf = n as f64;
    let log_miss = (-1.0 / nf).ln_1p();
    let mut alpha = 1.0f64;
    for _ in 0..k {
        alpha = -(alpha * nf * log_miss).exp_m1();
    }
    nf * alpha
}

/// `E|h_{[1,k]}([N])|` against the occupancy recursion.
pub fn mc_image_size(n: u32, k: usize, trials: usize, seed: u64) -> Result<StatReport, SimError> {
    check(n, k, trials)?;
    let sizes = per_trial(trials, |i| fresh_composition(n, k, seed, i).image_size() as f64);
    Ok(report(&sizes, image_size_reference(n, k)))
}

/// `1 − (1 − 1/N)^k`.
pub fn collision_reference(n: u32, k: usize) -> f64 {
    -((k as f64) * (-1.0 / n as f64).ln_1p()).exp_m1()
}

/// Whether `x` and `x'` collide under the family's full composition.
pub fn collides(family: &mut TabulatedFamily, x: u32, x_prime: u32) -> Result<bool, SimError> {
    if x == x_prime {
        return Err(SimError::SamePoint(x));
    }
    Ok(family.compose(x) == family.compose(x_prime))
}

/// `Pr[h_{[1,k]}(x) = h_{[1,k]}(x')]` for distinct `x, x'`. Each trial
/// contributes the exact fraction of colliding distinct pairs of its family,
/// `Σ_j L_j(L_j − 1) / (N(N − 1))`.
pub fn mc_collision_prob(n: u32, k: usize, trials: usize, seed: u64) -> Result<StatReport, SimError> {
    check(n, k, trials)?;
    let nf = n as f64;
    let fractions = per_trial(trials, |i| {
        let c = fresh_composition(n, k, seed, i);
        let pairs: u64 = c.preimage_counts().iter().map(|&l| l * (l - 1)).sum();
        pairs as f64 / (nf * (nf - 1.0))
    });
    Ok(report(&fractions, collision_reference(n, k)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub epsilon: f64,
    /// `2k/√ε`
    pub threshold: f64,
    /// Estimate of `Pr[L ≥ threshold]`, reference `ε/2`.
    pub report: StatReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreimageReport {
    /// `E[L]`, reference `k + 1`.
    pub mean: StatReport,
    /// `Var[L]`, reference the bound `(k + 1)²/2`.
    pub variance: StatReport,
    pub tails: Vec<TailReport>,
}

/// Preimage count `L = L_{h_{[1,k]}(x)}` of the image of a uniform point.
///
/// Within a trial every `x ∈ [N]` is used: a point with `L_j` preimages is
/// the image of exactly `L_j` of them, so the trial's averages are
/// `Σ L_j^2 / N` and `Σ L_j^3 / N`. The variance's standard error comes from
/// the delta method over the two per-trial moments.
pub fn mc_preimage_stats(
    n: u32,
    k: usize,
    trials: usize,
    seed: u64,
    epsilons: &[f64],
) -> Result<PreimageReport, SimError> {
    check(n, k, trials)?;
    if trials < 2 {
        return Err(SimError::InvalidConfig("preimage statistics need at least two trials".into()));
    }
    if epsilons.iter().any(|&e| !(e > 0.0 && e <= 1.0)) {
        return Err(SimError::InvalidConfig("epsilon must lie in (0, 1]".into()));
    }
    let nf = n as f64;
    let thresholds: Vec<f64> = epsilons.iter().map(|e| 2.0 * k as f64 / e.sqrt()).collect();
    let rows = per_trial(trials, |i| {
        let c = fresh_composition(n, k, seed, i);
        let (mut m1, mut m2) = (0.0, 0.0);
        let mut tails = vec![0.0; thresholds.len()];
        for &l in c.preimage_counts() {
            let lf = l as f64;
            m1 += lf * lf;
            m2 += lf * lf * lf;
            for (t, &thr) in tails.iter_mut().zip(&thresholds) {
                if lf >= thr {
                    *t += lf;
                }
            }
        }
        (m1 / nf, m2 / nf, tails.into_iter().map(|t| t / nf).collect::<Vec<f64>>())
    });
    let first: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let second: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let kp1 = k as f64 + 1.0;
    let mean = report(&first, kp1);
    let (m2, _) = mean_se(&second);
    let t = trials as f64;
    let (s11, s22, s12) = (covariance(&first, &first), covariance(&second, &second), covariance(&first, &second));
    let mu = mean.estimate;
    let var_se = ((4.0 * mu * mu * s11 - 4.0 * mu * s12 + s22) / t).max(0.0).sqrt();
    let variance = StatReport { estimate: m2 - mu * mu, std_error: var_se, trials, reference: 0.5 * kp1 * kp1 };
    let tails = epsilons
        .iter()
        .zip(&thresholds)
        .enumerate()
        .map(|(j, (&epsilon, &threshold))| {
            let xs: Vec<f64> = rows.iter().map(|r| r.2[j]).collect();
            TailReport { epsilon, threshold, report: report(&xs, epsilon / 2.0) }
        })
        .collect();
    Ok(PreimageReport { mean, variance, tails })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn one_function_image_is_occupancy() {
        let n = 1 << 10;
        let expected = n as f64 * (1.0 - (1.0 - 1.0 / n as f64).powi(n as i32));
        assert!((image_size_reference(n, 1) - expected).abs() < 1e-9);
        let r = mc_image_size(n, 1, 400, 1).unwrap();
        assert!(r.within(4.0), "{r:?}");
    }

    #[test]
    fn recursion_tracks_two_over_k() {
        let r = image_size_reference(1 << 16, 256) / (1 << 16) as f64;
        assert!((r * 256.0 - 2.0).abs() < 0.1, "{r}");
    }

    #[test]
    fn single_trial_image_is_in_range() {
        let r = mc_image_size(1 << 8, 3, 1, 9).unwrap();
        assert!(r.estimate >= 1.0 && r.estimate <= 256.0);
    }

    #[test]
    fn one_function_collision_is_one_over_n() {
        assert!((collision_reference(1 << 10, 1) - 1.0 / 1024.0).abs() < 1e-15);
    }

    #[test]
    fn collision_rejects_identical_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut fam = TabulatedFamily::generate(1 << 8, 2, crate::family::Mode::Independent, &mut rng).unwrap();
        assert_eq!(collides(&mut fam, 5, 5), Err(SimError::SamePoint(5)));
        assert!(collides(&mut fam, 5, 6).is_ok());
    }

    #[test]
    fn single_function_preimage_mean_is_two() {
        // Exact: 1 + (N - 1)/N.
        let n = 1 << 10;
        let r = mc_preimage_stats(n, 1, 400, 11, &[0.5]).unwrap();
        let exact = 2.0 - 1.0 / n as f64;
        assert!((r.mean.estimate - exact).abs() <= 4.0 * r.mean.std_error, "{r:?}");
    }

    #[test]
    fn seeds_reproduce_reports() {
        let a = mc_preimage_stats(1 << 10, 8, 20, 5, &[0.5, 0.1]).unwrap();
        let b = mc_preimage_stats(1 << 10, 8, 20, 5, &[0.5, 0.1]).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, mc_preimage_stats(1 << 10, 8, 20, 5 + (1 << 32), &[0.5, 0.1]).unwrap());
    }

    #[test]
    fn preconditions() {
        assert!(mc_image_size(1 << 10, 33, 10, 0).is_err());
        assert!(mc_image_size(1000, 3, 10, 0).is_err());
        assert!(mc_collision_prob(1 << 10, 0, 10, 0).is_err());
    }
}
