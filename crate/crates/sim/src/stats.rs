use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// A Monte-Carlo estimate with its standard error and the value theory
/// predicts for it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatReport {
    pub estimate: f64,
    pub std_error: f64,
    pub trials: usize,
    pub reference: f64,
}

impl StatReport {
    /// Distance from the reference in standard errors.
    pub fn z_score(&self) -> f64 {
        (self.estimate - self.reference) / self.std_error
    }

    pub fn within(&self, sigmas: f64) -> bool {
        (self.estimate - self.reference).abs() <= sigmas * self.std_error
    }

    /// `estimate <= reference + sigmas·SE`
    pub fn at_most_reference(&self, sigmas: f64) -> bool {
        self.estimate <= self.reference + sigmas * self.std_error
    }

    /// `estimate >= reference - sigmas·SE`
    pub fn at_least_reference(&self, sigmas: f64) -> bool {
        self.estimate >= self.reference - sigmas * self.std_error
    }
}

/// Generator for trial `i` of an experiment seeded with `seed`.
pub fn trial_rng(seed: u64, i: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ i as u64)
}

/// Sample mean and standard error of the mean (n − 1 denominator).
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::INFINITY);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn report(xs: &[f64], reference: f64) -> StatReport {
    let (estimate, std_error) = mean_se(xs);
    StatReport { estimate, std_error, trials: xs.len(), reference }
}

/// Sample covariance (n − 1 denominator).
pub fn covariance(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / (n - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_standard_error() {
        let (m, se) = mean_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert!((covariance(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn band_checks() {
        let r = StatReport { estimate: 10.0, std_error: 1.0, trials: 5, reference: 12.5 };
        assert!(!r.within(2.0));
        assert!(r.within(3.0));
        assert!(r.at_most_reference(0.0));
        assert!(!r.at_least_reference(2.0));
    }
}
