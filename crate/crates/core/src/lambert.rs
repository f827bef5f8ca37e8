//! Principal branch of the Lambert W function on non-negative arguments.

use crate::checkpoint::PlanError;

const MAX_ITERATIONS: usize = 100;

/// `W0(z)` for `z ≥ 0`: the `w ≥ 0` with `w·e^w = z`.
///
/// Halley iteration from `ln(1 + z)`, which brackets the root from above
/// for every non-negative argument.
pub fn lambert_w0(z: f64) -> Result<f64, PlanError> {
    if z.is_nan() || z < 0.0 {
        return Err(PlanError::Domain(format!("lambert_w0 requires z >= 0, got {z}")));
    }
    if z == 0.0 {
        return Ok(0.0);
    }
    if z.is_infinite() {
        return Ok(f64::INFINITY);
    }
    if z > 1e300 {
        // w·e^w overflows near the top of the range; solve w + ln w = ln z.
        return solve_log_form(z.ln());
    }
    let mut w = z.ln_1p();
    for _ in 0..MAX_ITERATIONS {
        let ew = w.exp();
        let f = w * ew - z;
        let wp1 = w + 1.0;
        let step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1));
        w -= step;
        if step.abs() <= 4.0 * f64::EPSILON * w.abs().max(f64::MIN_POSITIVE) {
            return Ok(w);
        }
    }
    Err(PlanError::NonConvergence(format!("lambert_w0({z})")))
}

/// Solves `w + ln w = y` for `w > 0` (i.e. `W0(e^y)`) with safeguarded Newton.
fn solve_log_form(y: f64) -> Result<f64, PlanError> {
    let mut w = (y - y.ln()).max(1.0);
    for _ in 0..MAX_ITERATIONS {
        let f = w + w.ln() - y;
        let step = f / (1.0 + 1.0 / w);
        w -= step;
        if step.abs() <= 4.0 * f64::EPSILON * w {
            return Ok(w);
        }
    }
    Err(PlanError::NonConvergence(format!("lambert_w0(exp({y}))")))
}

/// `W0(e^(1 + y)) - 1` for `y ≥ 0`, accurate for both tiny and huge `y`.
///
/// With `w = 1 + δ` the defining relation `w·e^w = e^(1+y)` becomes
/// `δ + ln(1 + δ) = y`, whose root lies in `[y/2, y]`.
pub fn lambert_w0_exp1p_minus_one(y: f64) -> Result<f64, PlanError> {
    if y.is_nan() || y < 0.0 {
        return Err(PlanError::Domain(format!("shifted lambert argument must be >= 0, got {y}")));
    }
    if y == 0.0 {
        return Ok(0.0);
    }
    if y.is_infinite() {
        return Ok(f64::INFINITY);
    }
    let (mut lo, mut hi) = (0.5 * y, y);
    let mut d = (0.5 * y).max(y - y.ln_1p());
    for _ in 0..MAX_ITERATIONS {
        let f = d + d.ln_1p() - y;
        if f > 0.0 {
            hi = d;
        } else {
            lo = d;
        }
        let fp = 1.0 + 1.0 / (1.0 + d);
        let fpp = -1.0 / ((1.0 + d) * (1.0 + d));
        let mut next = d - f / (fp - 0.5 * f * fpp / fp);
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        let step = (next - d).abs();
        d = next;
        if step <= 4.0 * f64::EPSILON * d || hi - lo <= 4.0 * f64::EPSILON * hi {
            return Ok(d);
        }
    }
    Err(PlanError::NonConvergence(format!("lambert_w0(exp(1 + {y})) - 1")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    /// Independent oracle: plain Newton on w·e^w = z.
    fn newton_oracle(z: f64) -> f64 {
        let mut w = if z > 3.0 { z.ln() - z.ln().ln() } else { 0.5 };
        for _ in 0..200 {
            let ew = w.exp();
            w -= (w * ew - z) / (ew * (w + 1.0));
        }
        w
    }

    #[test]
    fn fixed_points() {
        assert_eq!(lambert_w0(0.0).unwrap(), 0.0);
        assert!((lambert_w0(E).unwrap() - 1.0).abs() < 1e-15);
        // W0(e^2) = 1.557145598997611416858672 (30-digit reference)
        assert!((lambert_w0(E * E).unwrap() - 1.557_145_598_997_611_4).abs() < 1e-14);
        assert!((lambert_w0(1e300).unwrap() - 684.247_208_629_760_8).abs() < 1e-10);
    }

    #[test]
    fn negative_argument_is_a_domain_error() {
        assert!(matches!(lambert_w0(-0.1), Err(PlanError::Domain(_))));
    }

    #[test]
    fn matches_newton_oracle() {
        for i in 0..400 {
            let z = 10f64.powf(-8.0 + i as f64 * 0.04);
            let w = lambert_w0(z).unwrap();
            let o = newton_oracle(z);
            assert!((w - o).abs() <= 1e-12 * o.abs().max(1e-300), "z={z} w={w} oracle={o}");
            assert!((w * w.exp() - z).abs() <= 1e-12 * z);
        }
    }

    #[test]
    fn shifted_form_agrees_with_direct_evaluation() {
        for &y in &[1e-12, 1e-6, 0.01, 0.5, 1.0, 3.0, 40.0, 600.0] {
            let shifted = lambert_w0_exp1p_minus_one(y).unwrap();
            let d = shifted;
            assert!((d + d.ln_1p() - y).abs() <= 1e-14 * y.max(1e-300) * 4.0 + 1e-300, "y={y}");
            if y > 1e-3 {
                let direct = lambert_w0((1.0 + y).exp()).unwrap() - 1.0;
                assert!((shifted - direct).abs() <= 1e-12 * direct.abs().max(1.0), "y={y}");
            }
        }
        assert!((lambert_w0_exp1p_minus_one(5000.0).unwrap() + 1.0 - solve_log_form(5001.0).unwrap()).abs() < 1e-9);
    }
}
