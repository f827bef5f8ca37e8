//! Checkpoint placement over the remaining part of a chain.
//!
//! Coordinates are tail-relative: the tail (the most recent login) is at 0,
//! the head at `ell`, and a login `t` slots later needs the node at offset
//! `t`. Generating it costs `c - t` hashes, where `c` is the lowest
//! checkpoint at or above `t` (or `ell` when there is none).
//!
//! Placement is solved in the continuous relaxation and rounded to integer
//! offsets once, at the end. Four schemes are provided:
//!
//! * naive: equal spacing, minimizing the worst case;
//! * recursive: greedy interval splitting, each split at the single
//!   checkpoint position that is optimal for its interval;
//! * expectation-optimal: the stationary point of the expected cost,
//!   found by cyclic coordinate updates;
//! * mixed: expectation-optimal checkpoints plus equally spaced ones that
//!   bound the worst case.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::lambert::lambert_w0_exp1p_minus_one;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PlanError {
    #[error("argument out of domain: {0}")]
    Domain(String),
    #[error("solver did not converge: {0}")]
    NonConvergence(String),
    #[error("invalid plan configuration: {0}")]
    InvalidConfig(String),
}

/// Distribution of the time until the next login, measured in slots.
pub trait LoginDistribution {
    fn cdf(&self, t: f64) -> f64;
    fn pdf(&self, t: f64) -> f64;
    /// `∫_0^ell t p(t) dt`.
    fn partial_mean(&self, ell: f64) -> f64;

    /// `(F(x) - F(a)) / p(x)`.
    fn mass_ratio(&self, a: f64, x: f64) -> f64 {
        (self.cdf(x) - self.cdf(a)) / self.pdf(x)
    }

    /// Optimal position of a single checkpoint in `[a, b]`: the root of
    /// `(F(x) - F(a)) / p(x) = b - x`.
    fn split_point(&self, a: f64, b: f64) -> Result<f64, PlanError> {
        bisect_split(self, a, b)
    }
}

/// Root of the single-checkpoint equation on `[a, b]` by bisection.
pub fn bisect_split<D: LoginDistribution + ?Sized>(dist: &D, a: f64, b: f64) -> Result<f64, PlanError> {
    if !(a < b) {
        return Err(PlanError::Domain(format!("empty interval [{a}, {b}]")));
    }
    let g = |x: f64| dist.mass_ratio(a, x) - (b - x);
    let (mut lo, mut hi) = (a, b);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Ok(mid);
        }
        let v = g(mid);
        if v.is_nan() {
            return Err(PlanError::NonConvergence(format!("residual is NaN at {mid}")));
        }
        if v < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Exponentially distributed gaps between logins (a Poisson login process).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoginModel {
    /// Login rate per slot; the mean gap is `1 / lambda` slots.
    pub lambda: f64,
}

impl LoginModel {
    pub fn exponential(lambda: f64) -> Result<Self, PlanError> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(PlanError::Domain(format!("login rate must be positive, got {lambda}")));
        }
        Ok(LoginModel { lambda })
    }

    pub fn from_mean_gap(slots: f64) -> Result<Self, PlanError> {
        Self::exponential(1.0 / slots)
    }

    pub fn mean_gap(&self) -> f64 {
        1.0 / self.lambda
    }
}

impl Default for LoginModel {
    /// One login per week of 30-second slots.
    fn default() -> Self {
        LoginModel { lambda: 1.0 / 20160.0 }
    }
}

impl LoginDistribution for LoginModel {
    fn cdf(&self, t: f64) -> f64 {
        -(-self.lambda * t).exp_m1()
    }

    fn pdf(&self, t: f64) -> f64 {
        self.lambda * (-self.lambda * t).exp()
    }

    fn partial_mean(&self, ell: f64) -> f64 {
        let inv = 1.0 / self.lambda;
        inv - (-self.lambda * ell).exp() * (ell + inv)
    }

    fn mass_ratio(&self, a: f64, x: f64) -> f64 {
        (self.lambda * (x - a)).exp_m1() / self.lambda
    }

    /// Closed form `x = b + (1 - W0(e^(λ(b-a) + 1))) / λ`, evaluated through
    /// the shifted Lambert function so that it stays accurate when `λ(b-a)`
    /// is tiny or huge.
    fn split_point(&self, a: f64, b: f64) -> Result<f64, PlanError> {
        if !(a < b) {
            return Err(PlanError::Domain(format!("empty interval [{a}, {b}]")));
        }
        let delta = lambert_w0_exp1p_minus_one(self.lambda * (b - a))?;
        let x = b - delta / self.lambda;
        Ok(clamp_open(x, a, b))
    }
}

fn clamp_open(x: f64, a: f64, b: f64) -> f64 {
    if x > a && x < b {
        x
    } else {
        0.5 * (a + b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Naive,
    Recursive,
    ExpectationOptimal,
    Mixed,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Naive, Scheme::Recursive, Scheme::ExpectationOptimal, Scheme::Mixed];

    pub fn code(self) -> u8 {
        match self {
            Scheme::Naive => 0,
            Scheme::Recursive => 1,
            Scheme::ExpectationOptimal => 2,
            Scheme::Mixed => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Scheme::ALL.into_iter().find(|s| s.code() == code)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Naive => "naive",
            Scheme::Recursive => "recursive",
            Scheme::ExpectationOptimal => "optimal",
            Scheme::Mixed => "mixed",
        })
    }
}

impl FromStr for Scheme {
    type Err = PlanError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "naive" => Ok(Scheme::Naive),
            "recursive" => Ok(Scheme::Recursive),
            "optimal" | "expectation_optimal" => Ok(Scheme::ExpectationOptimal),
            "mixed" => Ok(Scheme::Mixed),
            other => Err(PlanError::InvalidConfig(format!("unknown scheme {other:?}"))),
        }
    }
}

/// Checkpoint offsets over a remaining chain of length `ell`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointPlan {
    pub ell: u64,
    pub scheme: Scheme,
    /// Solver output before rounding, strictly increasing in `(0, ell)`.
    pub continuous: Vec<f64>,
    /// Final integer offsets, strictly increasing in `[1, ell - 1]`.
    pub positions: Vec<u64>,
}

impl CheckpointPlan {
    fn from_continuous(ell: u64, scheme: Scheme, mut continuous: Vec<f64>) -> Self {
        continuous.sort_by(f64::total_cmp);
        let positions = round_positions(ell, &continuous);
        CheckpointPlan { ell, scheme, continuous, positions }
    }

    /// Offset of the node a login at offset `t` walks down from.
    pub fn covering(&self, t: u64) -> u64 {
        let i = self.positions.partition_point(|&c| c < t);
        self.positions.get(i).copied().unwrap_or(self.ell)
    }

    pub fn max_gap(&self) -> u64 {
        max_gap(self)
    }
}

/// Rounds half-up, clamps into `[1, ell - 1]` and removes duplicates.
pub fn round_positions(ell: u64, xs: &[f64]) -> Vec<u64> {
    if ell < 2 {
        return Vec::new();
    }
    let mut out: Vec<u64> = xs.iter().map(|&x| ((x + 0.5).floor().max(1.0) as u64).min(ell - 1)).collect();
    out.sort_unstable();
    out.dedup();
    out
}

const RELAXATION: f64 = 1.8;

/// Solver settings for the expectation-optimal system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Convergence tolerance relative to `ell`.
    pub tol: f64,
    pub max_sweeps: usize,
    /// Over-relaxation factor for the coordinate updates, in `(0, 2)`;
    /// `1.0` is plain Gauss-Seidel.
    pub relaxation: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { tol: 1e-6, max_sweeps: 10_000, relaxation: RELAXATION }
    }
}

/// Equally spaced checkpoints at `round(j·ell/(q+1))`, `j = 1..=q`.
pub fn naive_positions(ell: u64, q: usize) -> CheckpointPlan {
    let parts = q as u128 + 1;
    let continuous: Vec<f64> = (1..=q).map(|j| j as f64 * ell as f64 / parts as f64).collect();
    let mut positions: Vec<u64> = if ell < 2 {
        Vec::new()
    } else {
        (1..=q as u128)
            .map(|j| ((2 * j * ell as u128 + parts) / (2 * parts)) as u64)
            .map(|p| p.clamp(1, ell - 1))
            .collect()
    };
    positions.dedup();
    CheckpointPlan { ell, scheme: Scheme::Naive, continuous, positions }
}

#[derive(Debug, Clone, Copy)]
struct Interval {
    mass: f64,
    a: f64,
    b: f64,
}

impl PartialEq for Interval {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Interval {}

impl PartialOrd for Interval {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Interval {
    // Largest mass first; ties go to the interval nearer the tail.
    fn cmp(&self, other: &Self) -> Ordering {
        self.mass.total_cmp(&other.mass).then_with(|| other.a.total_cmp(&self.a))
    }
}

/// Recursive splitting, one level at a time: the single optimal checkpoint
/// goes into `[0, ell]`, then into each of the two halves, and so on. When
/// fewer checkpoints remain than intervals on a level, the intervals carrying
/// the most login probability are split first.
pub fn recursive_positions<D: LoginDistribution + ?Sized>(
    ell: u64,
    q: usize,
    model: &D,
) -> Result<CheckpointPlan, PlanError> {
    Ok(CheckpointPlan::from_continuous(ell, Scheme::Recursive, recursive_continuous(ell as f64, q, model)?))
}

fn recursive_continuous<D: LoginDistribution + ?Sized>(ell: f64, q: usize, model: &D) -> Result<Vec<f64>, PlanError> {
    if ell <= 0.0 || q == 0 {
        return Ok(Vec::new());
    }
    let interval = |a: f64, b: f64| Interval { mass: model.cdf(b) - model.cdf(a), a, b };
    let mut level = vec![interval(0.0, ell)];
    let mut out = Vec::with_capacity(q);
    while out.len() < q && !level.is_empty() {
        level.sort_by(|x, y| y.cmp(x));
        level.truncate(q - out.len());
        let mut next = Vec::with_capacity(2 * level.len());
        for Interval { a, b, .. } in level {
            let x = model.split_point(a, b)?;
            out.push(x);
            next.push(interval(a, x));
            next.push(interval(x, b));
        }
        level = next;
    }
    out.sort_by(f64::total_cmp);
    Ok(out)
}

/// Residuals of the stationarity system for continuous positions `c`:
/// `(F(c_i) - F(c_{i-1})) / p(c_i) - (c_{i+1} - c_i)` with `c_0 = 0` and
/// `c_{q+1} = ell`.
pub fn stationarity_residuals<D: LoginDistribution + ?Sized>(c: &[f64], ell: f64, model: &D) -> Vec<f64> {
    (0..c.len())
        .map(|i| {
            let lo = if i == 0 { 0.0 } else { c[i - 1] };
            let hi = c.get(i + 1).copied().unwrap_or(ell);
            model.mass_ratio(lo, c[i]) - (hi - c[i])
        })
        .collect()
}

/// Expectation-optimal placement: solves the stationarity system by cyclic
/// coordinate updates, starting from the recursive placement. Each update
/// moves `c_i` to the root of its own equation with the neighbours fixed.
pub fn expectation_optimal_positions<D: LoginDistribution + ?Sized>(
    ell: u64,
    q: usize,
    model: &D,
    cfg: &SolverConfig,
) -> Result<CheckpointPlan, PlanError> {
    if !(cfg.tol > 0.0) {
        return Err(PlanError::InvalidConfig(format!("tolerance must be positive, got {}", cfg.tol)));
    }
    let ellf = ell as f64;
    let mut c = recursive_continuous(ellf, q, model)?;
    if c.is_empty() {
        return Ok(CheckpointPlan::from_continuous(ell, Scheme::ExpectationOptimal, c));
    }
    let bound = cfg.tol * ellf;
    for _ in 0..cfg.max_sweeps {
        let mut max_change: f64 = 0.0;
        for i in 0..c.len() {
            let lo = if i == 0 { 0.0 } else { c[i - 1] };
            let hi = c.get(i + 1).copied().unwrap_or(ellf);
            let root = model.split_point(lo, hi)?;
            let relaxed = c[i] + cfg.relaxation * (root - c[i]);
            let x = if relaxed > lo && relaxed < hi { relaxed } else { root };
            max_change = max_change.max((x - c[i]).abs());
            c[i] = x;
        }
        if max_change < bound {
            let worst = stationarity_residuals(&c, ellf, model).into_iter().fold(0.0f64, |m, r| m.max(r.abs()));
            if worst < bound {
                return Ok(CheckpointPlan::from_continuous(ell, Scheme::ExpectationOptimal, c));
            }
        }
    }
    Err(PlanError::NonConvergence(format!(
        "expectation-optimal placement (ell={ell}, q={q}) after {} sweeps",
        cfg.max_sweeps
    )))
}

/// `q_total - q_worst` expectation-optimal checkpoints merged with
/// `q_worst` equally spaced ones.
pub fn mixed_positions<D: LoginDistribution + ?Sized>(
    ell: u64,
    q_total: usize,
    q_worst: usize,
    model: &D,
    cfg: &SolverConfig,
) -> Result<CheckpointPlan, PlanError> {
    if q_worst > q_total {
        return Err(PlanError::InvalidConfig(format!("q_worst = {q_worst} exceeds q_total = {q_total}")));
    }
    let naive = naive_positions(ell, q_worst);
    let expected = expectation_optimal_positions(ell, q_total - q_worst, model, cfg)?;
    let mut continuous = expected.continuous;
    continuous.extend_from_slice(&naive.continuous);
    continuous.sort_by(f64::total_cmp);
    let mut positions = expected.positions;
    positions.extend_from_slice(&naive.positions);
    positions.sort_unstable();
    positions.dedup();
    Ok(CheckpointPlan { ell, scheme: Scheme::Mixed, continuous, positions })
}

/// Expected generation cost of a plan:
/// `Σ c_i (F(c_i) - F(c_{i-1})) + ell (F(ell) - F(c_q)) - ∫_0^ell t p(t) dt`.
pub fn expected_cost<D: LoginDistribution + ?Sized>(plan: &CheckpointPlan, model: &D) -> f64 {
    let pos: Vec<f64> = plan.positions.iter().map(|&p| p as f64).collect();
    continuous_cost(&pos, plan.ell as f64, model)
}

/// [`expected_cost`] for arbitrary real positions.
pub fn continuous_cost<D: LoginDistribution + ?Sized>(positions: &[f64], ell: f64, model: &D) -> f64 {
    let mut prev_cdf = 0.0;
    let mut total = 0.0;
    for &c in positions.iter().chain(std::iter::once(&ell)) {
        let f = model.cdf(c);
        total += c * (f - prev_cdf);
        prev_cdf = f;
    }
    total - model.partial_mean(ell)
}

/// Largest distance from a login offset to its covering node, including the
/// gaps `(0, c_1]` and `(c_q, ell]`.
pub fn max_gap(plan: &CheckpointPlan) -> u64 {
    let mut prev = 0;
    let mut gap = 0;
    for &p in plan.positions.iter().chain(std::iter::once(&plan.ell)) {
        gap = gap.max(p - prev);
        prev = p;
    }
    gap
}

/// How a prover places its checkpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanConfig {
    pub scheme: Scheme,
    pub q_total: usize,
    /// Equally spaced checkpoints reserved by the mixed scheme.
    pub q_worst: usize,
    pub model: LoginModel,
    pub solver: SolverConfig,
}

impl Default for PlanConfig {
    fn default() -> Self {
        PlanConfig {
            scheme: Scheme::Mixed,
            q_total: 20,
            q_worst: 8,
            model: LoginModel::default(),
            solver: SolverConfig::default(),
        }
    }
}

impl PlanConfig {
    pub fn validate(&self) -> Result<(), PlanError> {
        if self.scheme == Scheme::Mixed && self.q_worst > self.q_total {
            return Err(PlanError::InvalidConfig(format!(
                "q_worst = {} exceeds q_total = {}",
                self.q_worst, self.q_total
            )));
        }
        LoginModel::exponential(self.model.lambda)?;
        if !(self.solver.tol > 0.0) || self.solver.max_sweeps == 0 {
            return Err(PlanError::InvalidConfig("solver tolerance and sweep cap must be positive".into()));
        }
        if !(self.solver.relaxation > 0.0 && self.solver.relaxation < 2.0) {
            return Err(PlanError::InvalidConfig(format!("relaxation {} outside (0, 2)", self.solver.relaxation)));
        }
        Ok(())
    }

    pub fn plan(&self, ell: u64) -> Result<CheckpointPlan, PlanError> {
        self.plan_with_model(ell, &self.model)
    }

    pub fn plan_with_model(&self, ell: u64, model: &LoginModel) -> Result<CheckpointPlan, PlanError> {
        match self.scheme {
            Scheme::Naive => Ok(naive_positions(ell, self.q_total)),
            Scheme::Recursive => recursive_positions(ell, self.q_total, model),
            Scheme::ExpectationOptimal => expectation_optimal_positions(ell, self.q_total, model, &self.solver),
            Scheme::Mixed => mixed_positions(ell, self.q_total, self.q_worst, model, &self.solver),
        }
    }
}
