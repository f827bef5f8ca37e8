//! Login sessions over one chain, replaying password generation and
//! checkpoint re-planning in hash-count units.
//!
//! Logins arrive as a Poisson process; a login at continuous time `s` uses
//! slot `⌈s⌉` (or the next free slot). Every scheme sees the same login
//! times in a given session.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tkey_core::checkpoint::{CheckpointPlan, LoginModel, PlanConfig, Scheme, SolverConfig};

use crate::stats::{report, trial_rng, StatReport};
use crate::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoginSimConfig {
    /// Chain length; logins happen at offsets `1..=ell` from the tail.
    pub ell: u64,
    pub model: LoginModel,
    pub q_total: usize,
    /// Equally spaced checkpoints in the mixed scheme.
    pub q_worst: usize,
    pub sessions: usize,
    pub seed: u64,
    pub solver: SolverConfig,
}

impl LoginSimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.ell == 0 || self.sessions == 0 {
            return Err(SimError::InvalidConfig("ell and sessions must be positive".into()));
        }
        self.plan(Scheme::Mixed).validate().map_err(|e| SimError::InvalidConfig(e.to_string()))
    }

    fn plan(&self, scheme: Scheme) -> PlanConfig {
        PlanConfig { scheme, q_total: self.q_total, q_worst: self.q_worst, model: self.model, solver: self.solver }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemeCost {
    pub scheme: Scheme,
    pub q: usize,
    pub sessions: usize,
    pub logins: u64,
    /// Hashes per login, pooled over all sessions.
    pub mean_cost: f64,
    pub max_cost: u64,
    /// Hashes spent re-planning, per login.
    pub mean_reposition: f64,
}

/// Login slots for one session.
pub fn login_slots(cfg: &LoginSimConfig, session: usize) -> Vec<u64> {
    let mut rng = trial_rng(cfg.seed, session);
    let lambda = cfg.model.lambda;
    let mut out = Vec::new();
    let mut s = 0.0f64;
    let mut last = 0u64;
    loop {
        let u: f64 = rng.gen();
        s += -(-u).ln_1p() / lambda;
        if !(s <= cfg.ell as f64) {
            break;
        }
        let slot = (s.ceil() as u64).max(last + 1);
        if slot > cfg.ell {
            break;
        }
        out.push(slot);
        last = slot;
    }
    out
}

#[derive(Debug, Default, Clone, Copy)]
struct Tally {
    logins: u64,
    cost: u64,
    max_cost: u64,
    reposition: u64,
}

/// Replays one session: generation walks from the lowest stored node at or
/// above the login slot; re-planning fills each new position from the
/// nearest stored node above it.
fn replay(plan: &PlanConfig, ell: u64, logins: &[u64]) -> Result<Tally, SimError> {
    let to_err = |e: tkey_core::checkpoint::PlanError| SimError::InvalidConfig(e.to_string());
    let mut stored: Vec<u64> = plan.plan(ell).map_err(to_err)?.positions;
    let mut tally = Tally::default();
    for &t in logins {
        let i = stored.partition_point(|&c| c < t);
        let cover = stored.get(i).copied().unwrap_or(ell);
        let cost = cover - t;
        tally.logins += 1;
        tally.cost += cost;
        tally.max_cost = tally.max_cost.max(cost);

        let fresh: Vec<u64> = plan.plan(ell - t).map_err(to_err)?.positions.iter().map(|&c| c + t).collect();
        let mut known_above = u64::MAX;
        for &c in fresh.iter().rev() {
            let j = stored.partition_point(|&s| s < c);
            let from = stored.get(j).copied().unwrap_or(ell).min(known_above);
            tally.reposition += from - c;
            known_above = c;
        }
        stored = fresh;
    }
    Ok(tally)
}

/// Mean and worst generation cost for each scheme over `cfg.sessions`
/// sessions sharing login times across schemes.
pub fn simulate_logins(cfg: &LoginSimConfig, schemes: &[Scheme]) -> Result<Vec<SchemeCost>, SimError> {
    cfg.validate()?;
    let per_session: Vec<Vec<Tally>> = (0..cfg.sessions)
        .into_par_iter()
        .map(|session| {
            let logins = login_slots(cfg, session);
            schemes.iter().map(|&s| replay(&cfg.plan(s), cfg.ell, &logins)).collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<_, _>>()?;
    Ok(schemes
        .iter()
        .enumerate()
        .map(|(j, &scheme)| {
            let total = per_session.iter().fold(Tally::default(), |acc, row| Tally {
                logins: acc.logins + row[j].logins,
                cost: acc.cost + row[j].cost,
                max_cost: acc.max_cost.max(row[j].max_cost),
                reposition: acc.reposition + row[j].reposition,
            });
            let per_login = |x: u64| if total.logins == 0 { 0.0 } else { x as f64 / total.logins as f64 };
            SchemeCost {
                scheme,
                q: cfg.q_total,
                sessions: cfg.sessions,
                logins: total.logins,
                mean_cost: per_login(total.cost),
                max_cost: total.max_cost,
                mean_reposition: per_login(total.reposition),
            }
        })
        .collect())
}

/// Monte-Carlo counterpart of the closed-form expected cost: the walk
/// `cover(t) − t` for a single login at continuous time `t ~ Exp(λ)`,
/// counted as zero when `t` falls beyond the chain.
pub fn mc_expected_cost(plan: &CheckpointPlan, model: &LoginModel, samples: usize, seed: u64) -> Result<StatReport, SimError> {
    if samples < 2 {
        return Err(SimError::InvalidConfig("need at least two samples".into()));
    }
    let mut rng = trial_rng(seed, 0);
    let ell = plan.ell as f64;
    let costs: Vec<f64> = (0..samples)
        .map(|_| {
            let u: f64 = rng.gen();
            let t = -(-u).ln_1p() / model.lambda;
            if t > ell {
                return 0.0;
            }
            let i = plan.positions.partition_point(|&c| (c as f64) < t);
            plan.positions.get(i).map_or(ell, |&c| c as f64) - t
        })
        .collect();
    Ok(report(&costs, tkey_core::checkpoint::expected_cost(plan, model)))
}
