//! Setup, generation and verification costs at full chain lengths, in
//! hashes and wall time.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use tkey_core::chain::{self, Params, SlotTime};
use tkey_core::checkpoint::PlanConfig;
use tkey_core::prover::{ProverError, ProverState};
use tkey_core::verifier::{self, SkewPolicy};
use tkey_sim::logins::{login_slots, LoginSimConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub k: u64,
    pub plan: PlanConfig,
    /// Poisson logins replayed for the average generation cost.
    pub logins: usize,
    pub seed: u64,
    pub t_init: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub k: u64,
    pub checkpoints: usize,
    pub setup_hashes: u64,
    pub setup_secs: f64,
    pub max_gap: u64,
    /// Offset from the tail of the slot with the longest walk.
    pub worst_offset: u64,
    pub worst_hashes: u64,
    pub worst_secs: f64,
    pub logins: usize,
    pub mean_hashes: f64,
    pub mean_secs: f64,
    pub mean_reposition_hashes: f64,
    pub mean_reposition_secs: f64,
    pub verify_hashes: u64,
    pub verify_secs: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error(transparent)]
    Prover(#[from] ProverError),
    #[error("verification failed: {0}")]
    Verify(String),
}

/// The login offset whose covering node is furthest above it: the slot just
/// above the lower end of the widest gap.
pub fn worst_offset(positions: &[u64], ell: u64) -> u64 {
    let mut lo = 0;
    let mut best = (0, 0);
    for &hi in positions.iter().chain(std::iter::once(&ell)) {
        if hi - lo > best.0 {
            best = (hi - lo, lo + 1);
        }
        lo = hi;
    }
    best.1
}

pub fn run(cfg: &BenchConfig) -> Result<BenchRow, BenchError> {
    let params = Params::with_chain_length(cfg.k);
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let (sk, salt) = chain::keygen(&params, &mut rng).map_err(ProverError::from)?;
    let t_init = SlotTime(cfg.t_init);

    let started = Instant::now();
    let (state, enrollment, setup_hashes) = ProverState::from_parts(params, cfg.plan, sk, salt, t_init)?;
    let setup_secs = started.elapsed().as_secs_f64();

    let layout = cfg.plan.plan(cfg.k).map_err(ProverError::from)?;
    let offset = worst_offset(&layout.positions, cfg.k);
    let started = Instant::now();
    let worst = state.password_at(SlotTime(t_init.0 + offset))?;
    let worst_secs = started.elapsed().as_secs_f64();

    let sim = LoginSimConfig {
        ell: cfg.k,
        model: cfg.plan.model,
        q_total: cfg.plan.q_total,
        q_worst: cfg.plan.q_worst,
        sessions: 1,
        seed: cfg.seed,
        solver: cfg.plan.solver,
    };
    let mut replay = state.clone();
    let (mut gen_hashes, mut gen_secs, mut rep_hashes, mut rep_secs) = (0u64, 0.0, 0u64, 0.0);
    let slots: Vec<u64> = login_slots(&sim, 0).into_iter().take(cfg.logins).collect();
    for &s in &slots {
        let now = SlotTime(t_init.0 + s);
        let started = Instant::now();
        gen_hashes += replay.gen_password(now)?.hashes;
        gen_secs += started.elapsed().as_secs_f64();
        let started = Instant::now();
        rep_hashes += replay.reposition(now)?;
        rep_secs += started.elapsed().as_secs_f64();
    }
    let per = |x: f64| if slots.is_empty() { 0.0 } else { x / slots.len() as f64 };

    let cred = verifier::enroll("bench", &enrollment).map_err(|e| BenchError::Verify(e.to_string()))?;
    let policy = SkewPolicy { w_back: 0, ..SkewPolicy::default() };
    let started = Instant::now();
    let accepted = verifier::verify(&cred, &state.head().value, state.t_max(), &policy)
        .map_err(|e| BenchError::Verify(e.to_string()))?;
    let verify_secs = started.elapsed().as_secs_f64();

    Ok(BenchRow {
        k: cfg.k,
        checkpoints: layout.positions.len(),
        setup_hashes,
        setup_secs,
        max_gap: layout.max_gap(),
        worst_offset: offset,
        worst_hashes: worst.hashes,
        worst_secs,
        logins: slots.len(),
        mean_hashes: per(gen_hashes as f64),
        mean_secs: per(gen_secs),
        mean_reposition_hashes: per(rep_hashes as f64),
        mean_reposition_secs: per(rep_secs),
        verify_hashes: accepted.hashes,
        verify_secs,
    })
}
