//! Client side: chain setup, password generation and checkpoint upkeep.
//!
//! The prover owns the secret head of the chain. Setup walks the whole chain
//! once to produce the public tail and, during the same pass, stores the
//! initial checkpoints. A password for slot `t` is the node at `t`, obtained
//! by walking down from the lowest stored node at or above `t`. After each
//! login the checkpoints are re-planned for the remaining part of the chain.

use std::sync::{Arc, Mutex, RwLock};

use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};

use crate::bits::{byte_len, Bits};
use crate::chain::{self, Chain, ChainError, ChainValue, HashId, Params, Salt, SecretKey, SlotTime};
use crate::checkpoint::{LoginModel, PlanConfig, PlanError, Scheme, SolverConfig};

/// Version of the enrollment payload layout.
pub const ENROLLMENT_VERSION: u8 = 1;
/// Version of the prover state file.
pub const STATE_VERSION: u8 = 1;
const STATE_MAGIC: &[u8; 4] = b"TKEY";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProverError {
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error("slot {now} is not after the chain start {t_init}")]
    NotYetValid { now: u64, t_init: u64 },
    #[error("chain expired at slot {t_max}, now {now}")]
    Expired { now: u64, t_max: u64 },
    #[error("a password was already emitted for slot {last}; refusing slot {now}")]
    AlreadyEmitted { now: u64, last: u64 },
    #[error("malformed prover state: {0}")]
    MalformedState(String),
    #[error("unsupported prover state version {0}")]
    UnsupportedVersion(u8),
}

/// What the server needs to start verifying a chain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Enrollment {
    pub version: u8,
    pub params: Params,
    pub salt: Salt,
    /// The chain tail, at slot `t_init`.
    pub p_init: ChainValue,
}

impl Enrollment {
    pub fn t_init(&self) -> SlotTime {
        self.p_init.at
    }

    pub fn t_max(&self) -> SlotTime {
        SlotTime(self.p_init.at.0 + self.params.k)
    }
}

/// Exponentially weighted moving average of observed gaps between logins,
/// used in place of the configured login rate when enabled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveRate {
    pub weight: f64,
    pub mean_gap: f64,
    pub last_login: Option<SlotTime>,
}

impl AdaptiveRate {
    pub fn new(weight: f64, initial_mean_gap: f64) -> Self {
        AdaptiveRate { weight, mean_gap: initial_mean_gap, last_login: None }
    }

    pub fn observe(&mut self, login: SlotTime) {
        if let Some(prev) = self.last_login {
            if login > prev {
                let gap = (login.0 - prev.0) as f64;
                self.mean_gap = (1.0 - self.weight) * self.mean_gap + self.weight * gap;
            }
        }
        self.last_login = Some(login);
    }
}

/// A generated one-time password with the cost of producing it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Generated {
    pub password: ChainValue,
    /// Slot of the node the walk started from.
    pub from: SlotTime,
    pub hashes: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProverState {
    params: Params,
    sk: SecretKey,
    salt: Salt,
    t_init: SlotTime,
    /// Sorted by slot, all within `(t_init, t_max)`.
    checkpoints: Vec<ChainValue>,
    plan: PlanConfig,
    adaptive: Option<AdaptiveRate>,
    last_emitted: Option<SlotTime>,
}

impl ProverState {
    /// Fresh key material, chain setup at slot `now`, initial checkpoints.
    pub fn init<R: RngCore + CryptoRng + ?Sized>(
        params: Params,
        plan: PlanConfig,
        rng: &mut R,
        now: SlotTime,
    ) -> Result<(Self, Enrollment), ProverError> {
        let (sk, salt) = chain::keygen(&params, rng)?;
        Self::from_parts(params, plan, sk, salt, now).map(|(state, enrollment, _)| (state, enrollment))
    }

    /// Setup from given key material. Returns the state, the enrollment
    /// payload and the number of hashes spent (always `k`).
    pub fn from_parts(
        params: Params,
        plan: PlanConfig,
        sk: SecretKey,
        salt: Salt,
        t_init: SlotTime,
    ) -> Result<(Self, Enrollment, u64), ProverError> {
        params.validate()?;
        plan.validate()?;
        let head = chain::head_value(&params, &sk, t_init)?;
        let layout = plan.plan(params.k)?;
        let capture: Vec<SlotTime> = layout.positions.iter().rev().map(|&c| SlotTime(t_init.0 + c)).collect();
        let mut walker = Chain::new(&params, &salt, t_init);
        let (p_init, checkpoints) = walker.walk_collecting(&head, t_init, &capture)?;
        let mut checkpoints = checkpoints;
        checkpoints.reverse();
        let state = ProverState { params, sk, salt, t_init, checkpoints, plan, adaptive: None, last_emitted: None };
        let enrollment = Enrollment { version: ENROLLMENT_VERSION, params, salt, p_init };
        Ok((state, enrollment, walker.hashes()))
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn salt(&self) -> &Salt {
        &self.salt
    }

    pub fn t_init(&self) -> SlotTime {
        self.t_init
    }

    pub fn t_max(&self) -> SlotTime {
        SlotTime(self.t_init.0 + self.params.k)
    }

    pub fn checkpoints(&self) -> &[ChainValue] {
        &self.checkpoints
    }

    pub fn plan_config(&self) -> &PlanConfig {
        &self.plan
    }

    pub fn last_emitted(&self) -> Option<SlotTime> {
        self.last_emitted
    }

    pub fn head(&self) -> ChainValue {
        ChainValue { value: self.sk.0, at: self.t_max() }
    }

    /// Starts estimating the login rate from observed gaps.
    pub fn enable_adaptive_rate(&mut self, weight: f64) {
        let mut rate = AdaptiveRate::new(weight, self.plan.model.mean_gap());
        rate.last_login = Some(self.last_emitted.unwrap_or(self.t_init));
        self.adaptive = Some(rate);
    }

    pub fn adaptive_rate(&self) -> Option<&AdaptiveRate> {
        self.adaptive.as_ref()
    }

    /// The login model used for the next re-plan.
    pub fn login_model(&self) -> LoginModel {
        match &self.adaptive {
            Some(rate) => LoginModel::from_mean_gap(rate.mean_gap.max(1.0)).unwrap_or(self.plan.model),
            None => self.plan.model,
        }
    }

    fn check_window(&self, now: SlotTime) -> Result<(), ProverError> {
        if now <= self.t_init {
            return Err(ProverError::NotYetValid { now: now.0, t_init: self.t_init.0 });
        }
        if now > self.t_max() {
            return Err(ProverError::Expired { now: now.0, t_max: self.t_max().0 });
        }
        Ok(())
    }

    /// The lowest stored node at or above `slot` (the head if none).
    pub fn covering(&self, slot: SlotTime) -> ChainValue {
        let i = self.checkpoints.partition_point(|c| c.at < slot);
        self.checkpoints.get(i).copied().unwrap_or_else(|| self.head())
    }

    /// The password for slot `now`, without recording the emission.
    pub fn password_at(&self, now: SlotTime) -> Result<Generated, ProverError> {
        self.check_window(now)?;
        let from = self.covering(now);
        let mut walker = Chain::new(&self.params, &self.salt, self.t_init);
        let password = walker.walk(&from, now)?;
        Ok(Generated { password, from: from.at, hashes: walker.hashes() })
    }

    /// The password for slot `now`. Refuses any slot at or before the last
    /// one emitted. Does not touch the checkpoints.
    pub fn gen_password(&mut self, now: SlotTime) -> Result<Generated, ProverError> {
        if let Some(last) = self.last_emitted {
            if now <= last {
                return Err(ProverError::AlreadyEmitted { now: now.0, last: last.0 });
            }
        }
        let generated = self.password_at(now)?;
        self.last_emitted = Some(now);
        Ok(generated)
    }

    /// Re-plans the checkpoints for the chain remaining above `now` and fills
    /// them in by walking from the nearest stored node above each one.
    /// Returns the hashes spent. On error the old checkpoints are kept.
    pub fn reposition(&mut self, now: SlotTime) -> Result<u64, ProverError> {
        if now < self.t_init || now > self.t_max() {
            return Err(ProverError::Expired { now: now.0, t_max: self.t_max().0 });
        }
        let mut adaptive = self.adaptive;
        if let Some(rate) = adaptive.as_mut() {
            rate.observe(now);
        }
        let model = match &adaptive {
            Some(rate) => LoginModel::from_mean_gap(rate.mean_gap.max(1.0))?,
            None => self.plan.model,
        };
        let ell = self.t_max().0 - now.0;
        let layout = self.plan.plan_with_model(ell, &model)?;
        let (fresh, hashes) = self.materialize(now, &layout.positions)?;
        self.checkpoints = fresh;
        self.adaptive = adaptive;
        Ok(hashes)
    }

    /// Computes the nodes at `base + offset` for each offset, highest first,
    /// reusing existing checkpoints and the nodes just computed.
    fn materialize(&self, base: SlotTime, offsets: &[u64]) -> Result<(Vec<ChainValue>, u64), ProverError> {
        let mut walker = Chain::new(&self.params, &self.salt, self.t_init);
        let mut fresh: Vec<ChainValue> = Vec::with_capacity(offsets.len());
        for &off in offsets.iter().rev() {
            let slot = SlotTime(base.0 + off);
            let mut from = self.covering(slot);
            if let Some(last) = fresh.last() {
                if last.at < from.at {
                    from = *last;
                }
            }
            fresh.push(walker.walk(&from, slot)?);
        }
        fresh.reverse();
        Ok((fresh, walker.hashes()))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Vec::with_capacity(128 + self.checkpoints.len() * 25);
        w.extend_from_slice(STATE_MAGIC);
        w.push(STATE_VERSION);
        let p = &self.params;
        w.push(p.hash.code());
        w.extend_from_slice(&(p.n as u16).to_be_bytes());
        w.extend_from_slice(&(p.s as u16).to_be_bytes());
        w.push(p.c as u8);
        w.extend_from_slice(&(p.m as u16).to_be_bytes());
        w.extend_from_slice(&p.k.to_be_bytes());
        w.extend_from_slice(&p.slot_seconds.to_be_bytes());
        w.extend_from_slice(self.sk.0.as_bytes());
        w.extend_from_slice(self.salt.0.as_bytes());
        w.extend_from_slice(&self.t_init.0.to_be_bytes());
        put_opt_slot(&mut w, self.last_emitted);
        let plan = &self.plan;
        w.push(plan.scheme.code());
        w.extend_from_slice(&(plan.q_total as u32).to_be_bytes());
        w.extend_from_slice(&(plan.q_worst as u32).to_be_bytes());
        w.extend_from_slice(&plan.model.lambda.to_be_bytes());
        w.extend_from_slice(&plan.solver.tol.to_be_bytes());
        w.extend_from_slice(&(plan.solver.max_sweeps as u32).to_be_bytes());
        w.extend_from_slice(&plan.solver.relaxation.to_be_bytes());
        match &self.adaptive {
            None => w.push(0),
            Some(rate) => {
                w.push(1);
                w.extend_from_slice(&rate.weight.to_be_bytes());
                w.extend_from_slice(&rate.mean_gap.to_be_bytes());
                put_opt_slot(&mut w, rate.last_login);
            }
        }
        w.extend_from_slice(&(self.checkpoints.len() as u32).to_be_bytes());
        for c in &self.checkpoints {
            w.extend_from_slice(&c.at.0.to_be_bytes());
            w.extend_from_slice(c.value.as_bytes());
        }
        w
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ProverError> {
        let mut r = Reader { buf: bytes, pos: 0 };
        if r.take(4)? != STATE_MAGIC {
            return Err(malformed("bad magic"));
        }
        let version = r.u8()?;
        if version != STATE_VERSION {
            return Err(ProverError::UnsupportedVersion(version));
        }
        let hash = HashId::from_code(r.u8()?).ok_or_else(|| malformed("unknown hash"))?;
        let n = r.u16()? as usize;
        let s = r.u16()? as usize;
        let c = r.u8()? as usize;
        let m = r.u16()? as usize;
        let k = r.u64()?;
        let slot_seconds = r.u64()?;
        let params = Params { n, s, c, m, k, slot_seconds, hash };
        params.validate().map_err(|e| malformed(&e.to_string()))?;
        let sk = SecretKey(r.bits(n)?);
        let salt = Salt(r.bits(s)?);
        let t_init = SlotTime(r.u64()?);
        let last_emitted = r.opt_slot()?;
        let scheme = Scheme::from_code(r.u8()?).ok_or_else(|| malformed("unknown scheme"))?;
        let q_total = r.u32()? as usize;
        let q_worst = r.u32()? as usize;
        let lambda = r.f64()?;
        let tol = r.f64()?;
        let max_sweeps = r.u32()? as usize;
        let relaxation = r.f64()?;
        let plan = PlanConfig {
            scheme,
            q_total,
            q_worst,
            model: LoginModel { lambda },
            solver: SolverConfig { tol, max_sweeps, relaxation },
        };
        plan.validate().map_err(|e| malformed(&e.to_string()))?;
        let adaptive = match r.u8()? {
            0 => None,
            1 => Some(AdaptiveRate { weight: r.f64()?, mean_gap: r.f64()?, last_login: r.opt_slot()? }),
            _ => return Err(malformed("bad adaptive flag")),
        };
        let count = r.u32()? as usize;
        if count > r.remaining() {
            return Err(malformed("checkpoint count exceeds payload"));
        }
        let mut checkpoints = Vec::with_capacity(count);
        for _ in 0..count {
            let at = SlotTime(r.u64()?);
            checkpoints.push(ChainValue { at, value: r.bits(n)? });
        }
        if r.remaining() != 0 {
            return Err(malformed("trailing bytes"));
        }
        let state = ProverState { params, sk, salt, t_init, checkpoints, plan, adaptive, last_emitted };
        let t_max = state.t_max();
        if !params.tag_fits(t_max.0) {
            return Err(malformed("chain end does not fit the time tag"));
        }
        if state.checkpoints.windows(2).any(|w| w[0].at >= w[1].at)
            || state.checkpoints.iter().any(|c| c.at <= t_init || c.at >= t_max)
        {
            return Err(malformed("checkpoints out of order or out of range"));
        }
        Ok(state)
    }
}

fn malformed(msg: &str) -> ProverError {
    ProverError::MalformedState(msg.to_string())
}

fn put_opt_slot(w: &mut Vec<u8>, slot: Option<SlotTime>) {
    match slot {
        None => w.push(0),
        Some(t) => {
            w.push(1);
            w.extend_from_slice(&t.0.to_be_bytes());
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ProverError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| malformed("truncated"))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], ProverError> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u8(&mut self) -> Result<u8, ProverError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, ProverError> {
        self.array().map(u16::from_be_bytes)
    }

    fn u32(&mut self) -> Result<u32, ProverError> {
        self.array().map(u32::from_be_bytes)
    }

    fn u64(&mut self) -> Result<u64, ProverError> {
        self.array().map(u64::from_be_bytes)
    }

    fn f64(&mut self) -> Result<f64, ProverError> {
        self.array().map(f64::from_be_bytes)
    }

    fn bits(&mut self, len: usize) -> Result<Bits, ProverError> {
        let raw = self.take(byte_len(len))?;
        Bits::from_bytes(raw, len).map_err(|e| malformed(&e.to_string()))
    }

    fn opt_slot(&mut self) -> Result<Option<SlotTime>, ProverError> {
        match self.u8()? {
            0 => Ok(None),
            1 => Ok(Some(SlotTime(self.u64()?))),
            _ => Err(malformed("bad option flag")),
        }
    }
}

/// A prover shared between a foreground that answers password requests and
/// a background task that re-plans checkpoints.
///
/// Password generation reads an immutable snapshot, so it never waits for a
/// re-plan; a finished re-plan replaces the snapshot in one swap.
#[derive(Debug)]
pub struct SharedProver {
    state: RwLock<Arc<ProverState>>,
    emitted: Mutex<Option<SlotTime>>,
    replanning: Mutex<()>,
}

impl SharedProver {
    pub fn new(state: ProverState) -> Self {
        let emitted = state.last_emitted;
        SharedProver { state: RwLock::new(Arc::new(state)), emitted: Mutex::new(emitted), replanning: Mutex::new(()) }
    }

    pub fn snapshot(&self) -> Arc<ProverState> {
        self.state.read().expect("prover lock poisoned").clone()
    }

    pub fn gen_password(&self, now: SlotTime) -> Result<Generated, ProverError> {
        let mut last = self.emitted.lock().expect("prover lock poisoned");
        if let Some(prev) = *last {
            if now <= prev {
                return Err(ProverError::AlreadyEmitted { now: now.0, last: prev.0 });
            }
        }
        let generated = self.snapshot().password_at(now)?;
        *last = Some(now);
        Ok(generated)
    }

    /// Builds a new checkpoint set off-lock and swaps it in.
    pub fn reposition(&self, now: SlotTime) -> Result<u64, ProverError> {
        let _one_at_a_time = self.replanning.lock().expect("prover lock poisoned");
        let mut next = ProverState::clone(&self.snapshot());
        let hashes = next.reposition(now)?;
        *self.state.write().expect("prover lock poisoned") = Arc::new(next);
        Ok(hashes)
    }

    /// The state with the latest emission recorded, ready to persist.
    pub fn into_state(self) -> ProverState {
        let emitted = *self.emitted.lock().expect("prover lock poisoned");
        let mut state = Arc::unwrap_or_clone(self.state.into_inner().expect("prover lock poisoned"));
        state.last_emitted = emitted;
        state
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::checkpoint::naive_positions;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn toy_plan(scheme: Scheme, q: usize) -> PlanConfig {
        PlanConfig {
            scheme,
            q_total: q,
            q_worst: q / 3,
            model: LoginModel::from_mean_gap(40.0).unwrap(),
            ..PlanConfig::default()
        }
    }

    fn toy(k: u64, scheme: Scheme, q: usize) -> (ProverState, Enrollment) {
        let mut rng = ChaCha20Rng::seed_from_u64(k ^ q as u64);
        ProverState::init(Params::with_chain_length(k), toy_plan(scheme, q), &mut rng, SlotTime(1000)).unwrap()
    }

    fn from_head(state: &ProverState, t: SlotTime) -> ChainValue {
        chain::walk(state.params(), state.salt(), state.t_init(), &state.head(), t).unwrap().0
    }

    #[test]
    fn setup_costs_exactly_k_hashes_and_matches_tail() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let (sk, salt) = chain::keygen(&Params::with_chain_length(300), &mut rng).unwrap();
        let params = Params::with_chain_length(300);
        let (state, enrollment, hashes) =
            ProverState::from_parts(params, toy_plan(Scheme::Mixed, 6), sk, salt, SlotTime(77)).unwrap();
        assert_eq!(hashes, 300);
        assert_eq!(enrollment.p_init, chain::chain_tail(&params, &salt, &sk, SlotTime(77)).unwrap());
        assert_eq!(state.t_max(), SlotTime(377));
        assert!(!state.checkpoints().is_empty());
        for c in state.checkpoints() {
            assert_eq!(*c, from_head(&state, c.at));
        }
    }

    #[test]
    fn head_slot_returns_secret_without_hashing() {
        let (state, _) = toy(64, Scheme::Naive, 3);
        let g = state.password_at(state.t_max()).unwrap();
        assert_eq!(g.hashes, 0);
        assert_eq!(g.password, state.head());
    }

    #[test]
    fn checkpoint_slot_costs_nothing() {
        let (state, _) = toy(64, Scheme::Naive, 3);
        let cp = state.checkpoints()[1];
        let g = state.password_at(cp.at).unwrap();
        assert_eq!((g.hashes, g.password), (0, cp));
    }

    #[test]
    fn window_errors() {
        let (state, _) = toy(16, Scheme::Naive, 2);
        assert!(matches!(state.password_at(state.t_init()), Err(ProverError::NotYetValid { .. })));
        assert!(matches!(state.password_at(SlotTime(state.t_max().0 + 1)), Err(ProverError::Expired { .. })));
    }

    #[test]
    fn refuses_repeat_or_regressed_slots() {
        let (mut state, _) = toy(32, Scheme::Naive, 2);
        let t = SlotTime(state.t_init().0 + 5);
        state.gen_password(t).unwrap();
        assert!(matches!(state.gen_password(t), Err(ProverError::AlreadyEmitted { .. })));
        assert!(matches!(state.gen_password(SlotTime(t.0 - 1)), Err(ProverError::AlreadyEmitted { .. })));
        state.gen_password(SlotTime(t.0 + 1)).unwrap();
    }

    #[test]
    fn naive_worst_case_cost_equals_max_gap() {
        let k = 2000;
        let (state, _) = toy(k, Scheme::Naive, 20);
        let plan = naive_positions(k, 20);
        let worst = (state.t_init().0 + 1..=state.t_max().0)
            .map(|t| state.password_at(SlotTime(t)).unwrap().hashes)
            .max()
            .unwrap();
        assert_eq!(worst, plan.max_gap() - 1);
        // The worst slot sits just above a checkpoint; cost is gap - 1 since
        // logins start one slot above the tail.
        let t = state.t_init().0 + 1;
        assert_eq!(state.password_at(SlotTime(t)).unwrap().hashes, plan.positions[0] - 1);
    }

    #[test]
    fn reposition_preserves_values_and_is_a_fixed_point() {
        for scheme in Scheme::ALL {
            let (mut state, _) = toy(400, scheme, 6);
            let now = SlotTime(state.t_init().0 + 37);
            state.gen_password(now).unwrap();
            let spent = state.reposition(now).unwrap();
            assert!(spent <= 400);
            let first = state.checkpoints().to_vec();
            assert_eq!(state.reposition(now).unwrap(), 0);
            assert_eq!(state.checkpoints(), &first[..]);
            for t in (now.0 + 1..=state.t_max().0).step_by(7) {
                assert_eq!(state.password_at(SlotTime(t)).unwrap().password, from_head(&state, SlotTime(t)));
            }
            assert!(state.checkpoints().iter().all(|c| c.at > now && c.at < state.t_max()));
        }
    }

    #[test]
    fn adaptive_rate_tracks_gaps() {
        let (mut state, _) = toy(5000, Scheme::Recursive, 4);
        state.enable_adaptive_rate(0.2);
        let start = state.adaptive_rate().unwrap().mean_gap;
        let t = SlotTime(state.t_init().0 + 1000);
        state.reposition(t).unwrap();
        let rate = state.adaptive_rate().unwrap();
        assert!((rate.mean_gap - (0.8 * start + 0.2 * 1000.0)).abs() < 1e-9);
        assert_eq!(rate.last_login, Some(t));
    }

    #[test]
    fn state_round_trips_and_rejects_damage() {
        let (mut state, _) = toy(500, Scheme::Mixed, 9);
        state.enable_adaptive_rate(0.2);
        state.gen_password(SlotTime(state.t_init().0 + 3)).unwrap();
        let bytes = state.to_bytes();
        assert_eq!(ProverState::from_bytes(&bytes).unwrap(), state);
        for cut in [0, 3, 5, 20, bytes.len() - 1] {
            assert!(matches!(ProverState::from_bytes(&bytes[..cut]), Err(ProverError::MalformedState(_))), "cut {cut}");
        }
        let mut bumped = bytes.clone();
        bumped[4] = STATE_VERSION + 1;
        assert_eq!(ProverState::from_bytes(&bumped), Err(ProverError::UnsupportedVersion(STATE_VERSION + 1)));
        let mut trailing = bytes;
        trailing.push(0);
        assert!(matches!(ProverState::from_bytes(&trailing), Err(ProverError::MalformedState(_))));
    }

    #[test]
    fn shared_prover_serves_passwords_during_replans() {
        let (state, _) = toy(3000, Scheme::ExpectationOptimal, 8);
        let reference = state.clone();
        let shared = Arc::new(SharedProver::new(state));
        let base = reference.t_init().0;
        std::thread::scope(|scope| {
            let bg = {
                let shared = shared.clone();
                scope.spawn(move || {
                    for i in 1..20u64 {
                        shared.reposition(SlotTime(base + i * 10)).unwrap();
                    }
                })
            };
            for i in 1..200u64 {
                let t = SlotTime(base + i * 13);
                let g = shared.gen_password(t).unwrap();
                assert_eq!(g.password, reference.password_at(t).unwrap().password);
            }
            bg.join().unwrap();
        });
        let state = Arc::into_inner(shared).unwrap().into_state();
        assert_eq!(state.last_emitted(), Some(SlotTime(base + 199 * 13)));
    }
}
