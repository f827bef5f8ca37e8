#![allow(dead_code)]

// One fault-injected run: enroll on a clean log, reopen it with a single
// armed fault, verify honest logins until a write fails, then reopen as if
// after a crash and check what survived.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use tkey::store::{FaultPoint, Faults, LogStore, StoreOptions};
use tkey_core::bits::Bits;
use tkey_core::chain::{Params, SlotTime};
use tkey_core::checkpoint::{PlanConfig, Scheme};
use tkey_core::prover::ProverState;
use tkey_core::verifier::{CredentialStore, SkewPolicy, Verifier, VerifyError};

const CRED: &str = "alice";
const LOGINS: usize = 10;
/// Small enough that a run compacts at least twice.
const COMPACT_SLACK: u64 = 3;

#[derive(Debug, Clone)]
pub struct CrashRun {
    pub point: FaultPoint,
    pub nth: u64,
    pub fired: bool,
    pub acknowledged: u64,
    /// Slot whose update was in flight when the fault hit.
    pub in_flight: Option<u64>,
    pub recovered: u64,
}

fn options(faults: Faults) -> StoreOptions {
    StoreOptions { compact_slack: COMPACT_SLACK, faults }
}

pub fn crash_run(seed: u64, dir: &Path) -> Result<CrashRun, String> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let params = Params::with_chain_length(64);
    let plan = PlanConfig { scheme: Scheme::Naive, q_total: 4, q_worst: 0, ..PlanConfig::default() };
    let t_init = 1_000_000;
    let (mut prover, enrollment) = ProverState::init(params, plan, &mut rng, SlotTime(t_init)).map_err(|e| e.to_string())?;
    let path = dir.join("credentials.log");

    {
        let store = LogStore::open_with(&path, options(Faults::none())).map_err(|e| e.to_string())?;
        Verifier::new(store, SkewPolicy::default()).enroll(CRED, &enrollment, false).map_err(|e| e.to_string())?;
    }

    let point = FaultPoint::ALL[rng.gen_range(0..FaultPoint::ALL.len())];
    let nth = match point {
        FaultPoint::CompactBeforeRename | FaultPoint::CompactAfterRename => rng.gen_range(0..=1),
        _ => rng.gen_range(0..=7),
    };
    let mut issued: Vec<(u64, Bits)> = vec![(t_init, enrollment.p_init.value)];
    let mut acknowledged = t_init;
    let mut in_flight = None;
    let mut t = t_init;
    let fired = {
        let store = LogStore::open_with(&path, options(Faults::at(point, nth))).map_err(|e| e.to_string())?;
        let verifier = Verifier::new(store, SkewPolicy::default());
        for _ in 0..LOGINS {
            t += rng.gen_range(1..=3);
            let p = prover.gen_password(SlotTime(t)).map_err(|e| e.to_string())?.password.value;
            issued.push((t, p));
            match verifier.verify(CRED, &p, SlotTime(t)) {
                Ok(acc) if acc.slot.0 == t => acknowledged = t,
                Ok(acc) => return Err(format!("accepted slot {} for a password of slot {t}", acc.slot.0)),
                Err(VerifyError::Store(_)) => {
                    in_flight = Some(t);
                    break;
                }
                Err(e) => return Err(format!("honest login at {t} refused: {e}")),
            }
        }
        verifier.store().fault_fired()
    };

    let store = LogStore::open(&path).map_err(|e| format!("reopen after {point:?}: {e}"))?;
    let cred = store.get(CRED).map_err(|e| e.to_string())?.ok_or("credential lost")?;
    let recovered = cred.t_prev.0;
    if recovered != acknowledged && Some(recovered) != in_flight {
        return Err(format!(
            "{point:?}#{nth}: recovered slot {recovered}, acknowledged {acknowledged}, in flight {in_flight:?}"
        ));
    }
    let expected = issued.iter().find(|(s, _)| *s == recovered).map(|(_, p)| p);
    if expected != Some(&cred.p_prev.value) {
        return Err(format!("{point:?}#{nth}: recovered value does not match slot {recovered}"));
    }

    // The recovered store must take the next login.
    let verifier = Verifier::new(store, SkewPolicy::default());
    t += 1;
    let p = prover.gen_password(SlotTime(t)).map_err(|e| e.to_string())?.password.value;
    match verifier.verify(CRED, &p, SlotTime(t)) {
        Ok(acc) if acc.slot.0 == t => {}
        other => return Err(format!("{point:?}#{nth}: login after recovery: {other:?}")),
    }
    let reopened = LogStore::open(&path).map_err(|e| e.to_string())?;
    if reopened.get(CRED).map_err(|e| e.to_string())?.map(|c| c.t_prev.0) != Some(t) {
        return Err(format!("{point:?}#{nth}: login after recovery not persisted"));
    }

    Ok(CrashRun { point, nth, fired, acknowledged, in_flight, recovered })
}
