use std::collections::HashSet;

use tkey::store::FaultPoint;

#[path = "support/crash.rs"]
mod crash;

#[test]
fn every_fault_point_recovers_acknowledged_state() {
    let mut seen = HashSet::new();
    for seed in 0..300 {
        let dir = tempfile::tempdir().unwrap();
        let run = crash::crash_run(0xc0ffee + seed, dir.path()).unwrap_or_else(|e| panic!("seed {seed}: {e}"));
        assert!(run.fired, "seed {seed}: {run:?}");
        assert!(run.recovered >= run.acknowledged);
        seen.insert(run.point);
    }
    assert_eq!(seen.len(), FaultPoint::ALL.len());
}

#[test]
fn durable_in_flight_update_is_kept() {
    // After a fault past the sync, the update survives though the caller
    // saw an error.
    let mut kept = 0;
    for seed in 0..200 {
        let dir = tempfile::tempdir().unwrap();
        let run = crash::crash_run(seed, dir.path()).unwrap();
        if run.point == FaultPoint::AfterSync {
            assert_eq!(Some(run.recovered), run.in_flight, "{run:?}");
            kept += 1;
        }
        if matches!(run.point, FaultPoint::BeforeWrite | FaultPoint::TornWrite | FaultPoint::LostBeforeSync) {
            assert_eq!(run.recovered, run.acknowledged, "{run:?}");
        }
    }
    assert!(kept > 0);
}
