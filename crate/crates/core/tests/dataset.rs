mod common;

use falltime_core::dataset::{label_windows, make_splits, prepare, FrameSource, SplitKind, StratumKey};
use falltime_core::scenario::{FaultKind, Outcome};
use falltime_core::RobotParams;
use proptest::prelude::*;

#[test]
fn labeling_on_constructed_trajectories() {
    println!("{}", common::check_labeling().unwrap());
}

#[test]
fn five_folds_stay_within_two_percent_on_a_full_dataset() {
    // 400 + 400 trajectories with uneven fall fractions per kind
    let mut entries = Vec::new();
    for id in 0..800u64 {
        let kind = if id < 400 { FaultKind::Abrupt } else { FaultKind::Incipient };
        let falls = if kind == FaultKind::Abrupt { 173 } else { 219 };
        let outcome = if id % 400 < falls { Outcome::Fall } else { Outcome::Safe };
        entries.push((id, StratumKey { kind, outcome }));
    }
    let plan = make_splits(&entries, SplitKind::KFold, 11).unwrap();
    assert_eq!(plan.folds.len(), 800);
    for f in 0..5 {
        let size = plan.folds.values().filter(|&&v| v == f).count();
        assert!((size as f64 - 160.0).abs() <= 0.02 * 160.0, "fold {f} has {size}");
        let roles = plan.roles(f);
        assert_eq!(roles.train.len() + roles.validation.len() + roles.test.len(), 800);
        assert!(roles.test.iter().all(|id| !roles.train.contains(id) && !roles.validation.contains(id)));
    }
    // each stratum is spread evenly
    for kind in [FaultKind::Abrupt, FaultKind::Incipient] {
        for outcome in [Outcome::Fall, Outcome::Safe] {
            let ids: Vec<u64> = entries
                .iter()
                .filter(|(_, k)| k.kind == kind && k.outcome == outcome)
                .map(|(id, _)| *id)
                .collect();
            let per_fold: Vec<usize> = (0..5).map(|f| ids.iter().filter(|id| plan.folds[id] == f).count()).collect();
            let (lo, hi) = (per_fold.iter().min().unwrap(), per_fold.iter().max().unwrap());
            assert!(hi - lo <= 1, "{kind:?}/{outcome:?}: {per_fold:?}");
        }
    }
    assert_eq!(plan, make_splits(&entries, SplitKind::KFold, 11).unwrap());
    assert_ne!(plan.folds, make_splits(&entries, SplitKind::KFold, 12).unwrap().folds);
}

#[test]
fn too_small_strata_are_rejected() {
    let key = StratumKey {
        kind: FaultKind::Abrupt,
        outcome: Outcome::Fall,
    };
    let entries: Vec<_> = (0..4).map(|id| (id, key)).collect();
    assert!(make_splits(&entries, SplitKind::KFold, 0).is_err());
}

proptest! {
    /// Longer training lead times only ever add faulty windows.
    #[test]
    fn faulty_windows_grow_with_the_lead_time(
        abrupt in any::<bool>(),
        onset in 2.2f64..4.0,
        dwell in 0.3f64..3.0,
        lead_a in 0.0f64..=2.0,
        lead_b in 0.0f64..=2.0,
    ) {
        let kind = if abrupt { FaultKind::Abrupt } else { FaultKind::Incipient };
        let traj = common::constructed_trajectory(kind, onset, 2.0, onset + dwell, true);
        let prep = prepare(&traj, FrameSource::JointVelocities, &RobotParams::default());
        let (lo, hi) = if lead_a <= lead_b { (lead_a, lead_b) } else { (lead_b, lead_a) };
        let short = label_windows(&prep, lo, 10).unwrap();
        let long = label_windows(&prep, hi, 10).unwrap();
        prop_assert_eq!(short.len(), long.len());
        for (s, l) in short.iter().zip(&long) {
            prop_assert!(s.label == 1 || l.label == -1, "window at {} faulty at {} s but safe at {} s", s.end_time, lo, hi);
            if abrupt {
                prop_assert!(l.label == 1 || l.end_time > onset);
            }
        }
    }
}
