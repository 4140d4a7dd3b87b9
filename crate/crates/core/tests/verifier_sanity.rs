//! The verifiers flag a single corrupted record and nothing else.

mod common;

use std::collections::BTreeSet;

use eoslab::prelude::*;
use eoslab::theory::verify_eos_bounds;
use eoslab::trainer::StableCheck;

#[test]
fn stable_phase_verifier_localizes_a_perturbed_loss() {
    let act = common::leaky_softplus();
    let cert = certify_default(&act).unwrap();
    let data = xor_dataset(true);
    let run = common::train(&act, &cert, &data, 20, &InitSpec::default(), 5.0, 20_000, Cadence::Every(1));
    let phases = detect_phases(&run.records, &run.constants).unwrap();
    let s2 = phases.s_threshold2.expect("reaches the stable phase");
    assert!(verify_stable_phase(&run.records, &phases, &run.constants).passed());

    let k = s2 as usize + 2000;
    let mut bad = run.records.clone();
    bad[k].loss *= 1.1;
    let rep = verify_stable_phase(&bad, &phases, &run.constants);
    let steps: BTreeSet<u64> = rep.violations.iter().map(|v| v.step).collect();
    // The pair (k, k+1) reads L_k on its left side, so k + 1 may also trip.
    assert!(steps.iter().all(|&s| s == k as u64 || s == k as u64 + 1), "{steps:?}");
    let mono: Vec<u64> = rep.violations.iter().filter(|v| v.check == StableCheck::LossMonotone).map(|v| v.step).collect();
    assert_eq!(mono, vec![k as u64]);
}

#[test]
fn eos_verifier_localizes_an_inflated_potential() {
    let act = common::leaky_softplus();
    let cert = certify_default(&act).unwrap();
    let data = synthetic_separable(16, 4, 0.1, 3).unwrap();
    let run = common::train(&act, &cert, &data, 20, &InitSpec::default(), 10.0, 3000, Cadence::Every(1));
    let clean = verify_eos_bounds(&run.records, &data, &run.constants).unwrap();
    assert!(clean.iter().all(|r| r.passed()), "{:?}", clean.iter().filter(|r| !r.passed()).map(|r| &r.name).collect::<Vec<_>>());

    let k = 1234;
    let mut bad = run.records.clone();
    bad[k].g *= 10.0;
    let reports = verify_eos_bounds(&bad, &data, &run.constants).unwrap();
    let flagged: BTreeSet<u64> = reports.iter().flat_map(|r| r.violations.iter().copied()).collect();
    assert_eq!(flagged, BTreeSet::from([k as u64]));
    let g_le_l = reports.iter().find(|r| r.name == "g_le_loss").unwrap();
    assert_eq!(g_le_l.violations, vec![k as u64]);
}
