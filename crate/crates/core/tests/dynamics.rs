//! Sharp-interface behaviour at time steps the 512^2 grid resolves.

use multiphase_mbo::experiments::{shrinking_disk, SLOPE_TOL};
use multiphase_mbo::field::GridSpec;
use multiphase_mbo::kernel::{compute_coefficients, suggest_scales, MaterialSpec};
use multiphase_mbo::presets::InitialCondition;
use multiphase_mbo::scheme::{run, SchemeConfig};

#[test]
fn disk_shrinks_at_mobility_rate() {
    let fast = shrinking_disk(2.0, 4e-4).unwrap();
    assert!(fast.frozen_at.is_none());
    assert!(fast.relative_error() < SLOPE_TOL, "{:?}", fast.fit);
    assert_eq!(fast.monitor.ledger_violations, 0);
    let slow = shrinking_disk(0.5, 4e-4).unwrap();
    assert!(slow.relative_error() < SLOPE_TOL, "{:?}", slow.fit);
    let ratio = fast.fit.slope / slow.fit.slope;
    assert!((ratio / 4.0 - 1.0).abs() < 0.05, "ratio {ratio}");
}

#[test]
fn flat_stripe_does_not_move() {
    let spec = MaterialSpec::uniform(2, 1.0, 1.0).unwrap();
    let (g, b) = suggest_scales(&spec).unwrap();
    let coeffs = compute_coefficients(&spec, g, b).unwrap();
    let grid = GridSpec::square(128).unwrap();
    let stripe = InitialCondition::Stripe {
        axis: 0,
        offset: 0.25,
        width: 0.5,
        inside: 1,
        outside: 0,
    }
    .build(&grid, 2)
    .unwrap();
    let t = run(&stripe, &coeffs, &SchemeConfig::new(1e-3, 30)).unwrap();
    assert_eq!(t.final_state, stripe);
}
