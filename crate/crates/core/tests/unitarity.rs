//! Norm preservation of the reference integrator over long horizons.

use spinres::numeric::integrate_schrodinger;
use spinres::{DriveParams, Spinor};

#[test]
fn renormalization_drift_per_thousand_time_units() {
    let p = DriveParams::new(3.0, -1.0, 50.0, 1.0, std::f64::consts::FRAC_PI_2).unwrap();
    let traj =
        integrate_schrodinger(&p, &Spinor::plus(), 1000.0, p.hf_period() / 32.0, 1e-10).unwrap();
    assert!((traj.final_state.norm() - 1.0).abs() < 1e-10);
    assert!(
        traj.renormalization_drift < 1e-8,
        "drift {:e} over 1000 time units at tol 1e-10",
        traj.renormalization_drift
    );
}

#[test]
fn drift_shrinks_with_tolerance() {
    let p = DriveParams::new(3.0, -1.0, 50.0, 1.0, 0.0).unwrap();
    let drift = |tol| {
        integrate_schrodinger(&p, &Spinor::plus(), 200.0, p.hf_period() / 32.0, tol)
            .unwrap()
            .renormalization_drift
    };
    let (loose, tight) = (drift(1e-8), drift(1e-11));
    assert!(tight < loose / 100.0, "{loose:e} -> {tight:e}");
}
