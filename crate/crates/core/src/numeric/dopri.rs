//! Dormand–Prince 5(4) integration of `i dψ/dt = (v(t)·σ) ψ`.

use super::series::{sample_times, TimeSeries};
use super::{check_tol, Method};
use crate::error::{Error, Result};
use crate::model::{z_rotation, DriveParams};
use crate::su2::{expect_sz, Spinor, Vec3, C64};

const RENORMALIZE_ABOVE: f64 = 1e-10;
const FAIL_ABOVE: f64 = 1e-6;
const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

type State = [C64; 2];

/// Result of one integration run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub series: TimeSeries,
    /// State at `t_end` in the lab frame.
    pub final_state: Spinor,
    /// Sum of the norm deviations removed by renormalization.
    pub renormalization_drift: f64,
    pub steps: usize,
    pub rejected: usize,
}

struct Stats {
    final_state: State,
    drift: f64,
    steps: usize,
    rejected: usize,
}

fn rhs(v: Vec3, psi: &State) -> State {
    // −i (v·σ) ψ
    let up = C64::new(v.z, 0.0) * psi[0] + C64::new(v.x, -v.y) * psi[1];
    let down = C64::new(v.x, v.y) * psi[0] - C64::new(v.z, 0.0) * psi[1];
    [C64::new(up.im, -up.re), C64::new(down.im, -down.re)]
}

fn combine(psi: &State, h: f64, terms: &[(f64, &State)]) -> State {
    let mut out = *psi;
    for (coef, k) in terms {
        out[0] += k[0] * (h * coef);
        out[1] += k[1] * (h * coef);
    }
    out
}

// ⟨σz⟩ of the normalized state.
fn sz(psi: &State) -> f64 {
    let (u, d) = (psi[0].norm_sqr(), psi[1].norm_sqr());
    (u - d) / (u + d)
}

fn norm(psi: &State) -> f64 {
    (psi[0].norm_sqr() + psi[1].norm_sqr()).sqrt()
}

fn error_norm(err: &State, old: &State, new: &State, tol: f64) -> f64 {
    let mut sum = 0.0;
    for i in 0..2 {
        for (e, a, b) in [
            (err[i].re, old[i].re, new[i].re),
            (err[i].im, old[i].im, new[i].im),
        ] {
            let scale = tol + tol * a.abs().max(b.abs());
            sum += (e / scale).powi(2);
        }
    }
    (sum / 4.0).sqrt()
}

/// Integrates from t = 0 to `t_end`, calling `observe` at each time in
/// `samples` (ascending, within [0, t_end]).
fn evolve(
    field: impl Fn(f64) -> Vec3,
    psi0: State,
    t_end: f64,
    samples: &[f64],
    tol: f64,
    max_step: f64,
    mut observe: impl FnMut(f64, &State),
) -> Result<Stats> {
    let mut t = 0.0;
    let mut psi = psi0;
    let mut k1 = rhs(field(t), &psi);
    let mut h = max_step.min(1e-3);
    let mut drift = 0.0;
    let mut steps = 0;
    let mut rejected = 0;
    let mut next = 0;
    while next < samples.len() && samples[next] <= t {
        observe(samples[next], &psi);
        next += 1;
    }

    while t < t_end {
        let target = samples.get(next).copied().unwrap_or(t_end).min(t_end);
        let remaining = target - t;
        let clamped = h >= remaining;
        let step = if clamped { remaining } else { h };

        let k2 = rhs(field(t + C2 * step), &combine(&psi, step, &[(A21, &k1)]));
        let k3 = rhs(
            field(t + C3 * step),
            &combine(&psi, step, &[(A31, &k1), (A32, &k2)]),
        );
        let k4 = rhs(
            field(t + C4 * step),
            &combine(&psi, step, &[(A41, &k1), (A42, &k2), (A43, &k3)]),
        );
        let k5 = rhs(
            field(t + C5 * step),
            &combine(
                &psi,
                step,
                &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)],
            ),
        );
        let k6 = rhs(
            field(t + step),
            &combine(
                &psi,
                step,
                &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
            ),
        );
        let y5 = combine(
            &psi,
            step,
            &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
        );
        let t_new = if clamped { target } else { t + step };
        let k7 = rhs(field(t_new), &y5);
        let err_vec = combine(
            &[C64::new(0.0, 0.0); 2],
            step,
            &[
                (E1, &k1),
                (E3, &k3),
                (E4, &k4),
                (E5, &k5),
                (E6, &k6),
                (E7, &k7),
            ],
        );
        let err = error_norm(&err_vec, &psi, &y5, tol);
        if !err.is_finite() {
            return Err(Error::IntegratorFailure(format!(
                "non-finite error estimate at t = {t}"
            )));
        }
        let factor = if err == 0.0 {
            MAX_FACTOR
        } else {
            (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR)
        };

        if err <= 1.0 {
            steps += 1;
            t = t_new;
            psi = y5;
            k1 = k7;
            let deviation = (norm(&psi) - 1.0).abs();
            if deviation > FAIL_ABOVE {
                return Err(Error::IntegratorFailure(format!(
                    "norm drifted by {deviation:e} at t = {t}"
                )));
            }
            if deviation > RENORMALIZE_ABOVE {
                let inv = 1.0 / norm(&psi);
                for c in psi.iter_mut().chain(k1.iter_mut()) {
                    *c *= inv;
                }
                drift += deviation;
            }
            while next < samples.len() && samples[next] <= t {
                observe(samples[next], &psi);
                next += 1;
            }
            let proposed = step * factor;
            h = if clamped { h.max(proposed) } else { proposed }.min(max_step);
        } else {
            rejected += 1;
            h = step * factor.min(1.0);
            if h < 1e-14 * t.abs().max(1.0) {
                return Err(Error::Stiffness { t, h });
            }
        }
    }
    Ok(Stats {
        final_state: psi,
        drift,
        steps,
        rejected,
    })
}

fn validate(t_start: f64, t_end: f64, sample_dt: f64, tol: f64) -> Result<()> {
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::domain(format!(
            "t_end must be positive, got {t_end}"
        )));
    }
    if !(sample_dt > 0.0 && sample_dt.is_finite()) {
        return Err(Error::domain(format!(
            "sample_dt must be positive, got {sample_dt}"
        )));
    }
    if !(0.0..=t_end).contains(&t_start) {
        return Err(Error::domain(format!(
            "t_start must lie in [0, t_end], got {t_start}"
        )));
    }
    check_tol(tol)
}

fn spinor_state(s: &Spinor) -> State {
    [s.up(), s.down()]
}

fn state_spinor(s: &State) -> Spinor {
    Spinor::from_amplitudes(s[0], s[1])
}

/// Integrates the lab-frame equation from t = 0 and records `⟨σz⟩` every
/// `sample_dt` over [0, t_end].
pub fn integrate_schrodinger(
    p: &DriveParams,
    init: &Spinor,
    t_end: f64,
    sample_dt: f64,
    tol: f64,
) -> Result<Trajectory> {
    integrate_window(p, init, 0.0, t_end, sample_dt, tol)
}

/// Like [`integrate_schrodinger`] but records only samples in [t_start, t_end].
pub fn integrate_window(
    p: &DriveParams,
    init: &Spinor,
    t_start: f64,
    t_end: f64,
    sample_dt: f64,
    tol: f64,
) -> Result<Trajectory> {
    validate(t_start, t_end, sample_dt, tol)?;
    let times = sample_times(t_start, t_end, sample_dt);
    let mut values = Vec::with_capacity(times.len());
    let stats = evolve(
        |t| p.hamiltonian_lab(t).real_vector(),
        spinor_state(init),
        t_end,
        &times,
        tol,
        p.hf_period() / 20.0,
        |_, psi| values.push(sz(psi)),
    )?;
    finish(p, times, values, stats)
}

/// Integrates the rotating-frame equation for `ĥ(Ω_HF t)` and maps back to the
/// lab frame with the gauge factor. Used to cross-check the transformation.
pub fn integrate_transformed(
    p: &DriveParams,
    init: &Spinor,
    t_end: f64,
    sample_dt: f64,
    tol: f64,
) -> Result<Trajectory> {
    validate(0.0, t_end, sample_dt, tol)?;
    let times = sample_times(0.0, t_end, sample_dt);
    let mut values = Vec::with_capacity(times.len());
    let rotated = z_rotation(p.theta(0.0)).apply(init);
    let to_lab = |t: f64, psi: &State| p.gauge_factor(t).apply(&state_spinor(psi));
    let mut stats = evolve(
        |t| {
            p.hamiltonian_transformed(p.hf_frequency() * t)
                .real_vector()
        },
        spinor_state(&rotated),
        t_end,
        &times,
        tol,
        p.hf_period() / 20.0,
        |t, psi| values.push(expect_sz(&to_lab(t, psi))),
    )?;
    stats.final_state = spinor_state(&to_lab(t_end, &stats.final_state));
    finish(p, times, values, stats)
}

fn finish(p: &DriveParams, times: Vec<f64>, values: Vec<f64>, stats: Stats) -> Result<Trajectory> {
    Ok(Trajectory {
        series: TimeSeries::new(times, values, Method::Numeric, *p)?,
        final_state: state_spinor(&stats.final_state),
        renormalization_drift: stats.drift,
        steps: stats.steps,
        rejected: stats.rejected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{expect_sz_closed, propagator, MethodId};
    use std::f64::consts::{FRAC_PI_2, PI};

    fn params(perp: f64, par: f64, hf: f64, r: f64, phi: f64) -> DriveParams {
        DriveParams::new(perp, par, hf, r, phi).unwrap()
    }

    #[test]
    fn sz_conserved_without_transverse_field() {
        let p = params(0.0, 0.3, 50.0, 1.5, 0.2);
        let traj = integrate_schrodinger(&p, &Spinor::plus(), 10.0, 0.01, 1e-10).unwrap();
        assert!(traj.series.values().iter().all(|v| (v - 1.0).abs() < 1e-10));
    }

    #[test]
    fn matches_exact_solution_without_axial_drive() {
        for par in [-1.0, 0.0, 1.0] {
            let p = params(3.0, par, 50.0, 0.0, 0.0);
            let traj = integrate_schrodinger(&p, &Spinor::plus(), 20.0, 0.01, 1e-10).unwrap();
            let worst = traj
                .series
                .times()
                .iter()
                .zip(traj.series.values())
                .map(|(&t, v)| {
                    (v - expect_sz_closed(MethodId::ExactR0, t, &p, &Spinor::plus()).unwrap()).abs()
                })
                .fold(0.0, f64::max);
            assert!(worst < 1e-6, "omega_par={par}: {worst:e}");
        }
    }

    #[test]
    fn final_state_matches_exact_propagator() {
        let p = params(3.0, 0.4, 50.0, 0.0, 0.0);
        let init = Spinor::superposition(0.6, 1.1).unwrap();
        let traj = integrate_schrodinger(&p, &init, 7.3, 0.1, 1e-11).unwrap();
        let exact = propagator(MethodId::ExactR0, 7.3, &p).unwrap().apply(&init);
        assert!((traj.final_state.up() - exact.up()).norm() < 1e-7);
        assert!((traj.final_state.down() - exact.down()).norm() < 1e-7);
    }

    #[test]
    fn tighter_tolerance_does_not_increase_error() {
        let p = params(3.0, 0.0, 50.0, 0.0, 0.0);
        let deviation = |tol: f64| {
            let traj = integrate_schrodinger(&p, &Spinor::plus(), 20.0, 0.05, tol).unwrap();
            traj.series
                .times()
                .iter()
                .zip(traj.series.values())
                .map(|(&t, v)| {
                    (v - expect_sz_closed(MethodId::ExactR0, t, &p, &Spinor::plus()).unwrap()).abs()
                })
                .fold(0.0, f64::max)
        };
        let mut previous = f64::INFINITY;
        for tol in [1e-7, 5e-8, 2.5e-8, 1.25e-8] {
            let d = deviation(tol);
            assert!(
                d <= previous * 1.05 + 1e-12,
                "tol={tol:e}: {d:e} > {previous:e}"
            );
            previous = d;
        }
    }

    #[test]
    fn transformed_frame_agrees_with_lab_frame() {
        for (r, phi) in [(1.0, FRAC_PI_2), (2.0, 0.3)] {
            let p = params(3.0, -0.8, 50.0, r, phi);
            let init = Spinor::superposition(0.8, 0.4).unwrap();
            let lab = integrate_schrodinger(&p, &init, 6.0, 0.01, 1e-12).unwrap();
            let rot = integrate_transformed(&p, &init, 6.0, 0.01, 1e-12).unwrap();
            let worst = max_diff(lab.series.values(), rot.series.values());
            assert!(worst < 1e-8, "{worst:e}");
            assert!((lab.final_state.up() - rot.final_state.up()).norm() < 1e-8);
            assert!((lab.final_state.down() - rot.final_state.down()).norm() < 1e-8);
        }
    }

    fn max_diff(a: &[f64], b: &[f64]) -> f64 {
        assert_eq!(a.len(), b.len());
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn samples_land_on_grid() {
        let p = params(3.0, 0.0, 50.0, 1.0, 0.0);
        let traj = integrate_window(&p, &Spinor::minus(), 2.0, 3.0, 0.25, 1e-9).unwrap();
        assert_eq!(traj.series.times(), &[2.0, 2.25, 2.5, 2.75, 3.0]);
    }

    #[test]
    fn rejects_bad_arguments() {
        let p = params(3.0, 0.0, 50.0, 1.0, 0.0);
        let s = Spinor::plus();
        assert!(integrate_schrodinger(&p, &s, 0.0, 0.1, 1e-9).is_err());
        assert!(integrate_schrodinger(&p, &s, 1.0, 0.0, 1e-9).is_err());
        assert!(integrate_schrodinger(&p, &s, 1.0, 0.1, 1e-3).is_err());
        assert!(integrate_window(&p, &s, 2.0, 1.0, 0.1, 1e-9).is_err());
        assert!(integrate_window(&p, &s, -1.0, 1.0, 0.1, 1e-9).is_err());
    }

    #[test]
    fn rhs_is_schrodinger_generator() {
        // −i σx |+⟩ = −i |−⟩
        let d = rhs(Vec3::EX, &[C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
        assert_eq!(d, [C64::new(0.0, 0.0), C64::new(0.0, -1.0)]);
        let d = rhs(
            Vec3::EZ.scale(PI),
            &[C64::new(0.0, 0.0), C64::new(1.0, 0.0)],
        );
        assert_eq!(d, [C64::new(0.0, 0.0), C64::new(0.0, PI)]);
    }
}
