//! Closed-form results of the averaging and multiple-scale treatments.
//!
//! Averaging replaces the rotating-frame Hamiltonian by its mean over one
//! drive period, which renormalizes ω⊥ to ω⊥·J0(r). The multiple-scale
//! treatment adds the ε² correction: the generator becomes (1 + ε²η)·h_eff,
//! or, on the resonant branch (ω∥ = −1 with r a zero of J0, where h_eff
//! vanishes), the transverse term −ε²(ω⊥/2)³γ1(r_j)σx.

use std::collections::HashMap;
use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;
use std::sync::{OnceLock, RwLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{z_rotation, DriveParams};
use crate::special::{
    bessel_j0, bessel_j0_zero, integrate, struve_h0, CumulativeIntegral, QuadratureSpec,
};
use crate::su2::{expect_sz, pauli_exponential, PauliOperator, Spinor, Vec3, C64};

/// Both `|1 + ω∥|` and `|J0(r)|` must fall below this for the resonant-branch
/// formulas to apply.
pub const RESONANCE_TOL: f64 = 1e-9;

/// Distance from a zero of J0 within which `r` is identified with that zero.
/// Looser than `RESONANCE_TOL` because |J0'| = |J1| < 1 at the zeros.
const ZERO_MATCH_TOL: f64 = 1e-7;

const CUMULATIVE_PANELS: usize = 256;

fn tight_spec() -> QuadratureSpec {
    QuadratureSpec {
        abs_tol: 1e-12,
        rel_tol: 1e-12,
        max_refinements: 30,
    }
}

/// Which analytical propagator to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MethodId {
    /// Exact solution without the axial drive (r = 0 only).
    #[serde(rename = "exact")]
    ExactR0,
    #[serde(rename = "avg")]
    Averaging,
    #[serde(rename = "ms")]
    MultiScale,
}

impl MethodId {
    pub fn name(&self) -> &'static str {
        match self {
            MethodId::ExactR0 => "exact",
            MethodId::Averaging => "avg",
            MethodId::MultiScale => "ms",
        }
    }
}

impl fmt::Display for MethodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MethodId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "exact" | "exact_r0" | "exactr0" => Ok(MethodId::ExactR0),
            "avg" | "averaging" => Ok(MethodId::Averaging),
            "ms" | "multiscale" | "multi-scale" | "multiple-scale" => Ok(MethodId::MultiScale),
            other => Err(Error::domain(format!("unknown analytic method '{other}'"))),
        }
    }
}

/// Rabi frequency without the axial drive, `sqrt((1+ω∥)² + ω⊥²)`.
pub fn omega0(p: &DriveParams) -> f64 {
    (1.0 + p.omega_par()).hypot(p.omega_perp())
}

/// `sqrt((1+ω∥)² + (ω⊥ J0(r))²)`.
pub fn omega_eff(p: &DriveParams) -> f64 {
    (1.0 + p.omega_par()).hypot(p.omega_perp() * bessel_j0(p.r()))
}

pub fn is_resonant_branch(p: &DriveParams) -> bool {
    (1.0 + p.omega_par()).abs() < RESONANCE_TOL && bessel_j0(p.r()).abs() < RESONANCE_TOL
}

/// Unit vector `n` with `h_eff = −(Ω_eff/2) n·σ`; `None` when `h_eff` vanishes.
pub fn effective_axis(p: &DriveParams) -> Option<Vec3> {
    let omega = omega_eff(p);
    if omega == 0.0 || is_resonant_branch(p) {
        return None;
    }
    Some(Vec3::new(p.omega_perp() * bessel_j0(p.r()), 0.0, 1.0 + p.omega_par()).scale(1.0 / omega))
}

/// Period-averaged rotating-frame Hamiltonian `−½[ω⊥J0(r)σx + (1+ω∥)σz]`.
/// Exactly zero on the resonant branch.
pub fn h_eff(p: &DriveParams) -> PauliOperator {
    if is_resonant_branch(p) {
        return PauliOperator::zero();
    }
    PauliOperator::hermitian(
        0.0,
        Vec3::new(
            -0.5 * p.omega_perp() * bessel_j0(p.r()),
            0.0,
            -0.5 * (1.0 + p.omega_par()),
        ),
    )
}

fn signed_integral(f: impl Fn(f64) -> f64, upper: f64, spec: &QuadratureSpec) -> Result<f64> {
    if upper >= 0.0 {
        integrate(f, 0.0, upper, spec)
    } else {
        integrate(f, upper, 0.0, spec).map(|v| -v)
    }
}

/// Phase-dependent coefficients
/// `a = 2∫₀^φ sin(r sin t)dt − πH0(r)` and `b = 2[∫₀^φ cos(r sin t)dt − φJ0(r)]`.
pub fn ab_funcs(r: f64, phi: f64) -> Result<(f64, f64)> {
    let spec = tight_spec();
    let s = signed_integral(|t| (r * t.sin()).sin(), phi, &spec)?;
    let c = signed_integral(|t| (r * t.sin()).cos(), phi, &spec)?;
    Ok((2.0 * s - PI * struve_h0(r), 2.0 * (c - phi * bessel_j0(r))))
}

/// Real vector `m` with `Π_eff = i·m`:
/// `m = −(ω⊥/4){(1+ω∥)[a e_x − b e_y] − ω⊥J0(r) a e_z}`.
pub fn pi_eff_vector(p: &DriveParams) -> Result<Vec3> {
    if is_resonant_branch(p) {
        return Ok(Vec3::ZERO);
    }
    let (a, b) = ab_funcs(p.r(), p.phi_hf())?;
    let detuning = 1.0 + p.omega_par();
    let k = -0.25 * p.omega_perp();
    Ok(Vec3::new(
        k * detuning * a,
        -k * detuning * b,
        -k * p.omega_perp() * bessel_j0(p.r()) * a,
    ))
}

/// `Σ(t0) = ∫₀^{t0} [h(t0') − h_eff] dt0'`, periodic in `t0` with period 2π.
pub fn sigma_op(t0: f64, p: &DriveParams) -> Result<PauliOperator> {
    let spec = tight_spec();
    let (r, phi) = (p.r(), p.phi_hf());
    let j0 = bessel_j0(r);
    let cx = signed_integral(|u| (r * (u + phi).sin()).cos() - j0, t0, &spec)?;
    let cy = signed_integral(|u| (r * (u + phi).sin()).sin(), t0, &spec)?;
    let half_perp = 0.5 * p.omega_perp();
    Ok(PauliOperator::hermitian(
        0.0,
        Vec3::new(-half_perp * cx, -half_perp * cy, 0.0),
    ))
}

/// `Λ(t1) = [sin(Ω t1)/Ω · Π_eff + (1 − cos Ω t1)/Ω · n∧Π_eff]·σ`, zero on
/// the resonant branch.
pub fn lambda_op(t1: f64, p: &DriveParams) -> Result<PauliOperator> {
    let Some(n) = effective_axis(p) else {
        return Ok(PauliOperator::zero());
    };
    let omega = omega_eff(p);
    let m = pi_eff_vector(p)?;
    let phase = omega * t1;
    let vector = m.scale(phase.sin() / omega) + n.cross(&m).scale((1.0 - phase.cos()) / omega);
    Ok(PauliOperator::from_vector(C64::new(0.0, 1.0), vector))
}

#[derive(Debug, Clone, Copy)]
struct GammaPair {
    gamma1: f64,
    gamma2: f64,
}

fn gamma_cache() -> &'static RwLock<HashMap<u64, GammaPair>> {
    static CACHE: OnceLock<RwLock<HashMap<u64, GammaPair>>> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

fn gammas(r: f64) -> Result<GammaPair> {
    if !(r >= 0.0 && r.is_finite()) {
        return Err(Error::domain(format!(
            "gamma functions need finite r >= 0, got {r}"
        )));
    }
    let key = r.to_bits();
    if let Some(hit) = gamma_cache().read().ok().and_then(|m| m.get(&key).copied()) {
        return Ok(hit);
    }
    let computed = compute_gammas(r)?;
    let mut map = gamma_cache().write().unwrap_or_else(|e| e.into_inner());
    Ok(*map.entry(key).or_insert(computed))
}

// The two inner integrals of γ1 both run over [0, φ] independently, so the
// triple integral factorizes into ∫ sin(r sin φ)·C(φ)·S(φ) dφ with running
// integrals C and S. In γ2, cos[r(sin φ − sin φ')] splits the same way.
fn compute_gammas(r: f64) -> Result<GammaPair> {
    let spec = tight_spec();
    let c = CumulativeIntegral::new(|u: f64| (r * u.sin()).cos(), 0.0, TAU, CUMULATIVE_PANELS);
    let s = CumulativeIntegral::new(|u: f64| (r * u.sin()).sin(), 0.0, TAU, CUMULATIVE_PANELS);
    let j0 = bessel_j0(r);
    let h0 = struve_h0(r);

    let triple = integrate(
        |phi| (r * phi.sin()).sin() * c.eval(phi) * s.eval(phi),
        0.0,
        TAU,
        &spec,
    )?;
    let gamma1 = 0.5 * PI * PI * j0 * h0 * h0 + 2.0 / PI * triple;

    let weighted = integrate(|phi| phi * phi * (r * phi.sin()).cos(), 0.0, TAU, &spec)?;
    let double = integrate(
        |phi| {
            let arg = r * phi.sin();
            phi * (arg.cos() * c.eval(phi) + arg.sin() * s.eval(phi))
        },
        0.0,
        TAU,
        &spec,
    )?;
    let gamma2 = 0.25 * PI * PI * h0 * h0 - 4.0 * PI * PI / 3.0 * j0 * j0 - j0 / TAU * weighted
        + double / PI;
    Ok(GammaPair { gamma1, gamma2 })
}

/// γ1(r). Memoized per `r`.
pub fn gamma1(r: f64) -> Result<f64> {
    gammas(r).map(|g| g.gamma1)
}

/// γ2(r). Memoized per `r`.
pub fn gamma2(r: f64) -> Result<f64> {
    gammas(r).map(|g| g.gamma2)
}

/// γ1 evaluated at the `j`-th zero of J0.
pub fn gamma1_at_zero(j: usize) -> Result<f64> {
    gamma1(bessel_j0_zero(j)?)
}

/// Index `j` such that `r` is within 1e-9 of the `j`-th zero of J0.
pub fn j0_zero_index(r: f64) -> Option<usize> {
    let guess = (r / PI + 0.25).round();
    if guess < 1.0 || !guess.is_finite() {
        return None;
    }
    let j = guess as usize;
    bessel_j0_zero(j)
        .ok()
        .filter(|z| (r - z).abs() < ZERO_MATCH_TOL)
        .map(|_| j)
}

/// `(α_x, α_y, α_z)` at `(r, φ)`.
pub fn alphas(r: f64, phi: f64) -> Result<(f64, f64, f64)> {
    let (a, b) = ab_funcs(r, phi)?;
    let g = gammas(r)?;
    let j0 = bessel_j0(r);
    Ok((
        0.5 * j0 * a * a - g.gamma1,
        -0.5 * j0 * a * b,
        0.25 * a * a + 0.25 * b * b - g.gamma2,
    ))
}

/// `q = −(ω⊥/2)²{(ω⊥/2)[α_x e_x + α_y e_y] + (1+ω∥)α_z e_z}`.
pub fn q_vector(p: &DriveParams) -> Result<Vec3> {
    let (ax, ay, az) = alphas(p.r(), p.phi_hf())?;
    let half_perp = 0.5 * p.omega_perp();
    let k = -half_perp * half_perp;
    Ok(Vec3::new(
        k * half_perp * ax,
        k * half_perp * ay,
        k * (1.0 + p.omega_par()) * az,
    ))
}

fn check_eta_domain(p: &DriveParams) -> Result<()> {
    if is_resonant_branch(p) {
        return Err(Error::domain(
            "eta is undefined on the resonant branch (Omega_eff = 0); use gamma1 at the J0 zero",
        ));
    }
    if omega_eff(p) == 0.0 && p.omega_perp() != 0.0 {
        return Err(Error::InconsistentParameters(
            "Omega_eff vanishes off the resonant branch".into(),
        ));
    }
    Ok(())
}

/// Frequency correction coefficient
/// `η = ½(ω⊥/Ω_eff)²[(ω⊥²/2)J0(r)γ1(r) + (1+ω∥)²γ2(r)]`.
///
/// η → 0 as ω⊥ → 0, so `ω⊥ = 0` returns 0.
pub fn eta(p: &DriveParams) -> Result<f64> {
    check_eta_domain(p)?;
    if p.omega_perp() == 0.0 {
        return Ok(0.0);
    }
    let g = gammas(p.r())?;
    let perp = p.omega_perp();
    let ratio = perp / omega_eff(p);
    let detuning = 1.0 + p.omega_par();
    Ok(0.5
        * ratio
        * ratio
        * (0.5 * perp * perp * bessel_j0(p.r()) * g.gamma1 + detuning * detuning * g.gamma2))
}

/// η from the vector form `(2/Ω_eff)(n·q − Π_eff·Π_eff/Ω_eff)` with
/// `Π_eff·Π_eff = −|m|²`.
pub fn eta_via_vectors(p: &DriveParams) -> Result<f64> {
    check_eta_domain(p)?;
    let Some(n) = effective_axis(p) else {
        return Ok(0.0);
    };
    let omega = omega_eff(p);
    let q = q_vector(p)?;
    let m = pi_eff_vector(p)?;
    let pi_dot_pi = -m.dot(&m);
    Ok(2.0 / omega * (n.dot(&q) - pi_dot_pi / omega))
}

/// Multiple-scale generator: `(1 + ε²η)h_eff`, or `−ε²(ω⊥/2)³γ1(r_j)σx` on
/// the resonant branch.
pub fn ms_hamiltonian(p: &DriveParams) -> Result<PauliOperator> {
    if is_resonant_branch(p) {
        let gamma = resonant_gamma1(p)?;
        let half_perp = 0.5 * p.omega_perp();
        let eps = p.epsilon();
        return Ok(PauliOperator::hermitian(
            0.0,
            Vec3::new(-eps * eps * half_perp.powi(3) * gamma, 0.0, 0.0),
        ));
    }
    let eps = p.epsilon();
    Ok(h_eff(p).scale(C64::new(1.0 + eps * eps * eta(p)?, 0.0)))
}

fn resonant_gamma1(p: &DriveParams) -> Result<f64> {
    let j = j0_zero_index(p.r()).ok_or_else(|| {
        Error::InconsistentParameters(format!(
            "Omega_eff = 0 but r = {} is not within {ZERO_MATCH_TOL:e} of a zero of J0",
            p.r()
        ))
    })?;
    gamma1_at_zero(j)
}

/// Oscillation frequency of the multiple-scale trace: `(1 + ε²η)Ω_eff`, or the
/// signed `Ω_ms,j = (ε²/4)ω⊥³γ1(r_j)` on the resonant branch.
pub fn ms_frequency(p: &DriveParams) -> Result<f64> {
    let eps = p.epsilon();
    if is_resonant_branch(p) {
        return Ok(0.25 * eps * eps * p.omega_perp().powi(3) * resonant_gamma1(p)?);
    }
    Ok((1.0 + eps * eps * eta(p)?) * omega_eff(p))
}

/// Derived scalars and vectors for one parameter point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EffectiveQuantities {
    pub omega0: f64,
    pub omega_eff: f64,
    pub n: Option<Vec3>,
    pub j0r: f64,
    pub a: f64,
    pub b: f64,
    pub m: Vec3,
    pub q: Vec3,
    pub alpha_x: f64,
    pub alpha_y: f64,
    pub alpha_z: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    /// `None` on the resonant branch.
    pub eta: Option<f64>,
    pub omega_ms: f64,
    pub amplitude_avg: f64,
    pub amplitude_ms: f64,
    pub resonant_branch: bool,
}

impl EffectiveQuantities {
    pub fn compute(p: &DriveParams) -> Result<Self> {
        let resonant_branch = is_resonant_branch(p);
        let (a, b) = ab_funcs(p.r(), p.phi_hf())?;
        let (alpha_x, alpha_y, alpha_z) = alphas(p.r(), p.phi_hf())?;
        let g = gammas(p.r())?;
        Ok(EffectiveQuantities {
            omega0: omega0(p),
            omega_eff: omega_eff(p),
            n: effective_axis(p),
            j0r: bessel_j0(p.r()),
            a,
            b,
            m: pi_eff_vector(p)?,
            q: q_vector(p)?,
            alpha_x,
            alpha_y,
            alpha_z,
            gamma1: g.gamma1,
            gamma2: g.gamma2,
            eta: if resonant_branch { None } else { Some(eta(p)?) },
            omega_ms: ms_frequency(p)?,
            amplitude_avg: amplitude_closed(MethodId::Averaging, p)?,
            amplitude_ms: amplitude_closed(MethodId::MultiScale, p)?,
            resonant_branch,
        })
    }
}

fn require_r0(method: MethodId, p: &DriveParams) -> Result<()> {
    if method == MethodId::ExactR0 && p.r() != 0.0 {
        return Err(Error::domain(format!(
            "the exact method only applies without the axial drive (r = 0), got r = {}",
            p.r()
        )));
    }
    Ok(())
}

/// Time evolution operator from 0 to `t` for the chosen method.
pub fn propagator(method: MethodId, t: f64, p: &DriveParams) -> Result<PauliOperator> {
    require_r0(method, p)?;
    match method {
        MethodId::ExactR0 => {
            let h0 = p.hamiltonian_transformed(0.0);
            Ok(z_rotation(t) * pauli_exponential(&h0, t)?)
        }
        MethodId::Averaging => {
            Ok(p.gauge_factor(t) * pauli_exponential(&h_eff(p), t)? * z_rotation(p.theta(0.0)))
        }
        MethodId::MultiScale => Ok(p.gauge_factor(t)
            * pauli_exponential(&ms_hamiltonian(p)?, t)?
            * z_rotation(p.theta(0.0))),
    }
}

/// `⟨σz⟩` obtained by applying [`propagator`] to `init`.
pub fn expect_sz_propagated(
    method: MethodId,
    t: f64,
    p: &DriveParams,
    init: &Spinor,
) -> Result<f64> {
    Ok(expect_sz(&propagator(method, t, p)?.apply(init)))
}

fn rabi_trace(amplitude: f64, omega: f64, t: f64) -> f64 {
    1.0 + amplitude * ((omega * t).cos() - 1.0)
}

/// `⟨σz⟩(t)` for the chosen method. σz eigenstates use the scalar closed
/// forms; other initial states go through the propagator.
pub fn expect_sz_closed(method: MethodId, t: f64, p: &DriveParams, init: &Spinor) -> Result<f64> {
    require_r0(method, p)?;
    let sign = if init.is_plus() {
        1.0
    } else if init.is_minus() {
        -1.0
    } else {
        return expect_sz_propagated(method, t, p, init);
    };
    let value = match method {
        MethodId::ExactR0 => {
            let omega = omega0(p);
            if omega == 0.0 {
                1.0
            } else {
                rabi_trace((p.omega_perp() / omega).powi(2), omega, t)
            }
        }
        MethodId::Averaging => {
            if is_resonant_branch(p) || omega_eff(p) == 0.0 {
                1.0
            } else {
                rabi_trace(amplitude_closed(method, p)?, omega_eff(p), t)
            }
        }
        MethodId::MultiScale => {
            if is_resonant_branch(p) {
                (ms_frequency(p)? * t).cos()
            } else if omega_eff(p) == 0.0 {
                1.0
            } else {
                rabi_trace(amplitude_closed(method, p)?, ms_frequency(p)?, t)
            }
        }
    };
    Ok(sign * value)
}

/// Half peak-to-peak excursion of `⟨σz⟩` from a σz eigenstate.
pub fn amplitude_closed(method: MethodId, p: &DriveParams) -> Result<f64> {
    require_r0(method, p)?;
    let ratio = |num: f64, den: f64| if den == 0.0 { 0.0 } else { (num / den).powi(2) };
    Ok(match method {
        MethodId::ExactR0 => ratio(p.omega_perp(), omega0(p)),
        MethodId::Averaging if is_resonant_branch(p) => 0.0,
        MethodId::MultiScale if is_resonant_branch(p) => 1.0,
        MethodId::Averaging | MethodId::MultiScale => {
            ratio(p.omega_perp() * bessel_j0(p.r()), omega_eff(p))
        }
    })
}
