//! Drive parameters and the lab-frame / rotating-frame Hamiltonians.
//!
//! Everything is dimensionless with the rotation frequency of the transverse
//! field set to one.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::su2::{PauliOperator, Vec3, C64};

/// Field parameters in units of the rotation frequency.
///
/// Serializes as a flat object with keys `omega_perp`, `omega_par`,
/// `Omega_HF`, `r`, `phi_hf`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct DriveParams {
    omega_perp: f64,
    omega_par: f64,
    hf_frequency: f64,
    r: f64,
    phi_hf: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    omega_perp: f64,
    omega_par: f64,
    #[serde(rename = "Omega_HF")]
    hf_frequency: f64,
    r: f64,
    phi_hf: f64,
}

impl TryFrom<RawParams> for DriveParams {
    type Error = Error;
    fn try_from(p: RawParams) -> Result<Self> {
        DriveParams::new(p.omega_perp, p.omega_par, p.hf_frequency, p.r, p.phi_hf)
    }
}

impl From<DriveParams> for RawParams {
    fn from(p: DriveParams) -> Self {
        RawParams {
            omega_perp: p.omega_perp,
            omega_par: p.omega_par,
            hf_frequency: p.hf_frequency,
            r: p.r,
            phi_hf: p.phi_hf,
        }
    }
}

impl DriveParams {
    /// `hf_frequency` is Ω_HF; `r` is the ratio ω_HF/Ω_HF of the axial drive
    /// strength to its frequency. A negative `r` is folded into the phase.
    pub fn new(
        omega_perp: f64,
        omega_par: f64,
        hf_frequency: f64,
        r: f64,
        phi_hf: f64,
    ) -> Result<Self> {
        let all_finite = [omega_perp, omega_par, hf_frequency, r, phi_hf]
            .iter()
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::domain("drive parameters must be finite"));
        }
        if hf_frequency <= 0.0 {
            return Err(Error::domain(format!(
                "Omega_HF must be positive, got {hf_frequency}"
            )));
        }
        let (r, phi_hf) = if r < 0.0 {
            (-r, phi_hf + PI)
        } else {
            (r, phi_hf)
        };
        let mut phi_hf = phi_hf.rem_euclid(TAU);
        if phi_hf >= TAU {
            phi_hf = 0.0;
        }
        Ok(DriveParams {
            omega_perp,
            omega_par,
            hf_frequency,
            r,
            phi_hf,
        })
    }

    pub fn omega_perp(&self) -> f64 {
        self.omega_perp
    }

    pub fn omega_par(&self) -> f64 {
        self.omega_par
    }

    /// Ω_HF.
    pub fn hf_frequency(&self) -> f64 {
        self.hf_frequency
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn phi_hf(&self) -> f64 {
        self.phi_hf
    }

    /// ω_HF = r·Ω_HF.
    pub fn hf_strength(&self) -> f64 {
        self.r * self.hf_frequency
    }

    /// ε = 1/Ω_HF.
    pub fn epsilon(&self) -> f64 {
        1.0 / self.hf_frequency
    }

    /// One period of the axial drive, 2π/Ω_HF.
    pub fn hf_period(&self) -> f64 {
        TAU / self.hf_frequency
    }

    /// Set when Ω_HF is not well separated from the other frequencies; the
    /// analytical propagators are not expected to be accurate there.
    pub fn outside_high_frequency_regime(&self) -> bool {
        self.hf_frequency < 10.0 * 1f64.max(self.omega_par.abs()).max(self.omega_perp)
    }

    pub fn with_omega_par(&self, omega_par: f64) -> Result<Self> {
        DriveParams::new(
            self.omega_perp,
            omega_par,
            self.hf_frequency,
            self.r,
            self.phi_hf,
        )
    }

    pub fn with_r(&self, r: f64) -> Result<Self> {
        DriveParams::new(
            self.omega_perp,
            self.omega_par,
            self.hf_frequency,
            r,
            self.phi_hf,
        )
    }

    pub fn with_phi_hf(&self, phi_hf: f64) -> Result<Self> {
        DriveParams::new(
            self.omega_perp,
            self.omega_par,
            self.hf_frequency,
            self.r,
            phi_hf,
        )
    }

    pub fn with_hf_frequency(&self, hf_frequency: f64) -> Result<Self> {
        DriveParams::new(
            self.omega_perp,
            self.omega_par,
            hf_frequency,
            self.r,
            self.phi_hf,
        )
    }

    /// θ(t) = r·sin(Ω_HF t + φ).
    pub fn theta(&self, t: f64) -> f64 {
        self.r * (self.hf_frequency * t + self.phi_hf).sin()
    }

    /// Lab-frame Hamiltonian
    /// `−(ω⊥/2)[cos t σx + sin t σy] − ½[ω∥ + ω_HF cos(Ω_HF t + φ)]σz`.
    pub fn hamiltonian_lab(&self, t: f64) -> PauliOperator {
        let half_perp = 0.5 * self.omega_perp;
        let axial =
            self.omega_par + self.hf_strength() * (self.hf_frequency * t + self.phi_hf).cos();
        PauliOperator::hermitian(
            0.0,
            Vec3::new(-half_perp * t.cos(), -half_perp * t.sin(), -0.5 * axial),
        )
    }

    /// Rotating-frame Hamiltonian as a function of the fast time `t0 = Ω_HF t`:
    /// `−(ω⊥/2){cos θ σx + sin θ σy} − ((1+ω∥)/2)σz`, `θ = r sin(t0 + φ)`.
    pub fn hamiltonian_transformed(&self, t0: f64) -> PauliOperator {
        PauliOperator::hermitian(0.0, self.transformed_vector(t0))
    }

    pub(crate) fn transformed_vector(&self, t0: f64) -> Vec3 {
        let theta = self.r * (t0 + self.phi_hf).sin();
        let half_perp = 0.5 * self.omega_perp;
        Vec3::new(
            -half_perp * theta.cos(),
            -half_perp * theta.sin(),
            -0.5 * (1.0 + self.omega_par),
        )
    }

    /// `e^{−i[t − θ(t)]σz/2}`, mapping the rotating-frame propagator to the
    /// lab-frame one.
    pub fn gauge_factor(&self, t: f64) -> PauliOperator {
        z_rotation(t - self.theta(t))
    }
}

/// `e^{−i α σz/2}`.
pub fn z_rotation(alpha: f64) -> PauliOperator {
    let half = 0.5 * alpha;
    PauliOperator::new(
        C64::new(half.cos(), 0.0),
        [
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, -half.sin()),
        ],
    )
}
