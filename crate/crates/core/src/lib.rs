//! Spin-1/2 magnetic resonance with an additional high-frequency axial drive.
//!
//! The lab-frame Hamiltonian (time in units of 1/ω0) is
//! `H(t) = −(ω⊥/2)[cos t σx + sin t σy] − ½[ω∥ + rΩ_HF cos(Ω_HF t + φ)]σz`.
//! The crate provides SU(2) helpers, the special functions the model needs,
//! closed-form averaging and multiple-scale propagators, a reference ODE
//! integrator, amplitude extraction and resonance sweeps, plus the `spinres`
//! command line tool.

// `!(x > y)` comparisons deliberately reject NaN along with the bad range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod cli;
pub mod error;
pub mod model;
pub mod numeric;
pub mod special;
pub mod su2;

pub use analytic::{EffectiveQuantities, MethodId};
pub use error::{Error, Result};
pub use model::DriveParams;
pub use numeric::{Method, SweepResult, TimeSeries};
pub use su2::{PauliOperator, Spinor, Vec3, C64};
