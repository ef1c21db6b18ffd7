//! Reference solution of the Schrödinger equation and the post-processing
//! that turns traces into resonance amplitudes.

mod dopri;
mod series;
mod sweep;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::analytic::MethodId;
use crate::error::{Error, Result};

pub use dopri::{integrate_schrodinger, integrate_transformed, integrate_window, Trajectory};
pub use series::{
    closed_form_series, extract_amplitude, format_float, hf_average, max_deviation, sample_times,
    TimeSeries,
};
pub use sweep::{
    numeric_amplitude, numeric_horizon, resonance_sweep, resonance_sweep_collect, SweepFailure,
    SweepResult, OMEGA_FLOOR,
};

/// Tolerance bounds accepted by the integrator.
pub const MIN_TOL: f64 = 1e-12;
pub const MAX_TOL: f64 = 1e-6;

/// Source of a trace or amplitude: a closed form or the ODE integrator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Analytic(MethodId),
    Numeric,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Analytic(MethodId::ExactR0),
        Method::Analytic(MethodId::Averaging),
        Method::Analytic(MethodId::MultiScale),
        Method::Numeric,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Analytic(m) => m.name(),
            Method::Numeric => "numeric",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s.trim().eq_ignore_ascii_case("numeric") {
            return Ok(Method::Numeric);
        }
        s.parse::<MethodId>().map(Method::Analytic).map_err(|_| {
            Error::domain(format!(
                "unknown method '{s}' (expected exact, avg, ms or numeric)"
            ))
        })
    }
}

impl Serialize for Method {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Method {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub(crate) fn check_tol(tol: f64) -> Result<()> {
    if !(MIN_TOL..=MAX_TOL).contains(&tol) {
        return Err(Error::domain(format!(
            "tolerance must lie in [{MIN_TOL:e}, {MAX_TOL:e}], got {tol:e}"
        )));
    }
    Ok(())
}
