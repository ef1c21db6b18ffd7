use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    /// Adaptive quadrature ran out of refinements. `estimate` is the best
    /// value obtained.
    #[error(
        "quadrature tolerance not met: estimate {estimate:e} with error {error:e} > target {target:e}"
    )]
    ToleranceNotMet {
        estimate: f64,
        error: f64,
        target: f64,
    },

    #[error("step size underflow (h = {h:e}) at t = {t}")]
    Stiffness { t: f64, h: f64 },

    #[error("integrator failure: {0}")]
    IntegratorFailure(String),

    #[error(
        "series spans {span} time units but {required} are needed; rerun with t_end >= {t_end_needed}"
    )]
    InsufficientSpan {
        span: f64,
        required: f64,
        t_end_needed: f64,
    },

    #[error("inconsistent parameters: {0}")]
    InconsistentParameters(String),

    #[error("sweep point omega_par = {omega_par}: {source}")]
    SweepPoint {
        omega_par: f64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for failures of the numerical machinery (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::ToleranceNotMet { .. }
            | Error::Stiffness { .. }
            | Error::IntegratorFailure(_)
            | Error::InconsistentParameters(_) => true,
            Error::SweepPoint { source, .. } => source.is_numerical(),
            Error::Domain(_) | Error::InsufficientSpan { .. } => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
