use thiserror::Error;

use crate::lineshape::LorentzFit;

pub type Result<T, E = OmitError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum OmitError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The requested input lies outside the regime a model is valid for.
    #[error("{quantity} = {value:e} outside model validity range (limit {limit:e})")]
    OutOfValidityRange {
        quantity: &'static str,
        value: f64,
        limit: f64,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("grid spacing {spacing:e} Hz exceeds the limit {limit:e} Hz (linewidth/10)")]
    GridTooCoarse { spacing: f64, limit: f64 },

    #[error(
        "linear system at Omega = {omega:e} rad/s is singular (condition number {condition:e})"
    )]
    SingularSystem { omega: f64, condition: f64 },

    #[error("dip not resolved: {in_dip} samples inside the half-depth band, need {required}")]
    DipNotResolved { in_dip: usize, required: usize },

    #[error("fit did not converge after {iterations} iterations")]
    NoConvergence {
        iterations: usize,
        last: Box<LorentzFit>,
    },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("sample rate {sample_rate:e} Hz does not oversample a {frequency:e} Hz beat by 4x")]
    Alias { sample_rate: f64, frequency: f64 },

    #[error("integration window {window:e} s is shorter than {required:e} s (10 periods)")]
    WindowTooShort { window: f64, required: f64 },
}

impl OmitError {
    /// Whether the error comes from a violated precondition (as opposed to a
    /// numerical failure inside an otherwise valid computation).
    pub fn is_precondition(&self) -> bool {
        !matches!(
            self,
            OmitError::SingularSystem { .. }
                | OmitError::NoConvergence { .. }
                | OmitError::DegenerateInput(_)
        )
    }
}

pub(crate) fn require(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(OmitError::InvalidParameter(msg()))
    }
}
