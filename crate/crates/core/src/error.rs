use alloc::string::String;

/// Errors raised by the simulation core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("{what} out of range: {detail}")]
    Range { what: &'static str, detail: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("coherent state truncation tail {tail:.3e} exceeds tolerance {tol:.3e}; increase nmax above {nmax}")]
    Truncation { tail: f64, tol: f64, nmax: usize },

    #[error("operator flagged Hermitian deviates by {deviation:.3e}")]
    NotHermitian { deviation: f64 },

    #[error("path is not closed (endpoint gap {gap:.3e})")]
    OpenPath { gap: f64 },

    #[error("integration failed at step {step} (t = {time} ms): {reason}")]
    Integration { step: usize, time: f64, reason: &'static str },

    #[error("eigenvalue gap {gap:.3e} at t = {time} ms is below the required {required:.3e}")]
    Degeneracy { gap: f64, time: f64, required: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn range(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Range { what, detail: detail.into() }
    }

    /// True for failures of the numerics themselves rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Integration { .. } | Error::Degeneracy { .. } | Error::NotHermitian { .. })
    }
}

pub type Result<T> = core::result::Result<T, Error>;
