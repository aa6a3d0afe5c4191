//! Error type shared by every module of the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Malformed input: wrong dimensions, non-finite entries, bad parameters.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A linear system that must be consistent is not.
    #[error("infeasible system: relative residual {residual:.3e} exceeds tolerance {tol:.1e}")]
    Infeasible { residual: f64, tol: f64 },

    /// No quadratic interpolates the data in the minimum-norm sense.
    #[error("MN problem infeasible: relative residual {residual:.3e}")]
    MnInfeasible { residual: f64 },

    /// The MFN KKT system is inconsistent.
    #[error("MFN problem infeasible: relative residual {residual:.3e}")]
    MfnInfeasible { residual: f64 },

    /// The KKT matrix of the MFN problem is numerically singular.
    #[error("sample set is not poised for MFN interpolation (sigma_min/sigma_max = {ratio:.3e})")]
    NotPoised { ratio: f64 },

    /// A precondition of a closed-form construction does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Direction outside the subspace a bound is stated on.
    #[error("domain error: {0}")]
    Domain(String),

    /// The objective returned a non-finite value.
    #[error("objective returned {value} at {point:?}")]
    Evaluation { point: Vec<f64>, value: f64 },

    /// Numerical routine failed to converge.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True for the two interpolation-infeasibility variants.
    pub fn is_infeasible(&self) -> bool {
        matches!(
            self,
            Error::MnInfeasible { .. } | Error::MfnInfeasible { .. } | Error::Infeasible { .. }
        )
    }
}
