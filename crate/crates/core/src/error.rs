use thiserror::Error;

/// Errors shared across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid prior: {0}")]
    InvalidPrior(String),

    /// The reweighted family carries no mass: every node has zero weight.
    /// Unreachable under the true dynamics (a jump proves the rate is
    /// positive), so this signals caller misuse rather than a NaN.
    #[error("degenerate posterior at n={n}, z={z}: no support mass remains")]
    DegeneratePosterior { n: u32, z: f64 },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("CFL violation: dt * max transport rate = {cfl_number:.6} > 1; reduce dt below {dt_max:.6e}")]
    CflViolation { cfl_number: f64, dt_max: f64 },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// True for failures of numerical preconditions (as opposed to bad input
    /// shapes), used by the CLI to pick the exit code.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::CflViolation { .. } | Error::DegeneratePosterior { .. } | Error::NonFinite(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
