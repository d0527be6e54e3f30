//! Crate-wide error type.
//!
//! Errors are grouped by what the caller can do about them:
//!
//! * [`Error::Hypothesis`] — the input data violate a structural hypothesis
//!   of the model (non-subsonic upstream state, non-monotone velocity
//!   profile, obstacle taller than the domain, ...). The computation was
//!   never meaningful; fix the problem setup.
//! * [`Error::Numerics`] — an iteration failed to converge or produced a
//!   non-finite value. For the nonlinear solver this is the operational
//!   signal that no certified subsonic solution was found at the requested
//!   upstream density; continuation treats it as data, everything else as
//!   failure.
//! * [`Error::Config`] — malformed or inconsistent run configuration
//!   (unknown key, value out of range, missing required field).
//! * [`Error::Io`] — file system problems while reading configs or writing
//!   results.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// All failure modes surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A structural hypothesis of the flow model is violated by the inputs.
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    /// An iterative procedure diverged, stagnated, or produced non-finite
    /// values. Carries enough context to diagnose (and, for the outer
    /// solver, the iteration history).
    #[error("numerical failure: {0}")]
    Numerics(String),

    /// Invalid run configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// Underlying I/O failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors that the parameter continuation driver records as a
    /// failed probe instead of aborting the sweep.
    pub fn is_numerics(&self) -> bool {
        matches!(self, Error::Numerics(_))
    }
}
