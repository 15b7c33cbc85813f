use thiserror::Error;

/// Errors produced by the walking pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter is out of its valid range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// A structural problem with matrices or geometry (non-PD Hessian,
    /// inconsistent bounds, non-detectable observer, dimension mismatch).
    #[error("structural error: {0}")]
    Structural(String),

    /// The QP solver could not produce a usable solution.
    #[error("solver failure: {0}")]
    Solver(String),

    /// Path or footstep planning failed.
    #[error("planning failed: {0}")]
    Planning(String),

    /// A trajectory was queried outside its domain.
    #[error("query out of range: {0}")]
    Query(String),

    /// The controller could not produce a command for a cycle.
    #[error("controller fault at cycle {cycle} (t = {time:.3} s): {reason}")]
    ControllerFault {
        cycle: usize,
        time: f64,
        reason: String,
    },

    /// The bisection bracket did not straddle the survive/fall boundary.
    #[error("invalid bracket: {0}")]
    Bracket(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn param<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(msg.into()))
}
