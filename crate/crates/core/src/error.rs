use thiserror::Error;

/// Errors produced by the channel model, the optimizers and the scenario runner.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the function it was passed to.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration violates one of the model invariants.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// The stretched-exponential shape fit failed; `trace` holds the best
    /// residual after each restart.
    #[error("shape fit did not converge: residual {residual:.3e} after {} restarts", trace.len())]
    FitDidNotConverge { residual: f64, trace: Vec<f64> },

    /// The closed-form water-filling solution would assign non-positive power
    /// to at least one band.
    #[error("budget too small for interior solution: band {band} would get {power:.4e}")]
    BudgetTooSmall { band: usize, power: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidConfig(msg.into())
}
