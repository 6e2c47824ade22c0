use std::path::PathBuf;

/// Errors raised by the solver library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Two Floquet matrices (or a matrix and an index set) disagree in size.
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    /// A matrix could not be inverted to the required accuracy.
    #[error("matrix inversion failed: residual {residual:e} exceeds limit")]
    InversionFailure { residual: f64 },

    /// Inversion failure inside the band integral, with the offending node.
    #[error("inversion failed at eps = {eps}, omega = {omega}: residual {residual:e}")]
    NodeInversion { eps: f64, omega: f64, residual: f64 },

    /// The local propagator could not be inverted during Weiss-field extraction.
    #[error("Weiss-field inversion failed at omega = {omega}: residual {residual:e}")]
    WeissInversion { omega: f64, residual: f64 },

    /// A configuration value is out of range or inconsistent.
    #[error("invalid configuration field `{field}`: {reason}")]
    Config { field: &'static str, reason: String },

    /// Bessel order outside the range where accuracy is guaranteed.
    #[error("Bessel order {order} outside the sanctioned range |order| <= {limit}")]
    BesselOrder { order: i64, limit: i64 },

    /// Malformed density-of-states table.
    #[error("DOS table {path}: {reason}")]
    DosTable { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn config_error(field: &'static str, reason: impl Into<String>) -> Error {
    Error::Config {
        field,
        reason: reason.into(),
    }
}
