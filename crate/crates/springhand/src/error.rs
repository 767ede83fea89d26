//! Error types shared across the crate.

use thiserror::Error;

/// Errors raised while building or validating hand/tendon models.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("rom violation on dof `{dof}`: angle {angle} rad outside [{min}, {max}] rad")]
    RomViolation {
        dof: String,
        angle: f64,
        min: f64,
        max: f64,
    },

    #[error("configuration shape mismatch: expected {expected} dofs, got {got}")]
    ConfigurationShape { expected: usize, got: usize },

    #[error("tendon network inconsistency: {0}")]
    NetworkConsistency(String),

    #[error("tendon tension must be non-negative, got {0} N")]
    SlackViolation(f64),

    #[error("junction `{junction}` has no non-negative tension solution")]
    JunctionInfeasible { junction: String },
}

/// Errors raised by the equilibrium solver.
#[derive(Debug, Error)]
pub enum SolveError {
    #[error("equilibrium did not converge after {iterations} iterations (residual {residual} Nm)")]
    Diverged { iterations: usize, residual: f64 },

    #[error("contact set is infeasible: {0}")]
    ContactInfeasible(String),

    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Errors raised while loading or writing description files.
#[derive(Debug, Error)]
pub enum IoError {
    #[error("io error on `{path}`: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in `{path}` at line {line}, column {column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("schema violation in `{path}`: field `{field}`: {message}")]
    Schema {
        path: String,
        field: String,
        message: String,
    },

    #[error("unsupported schema version {got} in `{path}` (supported: {supported})")]
    SchemaVersion {
        path: String,
        got: u32,
        supported: u32,
    },

    #[error(transparent)]
    Model(#[from] ModelError),
}
