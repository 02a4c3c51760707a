use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors produced anywhere in the estimation and network pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Input structure does not match what the consumer expects
    /// (missing CSV column, design/fit column mismatch, shape mismatch).
    #[error("schema error: {0}")]
    Schema(String),

    /// A row or value failed validation.
    #[error("validation error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Validation { line: Option<usize>, message: String },

    #[error("not found: {0}")]
    NotFound(String),

    /// A required precondition of an operation does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("singular design: column(s) {} are collinear with preceding columns", columns.join(", "))]
    SingularDesign { columns: Vec<String> },

    /// The iterative fit did not converge; `last` holds the final iterate.
    #[error("{model} fit did not converge after {iterations} iterations: {reason}")]
    Convergence {
        model: String,
        iterations: usize,
        reason: String,
        last: Vec<f64>,
    },

    #[error("complete or quasi-complete separation detected in {model} fit: {reason}")]
    Separation { model: String, reason: String },

    #[error("prediction overflow for dyad {exporter} -> {importer} (linear predictor {eta})")]
    PredictionOverflow {
        exporter: String,
        importer: String,
        eta: f64,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("undefined: {0}")]
    Undefined(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("country sets do not align (missing: [{}], unexpected: [{}])", missing.join(", "), unexpected.join(", "))]
    Alignment {
        missing: Vec<String>,
        unexpected: Vec<String>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn validation(line: Option<usize>, message: impl Into<String>) -> Self {
        Error::Validation {
            line,
            message: message.into(),
        }
    }
}
