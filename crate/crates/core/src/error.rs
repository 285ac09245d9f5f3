//! Error type shared across the pipeline.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A CSV row that does not conform to the expected schema.
    #[error("line {line}: {msg}")]
    MalformedRecord { line: u64, msg: String },

    /// Input stream contained a header but no data rows.
    #[error("dataset is empty: {0}")]
    DatasetEmpty(String),

    /// Two readings share the same (customer, timestamp) key.
    #[error("line {line}: duplicate reading for customer {customer} at {timestamp}")]
    DuplicateReading {
        customer: String,
        timestamp: String,
        line: u64,
    },

    /// Readings for one customer are not in increasing time order.
    #[error("line {line}: out-of-order timestamp for customer {customer}: {timestamp}")]
    OutOfOrder {
        customer: String,
        timestamp: String,
        line: u64,
    },

    /// Not enough samples to perform the requested operation.
    #[error("insufficient data for {context}: need {needed}, have {got}")]
    InsufficientData {
        context: String,
        needed: usize,
        got: usize,
    },

    /// Input is valid in shape but degenerate in content (e.g. all points identical).
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// A physical or structural invariant was violated.
    #[error("invariant violation: {0}")]
    InvariantViolation(String),

    /// The eigensolver failed to reach the requested residual tolerance.
    #[error(
        "eigensolver did not converge: worst residual {residual:.3e} (tolerance {tolerance:.3e})"
    )]
    EigenNonConvergence { residual: f64, tolerance: f64 },

    /// A linear system could not be solved.
    #[error("singular system: {0}")]
    SingularSystem(String),

    /// Training data lacks at least one sample for some class.
    #[error("class {class} has no training samples")]
    ClassMissing { class: usize },

    /// AUC is undefined because only one class is present.
    #[error("AUC undefined for class {class}: positives={positives}, negatives={negatives}")]
    UndefinedAuc {
        class: usize,
        positives: usize,
        negatives: usize,
    },

    /// Two artifacts that must align (e.g. probabilities and regressions) do not.
    #[error("shape mismatch: {0}")]
    Mismatch(String),

    /// Configuration value outside its documented domain.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by bad inputs rather than numeric failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::MalformedRecord { .. }
                | Error::DatasetEmpty(_)
                | Error::DuplicateReading { .. }
                | Error::OutOfOrder { .. }
                | Error::InsufficientData { .. }
                | Error::InvalidConfig(_)
                | Error::Mismatch(_)
        )
    }
}
