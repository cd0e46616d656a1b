use thiserror::Error;

/// Errors raised anywhere in the synthesis stack.
#[derive(Debug, Error)]
pub enum BpsError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("degenerate forecast variance q = {q} (must be > 0)")]
    DegenerateVariance { q: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("missing value for series '{series}' at row {row}")]
    MissingData { series: String, row: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<BpsError>,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl BpsError {
    /// Wraps the error with a location such as `(t=12, k=4, method=BPS)`.
    pub fn with_context(self, context: impl Into<String>) -> Self {
        BpsError::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Process exit code: 2 config, 3 data, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            BpsError::Config(_) | BpsError::InvalidParameter(_) => 2,
            BpsError::Data(_)
            | BpsError::MissingData { .. }
            | BpsError::Io(_)
            | BpsError::Csv(_)
            | BpsError::Json(_) => 3,
            BpsError::DimensionMismatch { .. }
            | BpsError::DegenerateVariance { .. }
            | BpsError::Numerical(_) => 4,
            BpsError::Context { source, .. } => source.exit_code(),
        }
    }
}

pub type Result<T> = std::result::Result<T, BpsError>;
