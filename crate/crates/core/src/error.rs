use thiserror::Error;

pub type Result<T> = std::result::Result<T, NcaaError>;

#[derive(Debug, Error)]
pub enum NcaaError {
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("non-finite value at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("numeric failure at iteration {iteration}: {detail}")]
    NumericFailure { iteration: usize, detail: String },

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("generation failed for column {column} after {draws} draws")]
    Generation { column: usize, draws: usize },

    #[error("parse error at line {line}, offset {offset}: {detail}")]
    Parse {
        line: usize,
        offset: usize,
        detail: String,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl NcaaError {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        NcaaError::Shape {
            op,
            detail: detail.into(),
        }
    }
}
