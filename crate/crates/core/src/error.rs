use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Unified error type for the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    ShapeMismatch {
        context: &'static str,
        expected: String,
        got: String,
    },
    #[error("non-finite value produced by {op}")]
    NonFinite { op: &'static str },
    #[error("backward called before forward")]
    BackwardBeforeForward,
    #[error("leaf node {0} has no bound value")]
    UnboundLeaf(usize),

    #[error("missing column {0:?}")]
    MissingColumn(String),
    #[error("non-numeric feature at row {row}, column {col:?}")]
    NonNumericFeature { row: usize, col: String },
    #[error("file contains no data rows")]
    EmptyFile,
    #[error("malformed CSV at line {line}: {msg}")]
    CsvFormat { line: usize, msg: String },
    #[error("unknown attribute {0:?}")]
    UnknownAttribute(String),
    #[error("degenerate partition: {0}")]
    DegeneratePartition(String),
    #[error("empty partition {0:?}")]
    EmptyPartition(String),
    #[error("class with zero examples requested")]
    EmptyClass,
    #[error("dataset contains no examples")]
    EmptyDataset,

    #[error("dimension mismatch: model expects {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("gradient of the logit margin is zero; distance undefined")]
    DegenerateGradient,
    #[error("model has identical score functions for two classes")]
    DegenerateModel,
    #[error("training loss became non-finite at epoch {epoch}")]
    NanLoss { epoch: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("no correctly classified examples on the {side} side")]
    NoCorrectExamples { side: &'static str },
    #[error("score lists cover different partitions")]
    PartitionMismatch,
    #[error("complement curve has zero area; sigma undefined")]
    DegenerateComplement,

    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
