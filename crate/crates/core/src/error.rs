use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite angle: {0}")]
    NonFiniteAngle(f64),

    #[error("bin index {index} out of range for {bins} bins")]
    BinOutOfRange { index: usize, bins: usize },

    #[error("invalid histogram: {0}")]
    InvalidHistogram(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("degenerate trip: origin equals destination")]
    DegenerateTrip,

    #[error("zero-length segment")]
    ZeroLengthSegment,

    #[error("invalid value: {0}")]
    InvalidValue(String),

    #[error("filter removed all samples")]
    FilterRemovedAll,

    #[error("underdetermined system: {rows} rows for {params} parameters")]
    Underdetermined { rows: usize, params: usize },

    #[error("rank-deficient design; dependent columns: {}", .columns.join(", "))]
    RankDeficient { columns: Vec<String> },

    #[error("network histogram is not point-symmetric: bins {bin} and {opposite} differ by {difference:e}")]
    NotPointSymmetric {
        bin: usize,
        opposite: usize,
        difference: f64,
    },

    #[error("spec mismatch: {0}")]
    SpecMismatch(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    /// Process exit code for this error: 2 input, 3 insufficient data, 4 numerical or spec.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::FilterRemovedAll | Error::Underdetermined { .. } => 3,
            Error::RankDeficient { .. }
            | Error::NotPointSymmetric { .. }
            | Error::SpecMismatch(_)
            | Error::InvalidHistogram(_) => 4,
            _ => 2,
        }
    }
}
