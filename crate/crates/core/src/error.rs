use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} out of range: {value} (expected {expected})")]
    OutOfRange {
        what: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("bs map line {line}: {msg}")]
    BsMap { line: usize, msg: String },

    #[error("no sites")]
    NoSites,

    #[error("loss table line {line}: {msg}")]
    LossTable { line: usize, msg: String },

    #[error("dimension mismatch for {what}: expected {expected}, got {actual}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("episode already finished; call reset")]
    EpisodeDone,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(
        "training diverged at update {update}: running reward {running:.4} stayed below \
         {floor:.4} for {patience} updates"
    )]
    Diverged {
        update: usize,
        running: f64,
        floor: f64,
        patience: usize,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn range(what: &'static str, value: f64, expected: &'static str) -> Self {
        Error::OutOfRange {
            what,
            value,
            expected,
        }
    }
}
