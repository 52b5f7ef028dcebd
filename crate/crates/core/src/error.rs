use std::path::PathBuf;

/// Errors shared by all modules of the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A numeric precondition was violated (domain of a math function).
    #[error("domain error: {0}")]
    Domain(String),

    /// Input data failed a structural validation.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A required collection was empty.
    #[error("empty input: {0}")]
    Empty(String),

    /// Line-addressed parse failure in a data file.
    #[error("{path}: line {line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("i/o error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Noise calibration could not bracket the target epsilon.
    #[error("calibration bracket [{lo}, {hi}] cannot reach epsilon {target}: {msg}")]
    Bracket {
        lo: f64,
        hi: f64,
        target: f64,
        msg: String,
    },

    #[error("token id {id} out of vocabulary (size {vocab_size})")]
    OutOfVocab { id: u32, vocab_size: usize },

    #[error("parameter vector length {got}, expected {expected}")]
    DimensionMismatch { got: usize, expected: usize },

    #[error("unknown placeholder #{0}#")]
    UnknownPlaceholder(String),

    #[error("checkpoint mismatch: {0}")]
    CheckpointMismatch(String),

    /// Member and non-member sets must have equal size.
    #[error("imbalanced attack sets: {members} members vs {nonmembers} non-members")]
    Imbalance { members: usize, nonmembers: usize },

    /// Leakage fraction is undefined when the sampled set holds no PII.
    #[error("undefined leakage: sampled member set contains no PII")]
    UndefinedLeakage,
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
