use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    /// The forward diagonal has no finite representation: `y == 0` while `f(y) != 0`.
    #[error("forward diagonal breakdown at block {block}, entry {entry}: y = {y:e}, f(y) = {f:e}")]
    Breakdown {
        block: usize,
        entry: usize,
        y: f64,
        f: f64,
    },

    #[error("sample {index}: {source}")]
    Sample {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("dense materialization of dimension {dim} exceeds the cap of {cap}")]
    DenseCap { dim: usize, cap: usize },

    #[error("diagonal entry at block {block}, entry {entry} is not invertible")]
    Singular { block: usize, entry: usize },

    #[error("system too small for this operation: {blocks} blocks, need at least {required}")]
    TooFewBlocks { blocks: usize, required: usize },

    #[error("invalid configuration: {0}")]
    Invalid(String),

    #[error("malformed network file: {0}")]
    Format(String),
}

impl Error {
    pub(crate) fn dim(context: &'static str, expected: usize, actual: usize) -> Self {
        Error::Dimension {
            context,
            expected,
            actual,
        }
    }

    pub(crate) fn in_sample(self, index: usize) -> Self {
        Error::Sample {
            index,
            source: Box::new(self),
        }
    }
}

pub(crate) fn check_len(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::dim(context, expected, actual))
    }
}
