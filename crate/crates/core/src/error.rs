use thiserror::Error;

pub type Result<T, E = KaneError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum KaneError {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    Shape {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("domain error in {op}: {message}")]
    Domain { op: &'static str, message: String },

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("{source_name}:{line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("lookup error: {0}")]
    Lookup(String),

    #[error("sampling error: {0}")]
    Sampling(String),

    #[error("non-finite gradient for parameter `{parameter}` (epoch {epoch}, batch {batch})")]
    NonFiniteGradient {
        parameter: String,
        epoch: usize,
        batch: usize,
    },

    #[error("non-finite loss {loss} (epoch {epoch}, batch {batch})")]
    NonFiniteLoss { loss: f64, epoch: usize, batch: usize },

    #[error("format error: {0}")]
    Format(String),

    #[error("checksum mismatch: checkpoint was trained on bundle {expected}, got bundle {found}")]
    ChecksumMismatch { expected: String, found: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl KaneError {
    pub(crate) fn shape(op: &'static str, left: &[usize], right: &[usize]) -> Self {
        KaneError::Shape {
            op,
            left: left.to_vec(),
            right: right.to_vec(),
        }
    }

    /// Attaches a file name to a parse error produced from in-memory text.
    pub fn with_source(self, name: &str) -> Self {
        match self {
            KaneError::Parse { line, message, .. } => KaneError::Parse {
                source_name: name.to_string(),
                line,
                message,
            },
            other => other,
        }
    }
}
