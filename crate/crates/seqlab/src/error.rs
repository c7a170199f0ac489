use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Operand shapes are incompatible for the requested operation.
    #[error("dimension error in {op}: {detail}")]
    Dim { op: &'static str, detail: String },

    /// A softmax slice (attention row) contained only negative infinity.
    #[error("degenerate slice in {op}: slice {index} is entirely -inf")]
    DegenerateSlice { op: &'static str, index: usize },

    /// A caller broke an API contract (wrong argument, wrong mode, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// An operation was issued in the wrong state (double backward,
    /// missing gradients, ...).
    #[error("state error: {0}")]
    State(String),

    /// A dependency tree failed validation.
    #[error("malformed dependency tree: {0}")]
    Tree(String),

    /// A text input file is malformed.
    #[error("format error at line {line}: {detail}")]
    Format { line: usize, detail: String },

    /// Tokens missing from an embedding store.
    #[error("out-of-vocabulary tokens: {}", .0.join(", "))]
    Oov(Vec<String>),

    /// A label outside the declared label set.
    #[error("unknown label: {0}")]
    UnknownLabel(String),

    /// Training diverged.
    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn dim(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Dim { op, detail: detail.into() }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
