use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    ParamDomain(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("linear solve failed at coding iteration {iteration}: {message}")]
    Solver { iteration: usize, message: String },

    #[error("observation set is empty")]
    EmptyObservations,

    #[error("training stream produced no usable samples")]
    EmptyStream,

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("{path}:{line}: {message}")]
    DataFormat {
        path: String,
        line: usize,
        message: String,
    },

    #[error("invalid dictionary file: {0}")]
    DictionaryFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn param(msg: impl Into<String>) -> Self {
        Error::ParamDomain(msg.into())
    }

    pub fn shape(msg: impl Into<String>) -> Self {
        Error::ShapeMismatch(msg.into())
    }
}
