use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("value out of domain: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error(
        "client {client} needs {required} rows of class {class} but only {available} remain \
         (highest achievable p is {achievable_p:.4})"
    )]
    QuotaShortfall {
        client: usize,
        class: usize,
        required: usize,
        available: usize,
        achievable_p: f64,
    },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("non-finite activation in layer {layer}")]
    NumericOverflow { layer: usize },

    #[error("training diverged at epoch {epoch}: non-finite loss")]
    TrainingDiverged { epoch: usize },

    #[error("empty selection: {0}")]
    EmptySelection(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }
}
