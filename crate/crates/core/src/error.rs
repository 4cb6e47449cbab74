use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("non-physical parameter: {0}")]
    NonPhysical(String),

    #[error("grid error: {0}")]
    Grid(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("step size {dt:e} fell below the minimum {min:e} at t = {t}")]
    Stiffness { t: f64, dt: f64, min: f64 },

    #[error("fit error: {0}")]
    Fit(String),

    #[error("insufficient statistics: {0}")]
    Statistics(String),

    #[error("undefined: {0}")]
    Undefined(String),

    #[error("malformed input at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}
