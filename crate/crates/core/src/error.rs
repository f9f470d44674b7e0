use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("step size {gamma} outside the admissible range (0, {upper})")]
    StepSizeOutOfRange { gamma: f64, upper: f64 },

    #[error("unsupported model kind for {0}")]
    UnsupportedModel(&'static str),

    /// A level draw whose start times would not fit in 62 bits.
    #[error("level {level} with k = {k} exceeds the representable start-time range")]
    LevelOverflow { level: u32, k: u64 },

    #[error("config parse error at line {line}: {reason}")]
    Config { line: usize, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}
