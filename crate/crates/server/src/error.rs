use thiserror::Error;

#[derive(Debug, Error)]
pub enum ServerError {
    #[error(transparent)]
    Core(#[from] janus_core::Error),
    #[error("{0}")]
    Config(String),
    #[error("transcript line {line}: {message}")]
    Transcript { line: usize, message: String },
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ServerError>;
