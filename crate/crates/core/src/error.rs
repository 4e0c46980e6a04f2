use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An input falls outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// Field evaluation requested on (or numerically on) a wire.
    #[error("Biot-Savart singularity: point lies on a wire segment (distance {distance:e} m)")]
    Singularity { distance: f64 },

    #[error("coil geometry error: {0}")]
    Geometry(String),

    #[error("schedule error: {0}")]
    Schedule(String),

    #[error("stiff solver failed at t = {time:e} s: {reason}")]
    Stiffness { time: f64, reason: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// A fit window crosses a change of the control input.
    #[error("segmentation error: {0}")]
    Segmentation(String),

    #[error("degenerate direction: {0}")]
    DegenerateDirection(String),

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(format!("line {} column {}: {}", e.line(), e.column(), e))
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        match e.position() {
            Some(pos) => Error::Parse(format!("csv line {}: {}", pos.line(), e)),
            None => Error::Parse(format!("csv: {e}")),
        }
    }
}
