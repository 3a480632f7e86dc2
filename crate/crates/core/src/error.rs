use std::path::PathBuf;

use thiserror::Error;

use crate::integrator::Abort;
use crate::io::ConfigError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("size mismatch: expected {expected} values, got {actual}")]
    SizeMismatch { expected: usize, actual: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The cut-off radius `2/h` is not resolved by the grid.
    #[error(
        "resolution guard: cut-off radius 2/h = {radius} exceeds (2/3) of the Nyquist \
         frequency {nyquist}; need n >= {required_n} points per axis"
    )]
    Resolution {
        radius: f64,
        nyquist: f64,
        required_n: usize,
    },

    #[error("boundary leak {leak:e} exceeds {limit:e} at t = {time}")]
    BoundaryLeak { leak: f64, limit: f64, time: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("run aborted: {0}")]
    Aborted(Box<Abort>),

    #[error("{}", format_config_errors(.0))]
    Config(Vec<ConfigError>),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

fn format_config_errors(errors: &[ConfigError]) -> String {
    let lines: Vec<String> = errors.iter().map(ToString::to_string).collect();
    format!("invalid config:\n  {}", lines.join("\n  "))
}
