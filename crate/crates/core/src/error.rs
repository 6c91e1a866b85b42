use std::path::PathBuf;

/// Errors surfaced by the simulator, training loop and experiment plumbing.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Invalid configuration, mismatched dimensions or bad input shapes.
    #[error("configuration error: {0}")]
    Config(String),
    /// Non-finite values reached the simulator or optimizer.
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn ensure_finite(values: &[f64], what: &str) -> Result<()> {
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::numerical(format!(
            "{what}: component {i} is {}",
            values[i]
        )));
    }
    Ok(())
}
