//! Microstructure files and generators, run configuration, and result
//! output (CSV histories and VTK snapshots).

pub mod config;
pub mod generate;
pub mod microstructure;
pub mod output;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("malformed microstructure: {0}")]
    Format(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error("sphere packing failed: placed {placed} of {requested} spheres (fraction {achieved:.4})")]
    Packing { placed: usize, requested: usize, achieved: f64 },
}

pub(crate) fn file_err(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::File { path: path.display().to_string(), source }
}
