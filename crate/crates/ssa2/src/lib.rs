//! IO, file formats and workflow plumbing around `ssa2-core`.

pub mod archive;
pub mod dataset;
pub mod pfm;
pub mod ppm;
pub mod report;
pub mod weights;

pub use archive::TensorArchive;

/// Errors for file formats and workflows.
#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("core error: {0}")]
    Core(#[from] ssa2_core::CoreError),
    #[error("i/o failure at {path}: {source}")]
    File {
        path: String,
        source: std::io::Error,
    },
    #[error("format error: {0}")]
    Format(String),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl IoError {
    pub fn file(path: impl Into<String>, source: std::io::Error) -> Self {
        IoError::File {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, IoError>;
