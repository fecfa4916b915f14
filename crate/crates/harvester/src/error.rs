use std::path::PathBuf;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {param}: {msg}")]
    Domain { param: &'static str, msg: String },

    #[error("point outside grid bounds (fractional row {row:.3}, col {col:.3})")]
    OutOfBounds { row: f64, col: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("tile ({i}, {j}): {msg}")]
    Tile { i: u32, j: u32, msg: String },

    #[error("archive error at {path}: {msg}")]
    Archive { path: PathBuf, msg: String },

    #[error("no tiles found for timestamp {0}")]
    NoTiles(String),

    #[error("ROI {site_id}/{segment_id}: {msg}")]
    Roi {
        site_id: String,
        segment_id: String,
        msg: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("image error: {0}")]
    Image(#[from] image::ImageError),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn domain(param: &'static str, msg: impl Into<String>) -> Self {
        Error::Domain {
            param,
            msg: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
