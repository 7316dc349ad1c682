use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("region is not 8-connected: {components} components in {pixels} pixels")]
    Disconnected { components: usize, pixels: usize },

    #[error("region has no pixels")]
    EmptyRegion,

    #[error("measurement contains no images")]
    EmptyMeasurement,

    #[error("degenerate threshold: mean background is {mean_background}, threshold would be 0")]
    DegenerateThreshold { mean_background: f64 },

    #[error("region has zero perimeter; shape scores undefined")]
    DegenerateShape,

    #[error("no loadable images in {0}")]
    NoImages(PathBuf),

    #[error("unsupported image format: {0}")]
    UnsupportedFormat(PathBuf),

    #[error("{path}: {msg}")]
    Load { path: PathBuf, msg: String },

    #[error("cannot place {requested} objects without overlap after {attempts} attempts")]
    Overcrowded { requested: usize, attempts: usize },

    #[error("scene mismatch: ground truth '{truth}' vs prediction '{prediction}'")]
    SceneMismatch { truth: String, prediction: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("tiff: {0}")]
    Tiff(#[from] tiff::TiffError),

    #[error("png: {0}")]
    Png(#[from] image::ImageError),
}
