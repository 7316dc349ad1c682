//! Unsupervised segmentation of cells, nuclei and internal structures in
//! quantitative phase images, with morphology and optical-density features.
//!
//! Processing runs in three passes over a measurement (a set of images taken
//! with one set-up):
//!
//! 1. [`stats`]: four numbers per image, artifact-image filtering and the
//!    global threshold `t = 2·|mean background|`.
//! 2. [`segment`] + [`plausibility`]: threshold, label, and discard
//!    candidates that are too small, nested, or have no gradient edge.
//! 3. [`internal`] + [`features`]: internal structures at `4t`, `6t` and
//!    `0.8 × mean cell maximum`, nucleus choice and the feature record.
//!
//! [`pipeline`] wires the passes together; [`phantom`] and [`eval`] provide
//! synthetic ground truth and error classification.

pub mod bench;
pub mod error;
pub mod eval;
pub mod export;
pub mod features;
pub mod geometry;
pub mod internal;
pub mod io;
pub mod model;
pub mod overlay;
pub mod phantom;
pub mod pipeline;
pub mod plausibility;
pub mod segment;
pub mod stats;

pub use error::{Error, Result};
pub use model::{phase_to_density, BBox, Config, PhaseImage, Pixel, Region};
