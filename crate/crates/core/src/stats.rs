//! First pass: four numbers per image, artifact-image filtering and the
//! measurement-wide cell threshold.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Config, PhaseImage};

/// Histograms wider than this are coarsened so pathological ranges stay bounded.
const MAX_BINS: usize = 1 << 22;

/// Scale from median absolute deviation to a normal-consistent σ.
const MAD_TO_SIGMA: f64 = 1.482_602_218_505_602;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageStats {
    pub image_id: String,
    pub phase_min: f64,
    pub phase_max: f64,
    pub phase_mean: f64,
    /// Modal phase value, taken as the background level.
    pub background: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementStats {
    /// Number of images contributing to the threshold.
    pub image_count: usize,
    pub mean_background: f64,
    /// Cell detection threshold, 2·|mean background| (rad).
    pub threshold: f64,
    /// Set when `threshold` came from the configured fallback.
    pub fallback_used: bool,
    pub per_image: Vec<ImageStats>,
    pub filtered_ids: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArtifactReason {
    PhaseWrap,
    BackgroundOutlier,
}

impl ArtifactReason {
    pub fn as_str(self) -> &'static str {
        match self {
            ArtifactReason::PhaseWrap => "phase_wrap",
            ArtifactReason::BackgroundOutlier => "background_outlier",
        }
    }
}

pub fn image_stats(img: &PhaseImage, bin_width: f64) -> ImageStats {
    phase_stats(img.id(), img.phase(), bin_width)
}

pub(crate) fn phase_stats(id: &str, phase: &[f64], bin_width: f64) -> ImageStats {
    let (mut lo, mut hi, mut sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
    for &v in phase {
        lo = lo.min(v);
        hi = hi.max(v);
        sum += v;
    }
    let mean = (sum / phase.len() as f64).clamp(lo, hi);
    ImageStats {
        image_id: id.to_owned(),
        phase_min: lo,
        phase_max: hi,
        phase_mean: mean,
        background: histogram_mode(phase, lo, hi, mean, bin_width),
    }
}

/// Centre of the most populated bin of width `bin_width` starting at `lo`;
/// ties go to the bin closest to `mean`.
fn histogram_mode(phase: &[f64], lo: f64, hi: f64, mean: f64, bin_width: f64) -> f64 {
    let range = hi - lo;
    if range <= 0.0 {
        return lo;
    }
    let mut width = bin_width;
    let mut bins = (range / width).floor() as usize + 1;
    if bins > MAX_BINS {
        width = range / (MAX_BINS - 1) as f64;
        bins = MAX_BINS;
    }
    let mut counts = vec![0u32; bins];
    for &v in phase {
        let i = (((v - lo) / width) as usize).min(bins - 1);
        counts[i] += 1;
    }
    let center = |i: usize| lo + (i as f64 + 0.5) * width;
    let best = counts
        .iter()
        .enumerate()
        .max_by(|(i, a), (j, b)| {
            a.cmp(b).then_with(|| {
                // reversed: nearer to the mean wins
                (center(*j) - mean).abs().total_cmp(&(center(*i) - mean).abs())
            })
        })
        .map(|(i, _)| i)
        .expect("at least one bin");
    center(best).clamp(lo, hi)
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Why an image should be discarded before thresholding, if at all.
///
/// `spread` is the robust background spread of the whole measurement, see
/// [`background_spread`].
pub fn artifact_reason(s: &ImageStats, median_bg: f64, spread: f64, cfg: &Config) -> Option<ArtifactReason> {
    if s.phase_min <= -PI {
        Some(ArtifactReason::PhaseWrap)
    } else if (s.background - median_bg).abs() > cfg.background_sigma_factor * spread {
        Some(ArtifactReason::BackgroundOutlier)
    } else {
        None
    }
}

/// Median background and its MAD-based σ, floored at one histogram bin
/// (backgrounds are only resolved to a bin width).
pub fn background_spread(all: &[ImageStats], cfg: &Config) -> (f64, f64) {
    let mut bg: Vec<f64> = all.iter().map(|s| s.background).collect();
    bg.sort_by(f64::total_cmp);
    let med = median(&bg);
    let mut dev: Vec<f64> = bg.iter().map(|b| (b - med).abs()).collect();
    dev.sort_by(f64::total_cmp);
    let sigma = MAD_TO_SIGMA * median(&dev);
    (med, sigma.max(cfg.histogram_bin_width))
}

/// An artifact image and why it was discarded.
pub type Filtered = (ImageStats, ArtifactReason);

/// Splits images into kept and artifact images, preserving order.
pub fn filter_artifact_images(
    all: &[ImageStats],
    cfg: &Config,
) -> Result<(Vec<ImageStats>, Vec<Filtered>)> {
    if all.is_empty() {
        return Err(Error::EmptyMeasurement);
    }
    let (med, spread) = background_spread(all, cfg);
    let mut kept = Vec::new();
    let mut filtered = Vec::new();
    for s in all {
        match artifact_reason(s, med, spread, cfg) {
            Some(reason) => filtered.push((s.clone(), reason)),
            None => kept.push(s.clone()),
        }
    }
    Ok((kept, filtered))
}

/// Threshold t = 2·|c̄_b| with c̄_b the arithmetic mean background.
///
/// Summation runs in list order so the result does not depend on how the
/// per-image statistics were computed.
pub fn measurement_threshold(kept: &[ImageStats]) -> Result<MeasurementStats> {
    if kept.is_empty() {
        return Err(Error::EmptyMeasurement);
    }
    let n = kept.len();
    let mean_background = kept.iter().map(|s| s.background).sum::<f64>() / n as f64;
    let threshold = 2.0 * mean_background.abs();
    if threshold == 0.0 {
        return Err(Error::DegenerateThreshold { mean_background });
    }
    Ok(MeasurementStats {
        image_count: n,
        mean_background,
        threshold,
        fallback_used: false,
        per_image: kept.to_vec(),
        filtered_ids: Vec::new(),
    })
}
