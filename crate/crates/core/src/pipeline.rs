//! Three-pass batch run over a measurement.
//!
//! The passes cannot be fused: the cell threshold needs every image's
//! background, and the third internal threshold needs every cell's maximum.
//! Images are reloaded for each pass instead of being held in memory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{assemble_record, FeatureRecord, InternalOutcome};
use crate::internal::{
    compute_internal_thresholds, detect_internal, eligible_for_internal, select_nucleus, InternalStructure,
    InternalThresholds, NucleusResult,
};
use crate::io::{self, Calibration};
use crate::model::{BBox, Config, PhaseImage, Pixel, Region};
use crate::plausibility::{run_checks, RejectReason};
use crate::segment::detect_candidates;
use crate::stats::{filter_artifact_images, image_stats, measurement_threshold, ArtifactReason, ImageStats, MeasurementStats};

/// Indexed images that can be loaded any number of times.
pub trait ImageSource: Sync {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Human-readable name of an input, used in diagnostics.
    fn describe(&self, index: usize) -> String;

    fn load(&self, index: usize) -> Result<PhaseImage>;
}

impl ImageSource for [PhaseImage] {
    fn len(&self) -> usize {
        <[PhaseImage]>::len(self)
    }

    fn describe(&self, index: usize) -> String {
        self[index].id().to_owned()
    }

    fn load(&self, index: usize) -> Result<PhaseImage> {
        Ok(self[index].clone())
    }
}

/// Image files of one directory.
#[derive(Debug, Clone)]
pub struct DirSource {
    paths: Vec<PathBuf>,
    calibration: Calibration,
}

impl DirSource {
    pub fn open(dir: &Path, calibration: Calibration) -> Result<Self> {
        let paths = io::list_images(dir)?;
        if paths.is_empty() {
            return Err(Error::NoImages(dir.to_owned()));
        }
        Ok(Self { paths, calibration })
    }

    pub fn paths(&self) -> &[PathBuf] {
        &self.paths
    }
}

impl ImageSource for DirSource {
    fn len(&self) -> usize {
        self.paths.len()
    }

    fn describe(&self, index: usize) -> String {
        self.paths[index].display().to_string()
    }

    fn load(&self, index: usize) -> Result<PhaseImage> {
        io::load_image(&self.paths[index], self.calibration)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadFailure {
    pub input: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilteredImage {
    pub stats: ImageStats,
    pub reason: ArtifactReason,
}

/// A candidate removed by the plausibility checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectEntry {
    pub top_left: Pixel,
    pub bbox: BBox,
    pub area_px: usize,
    pub reason: RejectReason,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub region: Region,
    pub border: bool,
    /// Structures and nucleus choice; `None` when internal detection did not run.
    pub internal: Option<(Vec<InternalStructure>, NucleusResult)>,
    pub record: FeatureRecord,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageResult {
    pub image_id: String,
    pub cells: Vec<CellResult>,
    pub rejects: Vec<RejectEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counts {
    pub images: usize,
    pub loaded_images: usize,
    pub load_failures: usize,
    pub filtered_images: usize,
    pub candidates: usize,
    pub cells: usize,
    pub border_cells: usize,
    pub rejects_by_reason: BTreeMap<RejectReason, usize>,
    pub internal_evaluated: usize,
    pub cells_with_nucleus: usize,
    /// Cells flagged abnormal or aggregate.
    pub flagged: usize,
}

impl Counts {
    pub fn rejects(&self) -> usize {
        self.rejects_by_reason.values().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub workers: usize,
    pub pass1_s: f64,
    pub pass2_s: f64,
    pub pass3_s: f64,
    pub total_s: f64,
    /// Total wall time over loaded images.
    pub per_image_s: Option<f64>,
    /// Total wall time over accepted cells; absent without cells.
    pub per_cell_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub inputs: Vec<String>,
    pub config: Config,
    pub measurement: MeasurementStats,
    pub filtered: Vec<FilteredImage>,
    pub load_failures: Vec<LoadFailure>,
    /// Absent when no non-border cell was found.
    pub internal_thresholds: Option<InternalThresholds>,
    pub counts: Counts,
    pub timings: Timings,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    /// Analysed images sorted by id; filtered images are absent.
    pub images: Vec<ImageResult>,
    pub manifest: RunManifest,
}

impl PipelineOutput {
    /// Feature records sorted by image id, then cell top-left pixel.
    pub fn records(&self) -> impl Iterator<Item = &FeatureRecord> {
        self.images.iter().flat_map(|i| i.cells.iter().map(|c| &c.record))
    }
}

struct Detected {
    index: usize,
    image_id: String,
    cells: Vec<(Region, bool, f64)>,
    rejects: Vec<RejectEntry>,
}

fn build_pool(workers: usize) -> Result<rayon::ThreadPool> {
    if workers == 0 {
        return Err(Error::InvalidConfig("workers must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("worker pool: {e}")))
}

pub fn run_pipeline<S: ImageSource + ?Sized>(source: &S, cfg: &Config, workers: usize) -> Result<PipelineOutput> {
    cfg.validate()?;
    let pool = build_pool(workers)?;
    pool.install(|| run(source, cfg, workers))
}

fn run<S: ImageSource + ?Sized>(source: &S, cfg: &Config, workers: usize) -> Result<PipelineOutput> {
    let start = Instant::now();

    // pass 1: per-image statistics, artifact filter, threshold
    let loaded: Vec<(usize, Result<ImageStats>)> = (0..source.len())
        .into_par_iter()
        .map(|i| (i, source.load(i).map(|img| image_stats(&img, cfg.histogram_bin_width))))
        .collect();
    let mut load_failures = Vec::new();
    let mut stats = Vec::new();
    let mut stat_index = Vec::new();
    for (i, r) in loaded {
        match r {
            Ok(s) => {
                stat_index.push(i);
                stats.push(s);
            }
            Err(e) => load_failures.push(LoadFailure { input: source.describe(i), error: e.to_string() }),
        }
    }
    if stats.is_empty() {
        return Err(Error::EmptyMeasurement);
    }
    let (kept, filtered) = filter_artifact_images(&stats, cfg)?;
    let mut measurement = match measurement_threshold(&kept) {
        Ok(m) => m,
        Err(Error::DegenerateThreshold { mean_background }) => match cfg.fallback_threshold {
            Some(threshold) => MeasurementStats {
                image_count: kept.len(),
                mean_background,
                threshold,
                fallback_used: true,
                per_image: kept.clone(),
                filtered_ids: Vec::new(),
            },
            None => return Err(Error::DegenerateThreshold { mean_background }),
        },
        Err(e) => return Err(e),
    };
    measurement.filtered_ids = filtered.iter().map(|(s, _)| s.image_id.clone()).collect();
    let t = measurement.threshold;
    let filtered: Vec<FilteredImage> =
        filtered.into_iter().map(|(stats, reason)| FilteredImage { stats, reason }).collect();
    // kept is an ordered subsequence of stats
    let mut kept_indices = Vec::with_capacity(kept.len());
    let mut next = kept.iter().peekable();
    for (s, &i) in stats.iter().zip(&stat_index) {
        if next.peek() == Some(&s) {
            next.next();
            kept_indices.push(i);
        }
    }
    let pass1_s = start.elapsed().as_secs_f64();

    // pass 2: candidates and plausibility checks
    let t2 = Instant::now();
    let mut detected: Vec<Detected> = kept_indices
        .par_iter()
        .map(|&index| -> Result<Detected> {
            let img = source.load(index)?;
            let outcome = run_checks(&img, detect_candidates(&img, t)?, cfg);
            let mut cells: Vec<(Region, bool, f64)> = outcome
                .cells
                .into_iter()
                .map(|c| {
                    let max = c.region.pixels().iter().map(|p| img.at_pixel(*p)).fold(f64::NEG_INFINITY, f64::max);
                    (c.region, c.border, max)
                })
                .collect();
            cells.sort_by_key(|c| c.0.top_left());
            let mut rejects: Vec<RejectEntry> = outcome
                .rejects
                .into_iter()
                .map(|(c, reason)| RejectEntry {
                    top_left: c.region.top_left(),
                    bbox: c.region.bbox(),
                    area_px: c.region.area_px(),
                    reason,
                })
                .collect();
            rejects.sort_by_key(|r| r.top_left);
            Ok(Detected { index, image_id: img.id().to_owned(), cells, rejects })
        })
        .collect::<Result<_>>()?;
    detected.sort_by(|a, b| a.image_id.cmp(&b.image_id).then(a.index.cmp(&b.index)));
    let pass2_s = t2.elapsed().as_secs_f64();

    // barrier: third internal threshold from all non-border cell maxima
    let t3 = Instant::now();
    let maxima: Vec<f64> =
        detected.iter().flat_map(|d| d.cells.iter().filter(|c| !c.1).map(|c| c.2)).collect();
    let internal_thresholds = match compute_internal_thresholds(t, &maxima) {
        Ok(th) => Some(th),
        Err(Error::EmptyMeasurement) => None,
        Err(e) => return Err(e),
    };

    // pass 3: internal structures and features
    let images: Vec<ImageResult> = detected
        .into_par_iter()
        .map(|d| -> Result<ImageResult> {
            let img = source.load(d.index)?;
            let cells = d
                .cells
                .into_par_iter()
                .enumerate()
                .map(|(k, (region, border, _))| {
                    let internal = internal_thresholds
                        .as_ref()
                        .filter(|_| eligible_for_internal(&region, cfg))
                        .map(|th| {
                            let structures = detect_internal(&region, &img, th, cfg);
                            let nucleus = select_nucleus(&structures);
                            (structures, nucleus)
                        });
                    let outcome =
                        internal.as_ref().map(|(s, n)| InternalOutcome { structures: s, nucleus: n });
                    let record = assemble_record(&d.image_id, k, t, &region, border, outcome, &img);
                    CellResult { region, border, internal, record }
                })
                .collect();
            Ok(ImageResult { image_id: d.image_id, cells, rejects: d.rejects })
        })
        .collect::<Result<_>>()?;
    let pass3_s = t3.elapsed().as_secs_f64();
    let total_s = start.elapsed().as_secs_f64();

    let mut rejects_by_reason: BTreeMap<RejectReason, usize> =
        [RejectReason::TooSmall, RejectReason::Nested, RejectReason::NoGradientEdge].into_iter().map(|r| (r, 0)).collect();
    for r in images.iter().flat_map(|i| &i.rejects) {
        *rejects_by_reason.entry(r.reason).or_default() += 1;
    }
    let all_cells = || images.iter().flat_map(|i| &i.cells);
    let cells = all_cells().count();
    let counts = Counts {
        images: source.len(),
        loaded_images: stats.len(),
        load_failures: load_failures.len(),
        filtered_images: filtered.len(),
        candidates: cells + rejects_by_reason.values().sum::<usize>(),
        cells,
        border_cells: all_cells().filter(|c| c.border).count(),
        rejects_by_reason,
        internal_evaluated: all_cells().filter(|c| c.internal.is_some()).count(),
        cells_with_nucleus: all_cells().filter(|c| c.record.nucleus.is_some()).count(),
        flagged: all_cells().filter(|c| c.record.flags.abnormal_or_aggregate).count(),
    };
    let timings = Timings {
        workers,
        pass1_s,
        pass2_s,
        pass3_s,
        total_s,
        per_image_s: Some(total_s / stats.len() as f64),
        per_cell_s: (cells > 0).then(|| total_s / cells as f64),
    };
    let manifest = RunManifest {
        inputs: (0..source.len()).map(|i| source.describe(i)).collect(),
        config: cfg.clone(),
        measurement,
        filtered,
        load_failures,
        internal_thresholds,
        counts,
        timings,
    };
    Ok(PipelineOutput { images, manifest })
}
