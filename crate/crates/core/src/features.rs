//! Per-cell morphology and optical-density features.
//!
//! Shape scores compare the cell area `A_c` with the area `A_S` of a reference
//! shape, `min(A_c, A_S) / max(A_c, A_S)`:
//!
//! | score        | reference shape                                      |
//! |--------------|------------------------------------------------------|
//! | circularity  | circle of equal perimeter, `P² / 4π`                 |
//! | roundness    | minimal enclosing circle of the pixel centres        |
//! | polygonality | convex hull of the pixel squares                     |
//! | ellipticity  | ellipse with the bounding-box width and height as axes |

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry;
use crate::internal::{InternalStructure, NucleusResult};
use crate::model::{PhaseImage, Region};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeScores {
    pub circularity: f64,
    pub roundness: f64,
    pub polygonality: f64,
    pub ellipticity: f64,
}

fn score(a: f64, b: f64) -> f64 {
    let hi = a.max(b);
    if hi <= 0.0 {
        0.0
    } else {
        a.min(b) / hi
    }
}

/// Convex-hull area of the union of the region's pixel squares, µm².
pub fn convex_hull_area_um2(r: &Region) -> f64 {
    let corners: Vec<(i64, i64)> = r
        .boundary()
        .iter()
        .flat_map(|p| {
            let (x, y) = (p.x as i64, p.y as i64);
            [(x, y), (x + 1, y), (x, y + 1), (x + 1, y + 1)]
        })
        .collect();
    let s = r.pixel_size_um();
    geometry::polygon_area(&geometry::convex_hull(&corners)) * s * s
}

pub fn shape_scores(r: &Region) -> Result<ShapeScores> {
    let p = r.perimeter_um();
    if p <= 0.0 {
        return Err(Error::DegenerateShape);
    }
    let area = r.area_um2();
    let s = r.pixel_size_um();
    let radius = r.enclosing_circle().radius;
    let (w, h) = (r.bbox().width() as f64 * s, r.bbox().height() as f64 * s);
    Ok(ShapeScores {
        circularity: score(area, p * p / (4.0 * PI)),
        roundness: score(area, PI * radius * radius),
        polygonality: score(area, convex_hull_area_um2(r)),
        ellipticity: score(area, PI * (w / 2.0) * (h / 2.0)),
    })
}

/// Σ ρ_o · s_px² over the region, µm³. Negative phase counts negatively.
pub fn cell_volume(r: &Region, img: &PhaseImage) -> f64 {
    volume_parts(r, img).0
}

/// Volume and the share of absolute volume carried by negative-phase pixels.
fn volume_parts(r: &Region, img: &PhaseImage) -> (f64, f64) {
    let s2 = img.pixel_size_um() * img.pixel_size_um();
    let (mut total, mut negative, mut absolute) = (0.0, 0.0, 0.0);
    for p in r.pixels() {
        let v = img.density_at(*p) * s2;
        total += v;
        absolute += v.abs();
        if v < 0.0 {
            negative -= v;
        }
    }
    let frac = if absolute > 0.0 { negative / absolute } else { 0.0 };
    (total, frac)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NucleusFeatures {
    pub diameter_um: f64,
    pub area_um2: f64,
    pub circularity: Option<f64>,
    pub roundness: Option<f64>,
    /// Distance between nucleus and cell centroids.
    pub offset_um: f64,
    /// Nucleus area over cell area.
    pub area_ratio: f64,
    /// Nucleus volume over cell volume; absent when the cell volume is zero.
    pub volume_ratio: Option<f64>,
    pub volume_um3: f64,
    /// Other detected structures lying entirely inside the nucleus.
    pub internal_count: usize,
    pub max_density_um: f64,
    pub mean_density_um: f64,
    /// Possible nuclei of the cell.
    pub candidate_count: usize,
}

/// Nuclear block for a cell; `None` when no nucleus was chosen.
pub fn nuclear_features(
    cell: &Region,
    structures: &[InternalStructure],
    nucleus: &NucleusResult,
    img: &PhaseImage,
) -> Option<NucleusFeatures> {
    let n = nucleus.nucleus.as_ref()?;
    let region = &n.region;
    let scores = shape_scores(region).ok();
    let cell_volume = cell_volume(cell, img);
    let volume_um3 = self::cell_volume(region, img);
    let internal_count = structures
        .iter()
        .filter(|s| s.region != *region && s.region.is_subset_of(region))
        .count();
    Some(NucleusFeatures {
        diameter_um: region.diameter_um(),
        area_um2: region.area_um2(),
        circularity: scores.map(|s| s.circularity),
        roundness: scores.map(|s| s.roundness),
        offset_um: region.centroid().dist(cell.centroid()),
        area_ratio: region.area_um2() / cell.area_um2(),
        volume_ratio: (cell_volume != 0.0).then(|| volume_um3 / cell_volume),
        volume_um3,
        internal_count,
        max_density_um: n.max_density_um,
        mean_density_um: n.mean_density_um,
        candidate_count: nucleus.candidate_count(),
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellFlags {
    pub border: bool,
    pub abnormal_or_aggregate: bool,
    pub internal_skipped: bool,
}

/// Everything exported for one accepted cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRecord {
    pub image_id: String,
    pub cell_id: String,
    pub threshold_rad: f64,
    pub centroid_x_um: f64,
    pub centroid_y_um: f64,
    pub bbox_x_min_px: u32,
    pub bbox_y_min_px: u32,
    pub bbox_x_max_px: u32,
    pub bbox_y_max_px: u32,
    pub diameter_um: f64,
    pub area_um2: f64,
    pub perimeter_um: f64,
    pub circularity: Option<f64>,
    pub roundness: Option<f64>,
    pub polygonality: Option<f64>,
    pub ellipticity: Option<f64>,
    pub volume_um3: f64,
    pub negative_volume_fraction: f64,
    pub nucleus: Option<NucleusFeatures>,
    pub flags: CellFlags,
}

/// Internal-detection outcome for a cell, `None` if the stage did not run.
pub struct InternalOutcome<'a> {
    pub structures: &'a [InternalStructure],
    pub nucleus: &'a NucleusResult,
}

pub fn assemble_record(
    image_id: &str,
    cell_index: usize,
    threshold: f64,
    cell: &Region,
    border: bool,
    internal: Option<InternalOutcome<'_>>,
    img: &PhaseImage,
) -> FeatureRecord {
    let scores = shape_scores(cell).ok();
    let (volume_um3, negative_volume_fraction) = volume_parts(cell, img);
    let b = cell.bbox();
    let c = cell.centroid();
    let (nucleus, flags) = match &internal {
        Some(o) => (
            nuclear_features(cell, o.structures, o.nucleus, img),
            CellFlags { border, abnormal_or_aggregate: o.nucleus.abnormal_or_aggregate, internal_skipped: false },
        ),
        None => (None, CellFlags { border, abnormal_or_aggregate: false, internal_skipped: true }),
    };
    FeatureRecord {
        image_id: image_id.to_owned(),
        cell_id: format!("{image_id}#{cell_index}"),
        threshold_rad: threshold,
        centroid_x_um: c.x,
        centroid_y_um: c.y,
        bbox_x_min_px: b.x_min,
        bbox_y_min_px: b.y_min,
        bbox_x_max_px: b.x_max,
        bbox_y_max_px: b.y_max,
        diameter_um: cell.diameter_um(),
        area_um2: cell.area_um2(),
        perimeter_um: cell.perimeter_um(),
        circularity: scores.map(|s| s.circularity),
        roundness: scores.map(|s| s.roundness),
        polygonality: scores.map(|s| s.polygonality),
        ellipticity: scores.map(|s| s.ellipticity),
        volume_um3,
        negative_volume_fraction,
        nucleus,
        flags,
    }
}
