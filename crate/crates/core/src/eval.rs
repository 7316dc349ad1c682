//! Error classification against phantom ground truth.
//!
//! Predictions are matched one-to-one to ground-truth cells, greedily by
//! descending IoU, keeping pairs with IoU at least `match_iou`. Then:
//!
//! 1. missed cell: ground-truth cell without a match;
//! 2. not-a-cell: prediction without a match;
//! 3. poor cell boundary: match with IoU below `boundary_iou`.
//!
//! Matched cells whose prediction went through internal detection are
//! evaluated further:
//!
//! 4. missed internal structure: ground-truth nucleus or blob that no
//!    predicted structure overlaps;
//! 5. not-a-nucleus: the chosen nucleus overlaps some other structure most,
//!    or nothing;
//! 6. poor nucleus boundary: correct nucleus with IoU below `boundary_iou`.
//!
//! Rates of classes 1 to 3 are over ground-truth cells, rates of classes 4
//! to 6 over evaluated cells.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::export::CellRegions;
use crate::model::{expand_runs, BBox, Pixel};
use crate::phantom::{GroundTruth, GtCell};
use crate::pipeline::{ImageResult, PipelineOutput};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub match_iou: f64,
    pub boundary_iou: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { match_iou: 0.5, boundary_iou: 0.8 }
    }
}

/// A pixel set sorted row-major, with its bounding box.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    pixels: Vec<Pixel>,
    bbox: BBox,
}

impl Mask {
    pub fn new(mut pixels: Vec<Pixel>) -> Self {
        pixels.sort_unstable();
        pixels.dedup();
        let bbox = pixels.iter().fold(
            BBox { x_min: u32::MAX, y_min: u32::MAX, x_max: 0, y_max: 0 },
            |b, p| BBox { x_min: b.x_min.min(p.x), y_min: b.y_min.min(p.y), x_max: b.x_max.max(p.x), y_max: b.y_max.max(p.y) },
        );
        Self { pixels, bbox }
    }

    pub fn from_runs(runs: &[[u32; 3]]) -> Self {
        Self::new(expand_runs(runs))
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    fn boxes_overlap(&self, o: &Mask) -> bool {
        !self.is_empty()
            && !o.is_empty()
            && self.bbox.x_min <= o.bbox.x_max
            && o.bbox.x_min <= self.bbox.x_max
            && self.bbox.y_min <= o.bbox.y_max
            && o.bbox.y_min <= self.bbox.y_max
    }

    pub fn intersection(&self, o: &Mask) -> usize {
        if !self.boxes_overlap(o) {
            return 0;
        }
        let (mut i, mut j, mut n) = (0, 0, 0);
        while i < self.pixels.len() && j < o.pixels.len() {
            match self.pixels[i].cmp(&o.pixels[j]) {
                Ordering::Less => i += 1,
                Ordering::Greater => j += 1,
                Ordering::Equal => {
                    n += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        n
    }

    pub fn iou(&self, o: &Mask) -> f64 {
        let inter = self.intersection(o);
        let union = self.len() + o.len() - inter;
        if union == 0 {
            0.0
        } else {
            inter as f64 / union as f64
        }
    }

    fn first(&self) -> Option<Pixel> {
        self.pixels.first().copied()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictedInternal {
    pub structures: Vec<Mask>,
    pub nucleus: Option<Mask>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictedCell {
    pub mask: Mask,
    /// `None` when internal detection did not run for the cell.
    pub internal: Option<PredictedInternal>,
}

pub fn predictions_from_image(image: &ImageResult) -> Vec<PredictedCell> {
    image
        .cells
        .iter()
        .map(|c| PredictedCell {
            mask: Mask::new(c.region.pixels().to_vec()),
            internal: c.internal.as_ref().map(|(s, n)| PredictedInternal {
                structures: s.iter().map(|s| Mask::new(s.region.pixels().to_vec())).collect(),
                nucleus: n.nucleus.as_ref().map(|s| Mask::new(s.region.pixels().to_vec())),
            }),
        })
        .collect()
}

pub fn predictions_from_regions(cells: &[CellRegions]) -> Vec<PredictedCell> {
    cells
        .iter()
        .map(|c| PredictedCell {
            mask: Mask::from_runs(&c.cell),
            internal: c.internal.as_ref().map(|i| PredictedInternal {
                structures: i.structures.iter().map(|s| Mask::from_runs(s)).collect(),
                nucleus: i.nucleus.as_ref().map(|s| Mask::from_runs(s)),
            }),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorClass {
    MissedCell,
    NotACell,
    PoorCellBoundary,
    MissedInternal,
    NotANucleus,
    PoorNucleusBoundary,
}

impl ErrorClass {
    pub const ALL: [ErrorClass; 6] = [
        ErrorClass::MissedCell,
        ErrorClass::NotACell,
        ErrorClass::PoorCellBoundary,
        ErrorClass::MissedInternal,
        ErrorClass::NotANucleus,
        ErrorClass::PoorNucleusBoundary,
    ];

    pub fn number(self) -> usize {
        self as usize + 1
    }

    pub fn label(self) -> &'static str {
        match self {
            ErrorClass::MissedCell => "missed cell",
            ErrorClass::NotACell => "not-a-cell",
            ErrorClass::PoorCellBoundary => "poor cell boundary",
            ErrorClass::MissedInternal => "missed internal structure",
            ErrorClass::NotANucleus => "not-a-nucleus",
            ErrorClass::PoorNucleusBoundary => "poor nucleus boundary",
        }
    }

    fn is_cell_level(self) -> bool {
        self.number() <= 3
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassResult {
    pub class: ErrorClass,
    pub count: usize,
    pub total: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub match_iou: f64,
    pub boundary_iou: f64,
    pub scenes: usize,
    pub gt_cells: usize,
    pub predicted_cells: usize,
    pub matched_cells: usize,
    /// Matched cells whose prediction went through internal detection.
    pub evaluated_cells: usize,
    pub classes: Vec<ClassResult>,
}

fn rate(count: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        count as f64 / total as f64
    }
}

impl ErrorReport {
    fn from_counts(cfg: &EvalConfig, scenes: usize, gt: usize, pred: usize, matched: usize, evaluated: usize, counts: [usize; 6]) -> Self {
        let classes = ErrorClass::ALL
            .iter()
            .zip(counts)
            .map(|(&class, count)| {
                let total = if class.is_cell_level() { gt } else { evaluated };
                ClassResult { class, count, total, rate: rate(count, total) }
            })
            .collect();
        Self {
            match_iou: cfg.match_iou,
            boundary_iou: cfg.boundary_iou,
            scenes,
            gt_cells: gt,
            predicted_cells: pred,
            matched_cells: matched,
            evaluated_cells: evaluated,
            classes,
        }
    }

    pub fn count(&self, class: ErrorClass) -> usize {
        self.classes[class as usize].count
    }

    pub fn rate(&self, class: ErrorClass) -> f64 {
        self.classes[class as usize].rate
    }

    fn counts(&self) -> [usize; 6] {
        let mut c = [0; 6];
        for (i, r) in self.classes.iter().enumerate() {
            c[i] = r.count;
        }
        c
    }

    /// Sum of two reports made with the same thresholds.
    pub fn merge(&self, other: &ErrorReport) -> ErrorReport {
        let mut counts = self.counts();
        for (c, o) in counts.iter_mut().zip(other.counts()) {
            *c += o;
        }
        Self::from_counts(
            &EvalConfig { match_iou: self.match_iou, boundary_iou: self.boundary_iou },
            self.scenes + other.scenes,
            self.gt_cells + other.gt_cells,
            self.predicted_cells + other.predicted_cells,
            self.matched_cells + other.matched_cells,
            self.evaluated_cells + other.evaluated_cells,
            counts,
        )
    }

    pub fn empty(cfg: &EvalConfig) -> Self {
        Self::from_counts(cfg, 0, 0, 0, 0, 0, [0; 6])
    }

    /// Counts row and percentage row under the six class headings.
    pub fn table(&self) -> String {
        let widths: Vec<usize> = ErrorClass::ALL.iter().map(|c| c.label().len().max(8) + 2).collect();
        let mut s = String::new();
        let left: usize = widths[..3].iter().sum::<usize>() + 2;
        let right: usize = widths[3..].iter().sum::<usize>() + 2;
        let _ = writeln!(
            s,
            "|{:^left$}||{:^right$}|",
            format!("cell detection for {} cells", self.gt_cells),
            format!("internal detection for {} cells", self.evaluated_cells),
            left = left - 2,
            right = right - 2
        );
        let row = |s: &mut String, cells: Vec<String>| {
            s.push('|');
            for (i, (c, w)) in cells.iter().zip(&widths).enumerate() {
                let _ = write!(s, "{c:^w$}|");
                if i == 2 {
                    s.push('|');
                }
            }
            s.push('\n');
        };
        row(&mut s, ErrorClass::ALL.iter().map(|c| format!("({}) {}", c.number(), c.label())).collect());
        row(&mut s, self.classes.iter().map(|c| c.count.to_string()).collect());
        row(&mut s, self.classes.iter().map(|c| format!("{:.2}%", 100.0 * c.rate)).collect());
        let _ = writeln!(s, "match IoU >= {}, poor boundary IoU < {}", self.match_iou, self.boundary_iou);
        s
    }
}

fn gt_structures(cell: &GtCell) -> Vec<(bool, Mask)> {
    cell.nucleus
        .iter()
        .map(|n| (true, Mask::from_runs(&n.mask)))
        .chain(cell.blobs.iter().map(|b| (false, Mask::from_runs(&b.mask))))
        .collect()
}

/// Greedy one-to-one matching; returns `(gt, prediction, iou)` triples.
pub fn match_cells(gt: &[Mask], pred: &[Mask], min_iou: f64) -> Vec<(usize, usize, f64)> {
    let mut pairs = Vec::new();
    for (i, g) in gt.iter().enumerate() {
        for (j, p) in pred.iter().enumerate() {
            let iou = g.iou(p);
            if iou >= min_iou && iou > 0.0 {
                pairs.push((i, j, iou));
            }
        }
    }
    // ties broken by content, not by prediction order
    pairs.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)).then(pred[a.1].first().cmp(&pred[b.1].first())));
    let mut gt_used = vec![false; gt.len()];
    let mut pred_used = vec![false; pred.len()];
    let mut out = Vec::new();
    for (i, j, iou) in pairs {
        if !gt_used[i] && !pred_used[j] {
            gt_used[i] = true;
            pred_used[j] = true;
            out.push((i, j, iou));
        }
    }
    out
}

/// Classifies the predictions of one scene.
pub fn evaluate(truth: &GroundTruth, image_id: &str, predicted: &[PredictedCell], cfg: &EvalConfig) -> Result<ErrorReport> {
    if truth.image_id != image_id {
        return Err(Error::SceneMismatch { truth: truth.image_id.clone(), prediction: image_id.to_owned() });
    }
    let gt: Vec<Mask> = truth.cells.iter().map(|c| Mask::from_runs(&c.body.mask)).collect();
    let pred: Vec<Mask> = predicted.iter().map(|p| p.mask.clone()).collect();
    let matches = match_cells(&gt, &pred, cfg.match_iou);

    let mut counts = [0usize; 6];
    counts[0] = gt.len() - matches.len();
    counts[1] = pred.len() - matches.len();
    let mut evaluated = 0;
    for &(gi, pi, iou) in &matches {
        if iou < cfg.boundary_iou {
            counts[2] += 1;
        }
        let Some(internal) = &predicted[pi].internal else { continue };
        evaluated += 1;
        let structures = gt_structures(&truth.cells[gi]);
        for (_, s) in &structures {
            if internal.structures.iter().all(|p| p.intersection(s) == 0) {
                counts[3] += 1;
            }
        }
        if let Some(n) = &internal.nucleus {
            let best = structures
                .iter()
                .map(|(is_nucleus, s)| (s.intersection(n), *is_nucleus, s))
                .filter(|(overlap, _, _)| *overlap > 0)
                .max_by_key(|(overlap, is_nucleus, _)| (*overlap, *is_nucleus));
            match best {
                Some((_, true, s)) => {
                    if s.iou(n) < cfg.boundary_iou {
                        counts[5] += 1;
                    }
                }
                _ => counts[4] += 1,
            }
        }
    }
    Ok(ErrorReport::from_counts(cfg, 1, gt.len(), pred.len(), matches.len(), evaluated, counts))
}

/// Evaluates a pipeline run over phantom scenes. Scenes without an analysed
/// image (filtered by the artifact check) count all their cells as missed.
pub fn evaluate_run(truths: &[GroundTruth], output: &PipelineOutput, cfg: &EvalConfig) -> Result<ErrorReport> {
    let by_id: HashMap<&str, &ImageResult> = output.images.iter().map(|i| (i.image_id.as_str(), i)).collect();
    let known: HashMap<&str, ()> = truths.iter().map(|t| (t.image_id.as_str(), ())).collect();
    if let Some(extra) = output.images.iter().find(|i| !known.contains_key(i.image_id.as_str())) {
        return Err(Error::SceneMismatch { truth: String::new(), prediction: extra.image_id.clone() });
    }
    let mut report = ErrorReport::empty(cfg);
    for t in truths {
        let preds = by_id.get(t.image_id.as_str()).map(|i| predictions_from_image(i)).unwrap_or_default();
        report = report.merge(&evaluate(t, &t.image_id, &preds, cfg)?);
    }
    Ok(report)
}
