//! Fourth step: internal structures of large cells at three thresholds and
//! the choice of nucleus among them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{phase_to_density, Config, PhaseImage, Pixel, Region};
use crate::segment::{connected_components, BinaryMask};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InternalThresholds {
    /// 4·t
    pub t1: f64,
    /// 6·t
    pub t2: f64,
    /// 0.8 × mean of per-cell maximum phase
    pub t3: f64,
    pub mean_cell_max: f64,
}

impl InternalThresholds {
    pub fn tier(&self, tier: u8) -> f64 {
        match tier {
            1 => self.t1,
            2 => self.t2,
            3 => self.t3,
            _ => panic!("no tier {tier}"),
        }
    }
}

/// `cell_maxima` are the maximum phase of every detected (non-border) cell of
/// the measurement.
pub fn compute_internal_thresholds(t: f64, cell_maxima: &[f64]) -> Result<InternalThresholds> {
    if t.is_nan() || t <= 0.0 {
        return Err(Error::DegenerateThreshold { mean_background: t / 2.0 });
    }
    if cell_maxima.is_empty() {
        return Err(Error::EmptyMeasurement);
    }
    let mean_cell_max = cell_maxima.iter().sum::<f64>() / cell_maxima.len() as f64;
    Ok(InternalThresholds { t1: 4.0 * t, t2: 6.0 * t, t3: 0.8 * mean_cell_max, mean_cell_max })
}

/// Enclosing-circle diameter reaches the internal-detection minimum.
pub fn eligible_for_internal(cell: &Region, cfg: &Config) -> bool {
    cell.diameter_um() >= cfg.d_internal_min_um
}

/// Which thresholds a structure was found with.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct TierSet(u8);

impl TierSet {
    pub fn single(tier: u8) -> Self {
        let mut s = Self::default();
        s.insert(tier);
        s
    }

    pub fn insert(&mut self, tier: u8) {
        assert!((1..=3).contains(&tier));
        self.0 |= 1 << (tier - 1);
    }

    pub fn contains(&self, tier: u8) -> bool {
        (1..=3).contains(&tier) && self.0 & (1 << (tier - 1)) != 0
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = u8> + '_ {
        (1..=3).filter(|t| self.contains(*t))
    }
}

impl Serialize for TierSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.iter())
    }
}

impl<'de> Deserialize<'de> for TierSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let tiers = Vec::<u8>::deserialize(d)?;
        let mut set = TierSet::default();
        for t in tiers {
            if !(1..=3).contains(&t) {
                return Err(serde::de::Error::custom(format!("tier {t}")));
            }
            set.insert(t);
        }
        Ok(set)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InternalStructure {
    pub region: Region,
    pub tiers: TierSet,
    pub mean_density_um: f64,
    pub max_density_um: f64,
}

impl InternalStructure {
    /// Densities are taken from `img` over the region's pixels.
    pub fn new(region: Region, tiers: TierSet, img: &PhaseImage) -> Self {
        let density: Vec<f64> = region
            .pixels()
            .iter()
            .map(|p| phase_to_density(img.at_pixel(*p), img.wavelength_nm()))
            .collect();
        let max = density.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        // mean as an offset from the maximum: exact for a uniform structure
        let deficit = density.iter().map(|d| max - d).sum::<f64>() / density.len() as f64;
        let mean_density_um = max - deficit;
        Self { region, tiers, mean_density_um, max_density_um: max }
    }
}

struct Node {
    pixels: Vec<Pixel>,
    tiers: TierSet,
    children: Vec<usize>,
    root: bool,
}

/// Components of `φ ≥ t` inside `cell`, at least `min_px` pixels each.
fn tier_components(cell: &Region, img: &PhaseImage, t: f64, min_px: usize) -> Vec<Vec<Pixel>> {
    let b = cell.bbox();
    let mask = BinaryMask::from_fn(b.width(), b.height(), |x, y| {
        let p = Pixel::new(b.x_min + x as u32, b.y_min + y as u32);
        cell.contains(p) && img.at_pixel(p) >= t
    });
    connected_components(&mask)
        .into_iter()
        .filter(|c| c.len() >= min_px)
        .map(|c| c.into_iter().map(|p| Pixel::new(p.x + b.x_min, p.y + b.y_min)).collect())
        .collect()
}

/// Internal structures of one cell.
///
/// Tiers are processed from the highest threshold down. A component that
/// contains exactly one structure found so far is the same structure seen at a
/// looser threshold: the structure takes over the larger outline and gains the
/// tier. A component containing several becomes a new enclosing structure, and
/// the enclosed ones gain its tier as well.
pub fn detect_internal(
    cell: &Region,
    img: &PhaseImage,
    th: &InternalThresholds,
    cfg: &Config,
) -> Vec<InternalStructure> {
    let mut order = [3u8, 2, 1];
    order.sort_by(|a, b| th.tier(*b).total_cmp(&th.tier(*a)));

    let mut nodes: Vec<Node> = Vec::new();
    for tier in order {
        let comps = tier_components(cell, img, th.tier(tier), cfg.min_structure_px);
        let b = cell.bbox();
        let w = b.width();
        let mut label = vec![u32::MAX; w * b.height()];
        for (k, comp) in comps.iter().enumerate() {
            for p in comp {
                label[(p.y - b.y_min) as usize * w + (p.x - b.x_min) as usize] = k as u32;
            }
        }
        let mut inside: Vec<Vec<usize>> = vec![Vec::new(); comps.len()];
        for (n, node) in nodes.iter().enumerate() {
            if !node.root {
                continue;
            }
            let p = node.pixels[0];
            let l = label[(p.y - b.y_min) as usize * w + (p.x - b.x_min) as usize];
            if l != u32::MAX {
                inside[l as usize].push(n);
            }
        }
        for (comp, roots) in comps.into_iter().zip(inside) {
            match roots.as_slice() {
                [] => nodes.push(Node { pixels: comp, tiers: TierSet::single(tier), children: vec![], root: true }),
                [only] => {
                    nodes[*only].pixels = comp;
                    mark_tier(&mut nodes, *only, tier);
                }
                many => {
                    for &r in many {
                        nodes[r].root = false;
                        mark_tier(&mut nodes, r, tier);
                    }
                    nodes.push(Node {
                        pixels: comp,
                        tiers: TierSet::single(tier),
                        children: many.to_vec(),
                        root: true,
                    });
                }
            }
        }
    }

    let mut out: Vec<InternalStructure> = nodes
        .into_iter()
        .map(|n| {
            let region = Region::from_sorted(n.pixels, img.pixel_size_um()).expect("component is connected");
            InternalStructure::new(region, n.tiers, img)
        })
        .collect();
    out.sort_by_key(|s| (s.region.top_left(), std::cmp::Reverse(s.region.area_px())));
    out
}

fn mark_tier(nodes: &mut [Node], n: usize, tier: u8) {
    nodes[n].tiers.insert(tier);
    for c in nodes[n].children.clone() {
        mark_tier(nodes, c, tier);
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct NucleusResult {
    pub nucleus: Option<InternalStructure>,
    /// Possible nuclei the choice was made from.
    pub candidates: Vec<InternalStructure>,
    pub abnormal_or_aggregate: bool,
}

impl NucleusResult {
    pub fn candidate_count(&self) -> usize {
        self.candidates.len()
    }
}

fn denser(a: &InternalStructure, b: &InternalStructure) -> std::cmp::Ordering {
    a.mean_density_um
        .total_cmp(&b.mean_density_um)
        .then(a.region.area_px().cmp(&b.region.area_px()))
        .then(b.region.top_left().cmp(&a.region.top_left()))
}

/// A single structure is the nucleus. Otherwise the strictest-tier structures
/// are the possible nuclei; more than one of those flags the cell, and the
/// densest wins. Without any strictest-tier structure the densest of all wins.
pub fn select_nucleus(structures: &[InternalStructure]) -> NucleusResult {
    let mut all = structures.to_vec();
    all.sort_by_key(|s| (s.region.top_left(), std::cmp::Reverse(s.region.area_px())));
    match all.len() {
        0 => NucleusResult::default(),
        1 => NucleusResult { nucleus: Some(all[0].clone()), candidates: all, abnormal_or_aggregate: false },
        _ => {
            let strict: Vec<_> = all.iter().filter(|s| s.tiers.contains(3)).cloned().collect();
            let (candidates, flag) = match strict.len() {
                0 => (all, false),
                1 => (strict, false),
                _ => (strict, true),
            };
            let nucleus = candidates.iter().max_by(|a, b| denser(a, b)).cloned();
            NucleusResult { nucleus, candidates, abnormal_or_aggregate: flag }
        }
    }
}
