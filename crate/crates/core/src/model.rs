//! Phase images, run configuration and pixel regions.

use std::collections::VecDeque;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, Circle, Point};

/// Optical density (µm) for a phase sample (rad) at wavelength `wavelength_nm`.
///
/// Inverts φ = 2π/λ · ρ_o.
pub fn phase_to_density(phase: f64, wavelength_nm: f64) -> f64 {
    wavelength_nm * 1e-3 * phase / (2.0 * PI)
}

/// A reconstructed phase map with its physical calibration.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseImage {
    id: String,
    width: usize,
    height: usize,
    phase: Vec<f64>,
    pixel_size_um: f64,
    wavelength_nm: f64,
}

impl PhaseImage {
    pub fn new(
        id: impl Into<String>,
        width: usize,
        height: usize,
        phase: Vec<f64>,
        pixel_size_um: f64,
        wavelength_nm: f64,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!("dimensions {width}x{height}")));
        }
        if phase.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "{} samples for a {width}x{height} grid",
                phase.len()
            )));
        }
        if !(pixel_size_um > 0.0 && pixel_size_um.is_finite()) {
            return Err(Error::InvalidImage(format!("pixel size {pixel_size_um}")));
        }
        if !(wavelength_nm > 0.0 && wavelength_nm.is_finite()) {
            return Err(Error::InvalidImage(format!("wavelength {wavelength_nm}")));
        }
        if let Some(i) = phase.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidImage(format!(
                "non-finite phase at ({}, {})",
                i % width,
                i / width
            )));
        }
        Ok(Self { id: id.into(), width, height, phase, pixel_size_um, wavelength_nm })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Row-major samples in radians.
    pub fn phase(&self) -> &[f64] {
        &self.phase
    }

    pub fn pixel_size_um(&self) -> f64 {
        self.pixel_size_um
    }

    pub fn wavelength_nm(&self) -> f64 {
        self.wavelength_nm
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.phase[y * self.width + x]
    }

    #[inline]
    pub fn at_pixel(&self, p: Pixel) -> f64 {
        self.at(p.x as usize, p.y as usize)
    }

    pub fn density_at(&self, p: Pixel) -> f64 {
        phase_to_density(self.at_pixel(p), self.wavelength_nm)
    }

    /// Same samples, different calibration.
    pub fn with_calibration(mut self, pixel_size_um: f64, wavelength_nm: f64) -> Result<Self> {
        if !(pixel_size_um > 0.0 && pixel_size_um.is_finite()) {
            return Err(Error::InvalidImage(format!("pixel size {pixel_size_um}")));
        }
        if !(wavelength_nm > 0.0 && wavelength_nm.is_finite()) {
            return Err(Error::InvalidImage(format!("wavelength {wavelength_nm}")));
        }
        self.pixel_size_um = pixel_size_um;
        self.wavelength_nm = wavelength_nm;
        Ok(self)
    }
}

/// Tunables for every pipeline stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Radius of the smallest plausible cell (µm).
    pub r_min_um: f64,
    /// Enclosing-circle diameter (µm) from which internal detection runs.
    pub d_internal_min_um: f64,
    /// Internal structures smaller than this are dropped.
    pub min_structure_px: usize,
    /// Bin width (rad) of the background-mode histogram.
    pub histogram_bin_width: f64,
    /// Gradient threshold as a multiple of the image's mean gradient magnitude.
    pub gradient_factor: f64,
    /// Share of the (dilated) boundary that must sit on a gradient edge.
    pub gradient_boundary_fraction: f64,
    /// Robust z-score above which an image background counts as an outlier.
    pub background_sigma_factor: f64,
    /// When false, every candidate is accepted as a cell.
    pub plausibility_checks: bool,
    /// Threshold (rad) used when the automatic one degenerates to zero.
    pub fallback_threshold: Option<f64>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            r_min_um: 3.0,
            d_internal_min_um: 25.0,
            min_structure_px: 20,
            histogram_bin_width: 0.01,
            gradient_factor: 4.0,
            gradient_boundary_fraction: 0.25,
            background_sigma_factor: 3.0,
            plausibility_checks: true,
            fallback_threshold: None,
        }
    }
}

impl Config {
    /// Smallest accepted cell area, π·r_min² (µm²).
    pub fn min_area_um2(&self) -> f64 {
        PI * self.r_min_um * self.r_min_um
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("r_min_um", self.r_min_um),
            ("d_internal_min_um", self.d_internal_min_um),
            ("histogram_bin_width", self.histogram_bin_width),
            ("gradient_factor", self.gradient_factor),
            ("background_sigma_factor", self.background_sigma_factor),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        if self.min_structure_px == 0 {
            return Err(Error::InvalidConfig("min_structure_px must be positive".into()));
        }
        let f = self.gradient_boundary_fraction;
        if !(f > 0.0 && f <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "gradient_boundary_fraction must lie in (0, 1], got {f}"
            )));
        }
        if let Some(t) = self.fallback_threshold {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::InvalidConfig(format!("fallback_threshold must be positive, got {t}")));
            }
        }
        Ok(())
    }
}

/// Integer pixel coordinate. Orders row-major (y first).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Pixel {
    pub x: u32,
    pub y: u32,
}

impl Pixel {
    pub const fn new(x: u32, y: u32) -> Self {
        Self { x, y }
    }
}

impl Ord for Pixel {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.y, self.x).cmp(&(other.y, other.x))
    }
}

impl PartialOrd for Pixel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Inclusive pixel bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BBox {
    pub x_min: u32,
    pub y_min: u32,
    pub x_max: u32,
    pub y_max: u32,
}

impl BBox {
    pub fn width(&self) -> usize {
        (self.x_max - self.x_min) as usize + 1
    }

    pub fn height(&self) -> usize {
        (self.y_max - self.y_min) as usize + 1
    }

    pub fn contains_box(&self, other: &BBox) -> bool {
        self.x_min <= other.x_min
            && self.y_min <= other.y_min
            && self.x_max >= other.x_max
            && self.y_max >= other.y_max
    }

    pub fn contains(&self, p: Pixel) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }
}

/// Moore neighbourhood, clockwise on screen (y grows downwards) starting east.
const DIRS: [(i64, i64); 8] = [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)];

fn dir_index(dx: i64, dy: i64) -> usize {
    DIRS.iter().position(|&d| d == (dx, dy)).expect("unit neighbour offset")
}

/// An 8-connected pixel set with its traced outer boundary and geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pixels: Vec<Pixel>,
    boundary: Vec<Pixel>,
    bbox: BBox,
    mask: Vec<bool>,
    pixel_size_um: f64,
    centroid: Point,
    enclosing_circle: Circle,
    perimeter_um: f64,
}

impl Region {
    /// Builds a region from an 8-connected pixel set; duplicates are ignored.
    pub fn from_pixels(pixels: impl IntoIterator<Item = Pixel>, pixel_size_um: f64) -> Result<Self> {
        let mut pixels: Vec<Pixel> = pixels.into_iter().collect();
        pixels.sort_unstable();
        pixels.dedup();
        Self::from_sorted(pixels, pixel_size_um)
    }

    /// `pixels` must be sorted row-major without duplicates.
    pub(crate) fn from_sorted(pixels: Vec<Pixel>, pixel_size_um: f64) -> Result<Self> {
        if pixels.is_empty() {
            return Err(Error::EmptyRegion);
        }
        let bbox = pixels.iter().fold(
            BBox { x_min: u32::MAX, y_min: u32::MAX, x_max: 0, y_max: 0 },
            |b, p| BBox {
                x_min: b.x_min.min(p.x),
                y_min: b.y_min.min(p.y),
                x_max: b.x_max.max(p.x),
                y_max: b.y_max.max(p.y),
            },
        );
        let w = bbox.width();
        let mut mask = vec![false; w * bbox.height()];
        for p in &pixels {
            mask[(p.y - bbox.y_min) as usize * w + (p.x - bbox.x_min) as usize] = true;
        }

        let components = count_components(&mask, w, bbox.height());
        if components != 1 {
            return Err(Error::Disconnected { components, pixels: pixels.len() });
        }

        let n = pixels.len() as f64;
        let (sx, sy) = pixels.iter().fold((0.0, 0.0), |(sx, sy), p| (sx + p.x as f64, sy + p.y as f64));
        let centroid = Point::new(sx / n * pixel_size_um, sy / n * pixel_size_um);

        let boundary = trace_boundary(&mask, w, bbox.height(), bbox, pixels[0]);
        let perimeter_um = boundary_length(&boundary) * pixel_size_um;

        let hull = geometry::convex_hull(
            &boundary.iter().map(|p| (p.x as i64, p.y as i64)).collect::<Vec<_>>(),
        );
        let hull_pts: Vec<Point> = hull.iter().map(|&(x, y)| Point::new(x as f64, y as f64)).collect();
        let enclosing_circle = geometry::min_enclosing_circle(&hull_pts)
            .expect("non-empty hull")
            .scale(pixel_size_um);

        Ok(Self { pixels, boundary, bbox, mask, pixel_size_um, centroid, enclosing_circle, perimeter_um })
    }

    /// Pixels in row-major order.
    pub fn pixels(&self) -> &[Pixel] {
        &self.pixels
    }

    /// Outer boundary as a closed clockwise cycle starting at the top-left pixel.
    /// The closing edge back to the first pixel is implicit.
    pub fn boundary(&self) -> &[Pixel] {
        &self.boundary
    }

    pub fn bbox(&self) -> BBox {
        self.bbox
    }

    pub fn area_px(&self) -> usize {
        self.pixels.len()
    }

    pub fn area_um2(&self) -> f64 {
        self.pixels.len() as f64 * self.pixel_size_um * self.pixel_size_um
    }

    pub fn pixel_size_um(&self) -> f64 {
        self.pixel_size_um
    }

    /// Mean of pixel centres, µm.
    pub fn centroid(&self) -> Point {
        self.centroid
    }

    /// Minimal circle around pixel centres, µm.
    pub fn enclosing_circle(&self) -> Circle {
        self.enclosing_circle
    }

    pub fn diameter_um(&self) -> f64 {
        2.0 * self.enclosing_circle.radius
    }

    pub fn perimeter_um(&self) -> f64 {
        self.perimeter_um
    }

    /// Topmost, then leftmost pixel.
    pub fn top_left(&self) -> Pixel {
        self.pixels[0]
    }

    pub fn contains(&self, p: Pixel) -> bool {
        self.bbox.contains(p) && self.mask[self.local_index(p)]
    }

    pub fn is_subset_of(&self, other: &Region) -> bool {
        other.bbox.contains_box(&self.bbox) && self.pixels.iter().all(|p| other.contains(*p))
    }

    fn local_index(&self, p: Pixel) -> usize {
        (p.y - self.bbox.y_min) as usize * self.bbox.width() + (p.x - self.bbox.x_min) as usize
    }

    /// Membership in the region with its holes filled, i.e. everything the
    /// outer contour encloses.
    pub fn filled_mask(&self) -> FilledMask {
        let w = self.bbox.width();
        let h = self.bbox.height();
        // outside = background reachable from the bbox border (4-connected,
        // the dual of 8-connected foreground)
        let mut outside = vec![false; w * h];
        let mut queue = VecDeque::new();
        for y in 0..h {
            for x in 0..w {
                if (x == 0 || y == 0 || x == w - 1 || y == h - 1) && !self.mask[y * w + x] {
                    outside[y * w + x] = true;
                    queue.push_back((x, y));
                }
            }
        }
        while let Some((x, y)) = queue.pop_front() {
            let neighbours = [
                (x.wrapping_sub(1), y),
                (x + 1, y),
                (x, y.wrapping_sub(1)),
                (x, y + 1),
            ];
            for (nx, ny) in neighbours {
                if nx < w && ny < h && !self.mask[ny * w + nx] && !outside[ny * w + nx] {
                    outside[ny * w + nx] = true;
                    queue.push_back((nx, ny));
                }
            }
        }
        FilledMask { bbox: self.bbox, inside: outside.into_iter().map(|o| !o).collect() }
    }

    /// Horizontal runs `[y, x_start, x_end_inclusive]` in row-major order.
    pub fn runs(&self) -> Vec<[u32; 3]> {
        pixel_runs(&self.pixels)
    }

    /// Same pixels under a different calibration.
    pub fn with_pixel_size(&self, pixel_size_um: f64) -> Region {
        let s = pixel_size_um / self.pixel_size_um;
        Region {
            pixels: self.pixels.clone(),
            boundary: self.boundary.clone(),
            bbox: self.bbox,
            mask: self.mask.clone(),
            pixel_size_um,
            centroid: self.centroid.scale(s),
            enclosing_circle: self.enclosing_circle.scale(s),
            perimeter_um: self.perimeter_um * s,
        }
    }

    /// Touches the border of a `width`×`height` image.
    pub fn touches_border(&self, width: usize, height: usize) -> bool {
        self.bbox.x_min == 0
            || self.bbox.y_min == 0
            || self.bbox.x_max as usize + 1 >= width
            || self.bbox.y_max as usize + 1 >= height
    }
}

/// Run-length form of a row-major sorted pixel list.
pub fn pixel_runs(sorted: &[Pixel]) -> Vec<[u32; 3]> {
    let mut runs: Vec<[u32; 3]> = Vec::new();
    for p in sorted {
        match runs.last_mut() {
            Some(r) if r[0] == p.y && r[2] + 1 == p.x => r[2] = p.x,
            _ => runs.push([p.y, p.x, p.x]),
        }
    }
    runs
}

/// Inverse of [`pixel_runs`].
pub fn expand_runs(runs: &[[u32; 3]]) -> Vec<Pixel> {
    runs.iter().flat_map(|&[y, a, b]| (a..=b).map(move |x| Pixel::new(x, y))).collect()
}

/// A region's pixel set with holes filled.
#[derive(Debug, Clone)]
pub struct FilledMask {
    bbox: BBox,
    inside: Vec<bool>,
}

impl FilledMask {
    pub fn contains(&self, p: Pixel) -> bool {
        self.bbox.contains(p)
            && self.inside
                [(p.y - self.bbox.y_min) as usize * self.bbox.width() + (p.x - self.bbox.x_min) as usize]
    }

    /// Containment of a continuous point given in pixel units.
    pub fn contains_point(&self, x: f64, y: f64) -> bool {
        let (x, y) = (x.round(), y.round());
        x >= 0.0 && y >= 0.0 && self.contains(Pixel::new(x as u32, y as u32))
    }
}

fn count_components(mask: &[bool], w: usize, h: usize) -> usize {
    let mut seen = vec![false; mask.len()];
    let mut count = 0;
    let mut stack = Vec::new();
    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        count += 1;
        seen[start] = true;
        stack.push(start);
        while let Some(i) = stack.pop() {
            let (x, y) = ((i % w) as i64, (i / w) as i64);
            for (dx, dy) in DIRS {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if mask[j] && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
    }
    count
}

/// Moore-neighbour tracing; stops when the walk is back at the start and
/// about to repeat its first move.
fn trace_boundary(mask: &[bool], w: usize, h: usize, bbox: BBox, start: Pixel) -> Vec<Pixel> {
    let is_fg = |x: i64, y: i64| x >= 0 && y >= 0 && x < w as i64 && y < h as i64 && mask[y as usize * w + x as usize];
    let origin = (bbox.x_min as i64, bbox.y_min as i64);
    let s = (start.x as i64 - origin.0, start.y as i64 - origin.1);

    // The start is the top-left pixel, so its west neighbour is background.
    let mut cur = s;
    let mut back = dir_index(-1, 0);
    let mut out = vec![s];
    let max_steps = 4 * mask.len() + 8;

    for _ in 0..max_steps {
        let mut next = None;
        for k in 1..=8 {
            let d = (back + k) % 8;
            let (dx, dy) = DIRS[d];
            if is_fg(cur.0 + dx, cur.1 + dy) {
                next = Some(d);
                break;
            }
        }
        let Some(d) = next else {
            break; // isolated pixel
        };
        let prev_d = (d + 7) % 8;
        let np = (cur.0 + DIRS[d].0, cur.1 + DIRS[d].1);
        // backtrack: the background neighbour checked just before `np`,
        // expressed relative to `np`
        let bp = (cur.0 + DIRS[prev_d].0, cur.1 + DIRS[prev_d].1);
        let nb = dir_index(bp.0 - np.0, bp.1 - np.1);
        if cur == s && out.len() > 1 && np == out[1] {
            break;
        }
        cur = np;
        back = nb;
        out.push(cur);
    }

    if out.len() > 1 && out.last() == Some(&s) {
        out.pop();
    }
    out.into_iter()
        .map(|(x, y)| Pixel::new((x + origin.0) as u32, (y + origin.1) as u32))
        .collect()
}

/// Length in pixel units of a closed 8-connected boundary cycle.
///
/// Corner-corrected chain-code estimate (Vossepoel & Smeulders):
/// `0.980·n_axis + 1.406·n_diagonal − 0.091·n_corners`, where corners are
/// changes of direction between consecutive steps. The plain `1`/`√2` step
/// sum overestimates the perimeter of round shapes by about 5%.
fn boundary_length(boundary: &[Pixel]) -> f64 {
    if boundary.len() < 2 {
        return 0.0;
    }
    let steps: Vec<(i64, i64)> = boundary
        .iter()
        .zip(boundary.iter().cycle().skip(1))
        .map(|(a, b)| (b.x as i64 - a.x as i64, b.y as i64 - a.y as i64))
        .collect();
    let diagonal = steps.iter().filter(|(dx, dy)| *dx != 0 && *dy != 0).count();
    let axis = steps.len() - diagonal;
    let corners = steps.iter().zip(steps.iter().cycle().skip(1)).filter(|(a, b)| a != b).count();
    0.980 * axis as f64 + 1.406 * diagonal as f64 - 0.091 * corners as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn disk(cx: i64, cy: i64, r: f64) -> Vec<Pixel> {
        let ri = r.ceil() as i64;
        let mut v = Vec::new();
        for y in cy - ri..=cy + ri {
            for x in cx - ri..=cx + ri {
                let (dx, dy) = ((x - cx) as f64, (y - cy) as f64);
                if dx * dx + dy * dy <= r * r {
                    v.push(Pixel::new(x as u32, y as u32));
                }
            }
        }
        v
    }

    #[test]
    fn density_of_zero_phase_is_zero() {
        assert_eq!(phase_to_density(0.0, 528.0), 0.0);
    }

    #[test]
    fn density_of_full_cycle_is_one_wavelength() {
        assert_relative_eq!(phase_to_density(2.0 * PI, 528.0), 0.528, epsilon = 1e-15);
        assert_relative_eq!(phase_to_density(PI, 528.0), 0.264, epsilon = 1e-15);
    }

    #[test]
    fn image_rejects_bad_inputs() {
        assert!(PhaseImage::new("a", 0, 1, vec![], 1.0, 528.0).is_err());
        assert!(PhaseImage::new("a", 2, 2, vec![0.0; 3], 1.0, 528.0).is_err());
        assert!(PhaseImage::new("a", 1, 1, vec![f64::NAN], 1.0, 528.0).is_err());
        assert!(PhaseImage::new("a", 1, 1, vec![0.0], 0.0, 528.0).is_err());
        assert!(PhaseImage::new("a", 1, 1, vec![0.0], 1.0, -1.0).is_err());
        assert!(PhaseImage::new("a", 1, 1, vec![0.0], 1.0, 528.0).is_ok());
    }

    #[test]
    fn default_config_is_valid() {
        Config::default().validate().unwrap();
        assert_relative_eq!(Config::default().min_area_um2(), 28.274333882308138);
        let bad = Config { gradient_boundary_fraction: 0.0, ..Config::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn single_pixel_region() {
        let r = Region::from_pixels([Pixel::new(0, 0)], 1.0).unwrap();
        assert_eq!(r.area_px(), 1);
        assert_eq!(r.area_um2(), 1.0);
        assert_eq!(r.centroid(), Point::new(0.0, 0.0));
        assert!(r.enclosing_circle().radius.abs() < 1e-12);
        assert_eq!(r.boundary(), &[Pixel::new(0, 0)]);
        assert_eq!(r.perimeter_um(), 0.0);
    }

    #[test]
    fn square_region() {
        let px: Vec<Pixel> = (0..3).flat_map(|y| (0..3).map(move |x| Pixel::new(x + 4, y + 7))).collect();
        let r = Region::from_pixels(px, 1.0).unwrap();
        assert_eq!(r.area_px(), 9);
        assert_eq!(r.centroid(), Point::new(5.0, 8.0));
        assert_eq!((r.bbox().width(), r.bbox().height()), (3, 3));
        // the 8 border pixels, clockwise from the top-left
        let expected: Vec<Pixel> = [(4, 7), (5, 7), (6, 7), (6, 8), (6, 9), (5, 9), (4, 9), (4, 8)]
            .iter()
            .map(|&(x, y)| Pixel::new(x, y))
            .collect();
        assert_eq!(r.boundary(), expected.as_slice());
        // 8 axis steps, 4 corners
        assert_relative_eq!(r.perimeter_um(), 0.980 * 8.0 - 0.091 * 4.0);
    }

    #[test]
    fn disconnected_input_is_rejected() {
        let err = Region::from_pixels([Pixel::new(0, 0), Pixel::new(2, 0)], 1.0).unwrap_err();
        assert!(matches!(err, Error::Disconnected { components: 2, .. }));
        assert!(matches!(Region::from_pixels([], 1.0), Err(Error::EmptyRegion)));
    }

    #[test]
    fn diagonal_pixels_form_one_region() {
        let r = Region::from_pixels([Pixel::new(0, 0), Pixel::new(1, 1)], 1.0).unwrap();
        assert_eq!(r.boundary().len(), 2);
        assert_relative_eq!(r.perimeter_um(), 2.0 * 1.406 - 2.0 * 0.091);
    }

    #[test]
    fn disk_enclosing_radius_matches_raster_radius() {
        let r = Region::from_pixels(disk(30, 30, 10.0), 1.0).unwrap();
        assert!((r.enclosing_circle().radius - 10.0).abs() <= 1.0);
        assert_relative_eq!(r.centroid().x, 30.0, epsilon = 1e-12);
        assert_relative_eq!(r.centroid().y, 30.0, epsilon = 1e-12);
    }

    #[test]
    fn boundary_visits_both_sides_of_thin_parts() {
        // an L of width 1: every pixel is a boundary pixel
        let px = [(0, 0), (0, 1), (0, 2), (1, 2), (2, 2)].map(|(x, y)| Pixel::new(x, y));
        let r = Region::from_pixels(px, 1.0).unwrap();
        let b = r.boundary();
        // the walk back cuts the inner corner diagonally
        assert_eq!(b.len(), 7);
        for p in px {
            assert!(b.contains(&p));
        }
        for (a, c) in b.iter().zip(b.iter().cycle().skip(1)) {
            assert!(a.x.abs_diff(c.x) <= 1 && a.y.abs_diff(c.y) <= 1);
        }
    }

    #[test]
    fn ring_fills_its_hole() {
        let mut px = Vec::new();
        for y in 0..5u32 {
            for x in 0..5u32 {
                if x == 0 || y == 0 || x == 4 || y == 4 {
                    px.push(Pixel::new(x, y));
                }
            }
        }
        let r = Region::from_pixels(px, 1.0).unwrap();
        assert!(!r.contains(Pixel::new(2, 2)));
        let filled = r.filled_mask();
        assert!(filled.contains(Pixel::new(2, 2)));
        assert!(filled.contains_point(2.2, 1.8));
        assert!(!filled.contains(Pixel::new(5, 2)));
    }

    #[test]
    fn runs_cover_pixels() {
        let r = Region::from_pixels(disk(5, 5, 3.0), 1.0).unwrap();
        let n: u32 = r.runs().iter().map(|[_, a, b]| b - a + 1).sum();
        assert_eq!(n as usize, r.area_px());
    }

    #[test]
    fn border_flag() {
        let r = Region::from_pixels(disk(3, 10, 3.0), 1.0).unwrap();
        assert!(r.touches_border(100, 100));
        let r = Region::from_pixels(disk(20, 20, 3.0), 1.0).unwrap();
        assert!(!r.touches_border(100, 100));
    }
}
