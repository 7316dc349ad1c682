//! Synthetic phase images with known ground truth.
//!
//! A cell of radius `R` and peak `p` adds
//! `p·(e + (1 − e)·(1 − r²/R²))` for `r ≤ R`, a paraboloid standing on a
//! pedestal `e·p` that gives the cell a sharp rim. The nucleus adds a
//! flat-topped blob of amplitude `c·p` (`c` is the nucleus contrast), other
//! internal blobs a smaller one. Debris is a Gaussian bump with
//! multiplicative speckle and no sharp rim. Pixel centres sit at integer
//! coordinates; all masks are pixel centres within the stated radius.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::model::{expand_runs, pixel_runs, PhaseImage, Pixel};
use crate::pipeline::ImageSource;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhantomParams {
    pub width: usize,
    pub height: usize,
    pub pixel_size_um: f64,
    pub wavelength_nm: f64,
    pub background_rad: f64,
    pub noise_sigma_rad: f64,
    pub cell_count: usize,
    pub cell_diameter_um: (f64, f64),
    pub cell_peak_rad: (f64, f64),
    /// Rim height as a fraction of the peak; 0 gives a plain paraboloid.
    pub cell_edge_fraction: (f64, f64),
    pub nucleus: bool,
    /// Nucleus radius over cell radius.
    pub nucleus_radius_fraction: (f64, f64),
    /// Nucleus amplitude over cell peak.
    pub nucleus_contrast: (f64, f64),
    /// Largest nucleus offset from the cell centre, as a fraction of `R − R_n`.
    pub nucleus_offset_fraction: f64,
    pub blobs_per_cell: (usize, usize),
    pub blob_radius_um: (f64, f64),
    pub blob_amplitude_rad: (f64, f64),
    pub debris_count: usize,
    pub debris_amplitude_rad: (f64, f64),
    pub debris_sigma_um: (f64, f64),
    /// Relative standard deviation of the per-pixel debris speckle.
    pub debris_speckle: f64,
    pub reflection_count: usize,
    pub wrap_count: usize,
    /// Minimum gap between placed objects and to the image border.
    pub margin_um: f64,
    pub max_attempts: usize,
}

impl Default for PhantomParams {
    fn default() -> Self {
        Self {
            width: 512,
            height: 384,
            pixel_size_um: 0.5,
            wavelength_nm: 528.0,
            background_rad: 0.05,
            noise_sigma_rad: 0.02,
            cell_count: 5,
            cell_diameter_um: (12.0, 48.0),
            cell_peak_rad: (0.24, 0.30),
            cell_edge_fraction: (0.5, 0.8),
            nucleus: true,
            nucleus_radius_fraction: (0.2, 0.35),
            nucleus_contrast: (1.5, 3.0),
            nucleus_offset_fraction: 0.4,
            blobs_per_cell: (0, 2),
            blob_radius_um: (2.0, 3.0),
            blob_amplitude_rad: (0.30, 0.40),
            debris_count: 3,
            debris_amplitude_rad: (0.2, 0.35),
            debris_sigma_um: (3.0, 6.0),
            debris_speckle: 0.25,
            reflection_count: 0,
            wrap_count: 0,
            margin_um: 2.0,
            max_attempts: 2000,
        }
    }
}

fn check_range(name: &str, (lo, hi): (f64, f64), min: f64, max: f64) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite() && min <= lo && lo <= hi && hi <= max) {
        return Err(Error::InvalidConfig(format!("{name} must satisfy {min} <= lo <= hi <= {max}, got ({lo}, {hi})")));
    }
    Ok(())
}

impl PhantomParams {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidConfig("phantom size must be positive".into()));
        }
        if !(self.pixel_size_um > 0.0 && self.wavelength_nm > 0.0) {
            return Err(Error::InvalidConfig("calibration must be positive".into()));
        }
        if !(self.noise_sigma_rad >= 0.0 && self.background_rad.is_finite()) {
            return Err(Error::InvalidConfig("noise sigma must be non-negative".into()));
        }
        check_range("cell_diameter_um", self.cell_diameter_um, 6.0, 60.0)?;
        check_range("cell_peak_rad", self.cell_peak_rad, 0.0, f64::MAX)?;
        check_range("nucleus_radius_fraction", self.nucleus_radius_fraction, 0.0, 0.9)?;
        check_range("nucleus_contrast", self.nucleus_contrast, 0.0, f64::MAX)?;
        check_range("blob_radius_um", self.blob_radius_um, 0.0, f64::MAX)?;
        check_range("blob_amplitude_rad", self.blob_amplitude_rad, 0.0, f64::MAX)?;
        check_range("debris_amplitude_rad", self.debris_amplitude_rad, 0.0, f64::MAX)?;
        check_range("debris_sigma_um", self.debris_sigma_um, 0.0, f64::MAX)?;
        check_range("cell_edge_fraction", self.cell_edge_fraction, 0.0, 1.0)?;
        if !(0.0..=1.0).contains(&self.nucleus_offset_fraction) {
            return Err(Error::InvalidConfig("nucleus_offset_fraction must lie in [0, 1]".into()));
        }
        if self.debris_speckle < 0.0 || self.margin_um < 0.0 {
            return Err(Error::InvalidConfig("speckle and margin must be non-negative".into()));
        }
        if self.blobs_per_cell.0 > self.blobs_per_cell.1 {
            return Err(Error::InvalidConfig("blobs_per_cell must be (lo, hi) with lo <= hi".into()));
        }
        Ok(())
    }
}

/// A disc-shaped ground-truth object; the mask is stored as runs `[y, x0, x1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtDisc {
    /// Centre in pixel units.
    pub center: Point,
    pub radius_px: f64,
    pub amplitude_rad: f64,
    pub mask: Vec<[u32; 3]>,
}

impl GtDisc {
    pub fn pixels(&self) -> Vec<Pixel> {
        expand_runs(&self.mask)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtCell {
    pub body: GtDisc,
    pub nucleus: Option<GtDisc>,
    pub blobs: Vec<GtDisc>,
}

impl GtCell {
    pub fn diameter_um(&self, pixel_size_um: f64) -> f64 {
        2.0 * self.body.radius_px * pixel_size_um
    }

    /// Nucleus amplitude over cell peak.
    pub fn nucleus_contrast(&self) -> Option<f64> {
        self.nucleus.as_ref().map(|n| n.amplitude_rad / self.body.amplitude_rad)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArtifactKind {
    Debris,
    Reflection,
    PhaseWrap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtArtifact {
    pub kind: ArtifactKind,
    pub region: GtDisc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub image_id: String,
    pub seed: u64,
    pub params: PhantomParams,
    pub cells: Vec<GtCell>,
    pub artifacts: Vec<GtArtifact>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhantomScene {
    pub image: PhaseImage,
    pub truth: GroundTruth,
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.gen_range(lo..hi)
    } else {
        lo
    }
}

struct Canvas<'a> {
    w: usize,
    h: usize,
    phase: &'a mut [f64],
}

impl Canvas<'_> {
    /// Calls `f(r², pixel)` for every pixel centre within `radius` of `c`
    /// and returns those pixels as runs.
    fn disc(&mut self, c: Point, radius: f64, mut f: impl FnMut(f64, &mut f64)) -> Vec<[u32; 3]> {
        let mut pixels = Vec::new();
        let y0 = (c.y - radius).ceil().max(0.0) as usize;
        let y1 = ((c.y + radius).floor() as i64).min(self.h as i64 - 1);
        let x0 = (c.x - radius).ceil().max(0.0) as usize;
        let x1 = ((c.x + radius).floor() as i64).min(self.w as i64 - 1);
        for y in y0 as i64..=y1 {
            for x in x0 as i64..=x1 {
                let r2 = (x as f64 - c.x).powi(2) + (y as f64 - c.y).powi(2);
                if r2 <= radius * radius {
                    f(r2, &mut self.phase[y as usize * self.w + x as usize]);
                    pixels.push(Pixel::new(x as u32, y as u32));
                }
            }
        }
        pixel_runs(&pixels)
    }
}

/// Flat-topped bump: `a·(top + (1 − top)·(1 − r²/R²))`.
fn cap(a: f64, top: f64, r2: f64, radius: f64) -> f64 {
    a * (top + (1.0 - top) * (1.0 - r2 / (radius * radius)))
}

/// Uniform random point in a disc of radius `r` around `c`.
fn point_in_disc(rng: &mut ChaCha8Rng, c: Point, r: f64) -> Point {
    let d = r * rng.gen::<f64>().sqrt();
    let a = rng.gen::<f64>() * TAU;
    Point::new(c.x + d * a.cos(), c.y + d * a.sin())
}

pub fn image_id_for(index: usize) -> String {
    format!("phantom_{index:04}")
}

pub fn generate_phantom(params: &PhantomParams, seed: u64) -> Result<PhantomScene> {
    generate_named(params, seed, &format!("phantom_s{seed}"))
}

pub fn generate_named(params: &PhantomParams, seed: u64, image_id: &str) -> Result<PhantomScene> {
    params.validate()?;
    let p = params;
    let s = p.pixel_size_um;
    let margin = p.margin_um / s;
    let (w, h) = (p.width, p.height);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut phase = vec![p.background_rad; w * h];
    let mut canvas = Canvas { w, h, phase: &mut phase };

    // occupied discs (centre, radius) in pixel units
    let mut occupied: Vec<(Point, f64)> = Vec::new();
    let place = |rng: &mut ChaCha8Rng, radius: f64, occupied: &mut Vec<(Point, f64)>| -> Option<Point> {
        let lo_x = radius + margin;
        let lo_y = radius + margin;
        let hi_x = w as f64 - 1.0 - radius - margin;
        let hi_y = h as f64 - 1.0 - radius - margin;
        if hi_x < lo_x || hi_y < lo_y {
            return None;
        }
        for _ in 0..p.max_attempts {
            let c = Point::new(uniform(rng, (lo_x, hi_x)), uniform(rng, (lo_y, hi_y)));
            if occupied.iter().all(|&(o, r)| o.dist(c) > r + radius + margin) {
                occupied.push((c, radius));
                return Some(c);
            }
        }
        None
    };

    let mut cells = Vec::with_capacity(p.cell_count);
    for _ in 0..p.cell_count {
        let radius = uniform(&mut rng, p.cell_diameter_um) / 2.0 / s;
        let peak = uniform(&mut rng, p.cell_peak_rad);
        let e = uniform(&mut rng, p.cell_edge_fraction);
        let center = place(&mut rng, radius, &mut occupied)
            .ok_or(Error::Overcrowded { requested: p.cell_count, attempts: p.max_attempts })?;
        let mask = canvas.disc(center, radius, |r2, v| *v += cap(peak, e, r2, radius));
        let body = GtDisc { center, radius_px: radius, amplitude_rad: peak, mask };

        let nucleus = if p.nucleus {
            let rn = radius * uniform(&mut rng, p.nucleus_radius_fraction);
            let amp = peak * uniform(&mut rng, p.nucleus_contrast);
            let c = point_in_disc(&mut rng, center, p.nucleus_offset_fraction * (radius - rn));
            let mask = canvas.disc(c, rn, |r2, v| *v += cap(amp, 0.9, r2, rn));
            Some(GtDisc { center: c, radius_px: rn, amplitude_rad: amp, mask })
        } else {
            None
        };

        let n_blobs = rng.gen_range(p.blobs_per_cell.0..=p.blobs_per_cell.1);
        let mut blobs: Vec<GtDisc> = Vec::with_capacity(n_blobs);
        for _ in 0..n_blobs {
            let rb = uniform(&mut rng, p.blob_radius_um) / s;
            let mut amp = uniform(&mut rng, p.blob_amplitude_rad);
            if let Some(n) = &nucleus {
                amp = amp.min(0.8 * n.amplitude_rad);
            }
            let reach = 0.85 * radius - rb;
            if reach <= 0.0 {
                continue;
            }
            let gap = 1.0 / s;
            let mut spot = None;
            for _ in 0..p.max_attempts.min(200) {
                let c = point_in_disc(&mut rng, center, reach);
                let clear_of_nucleus = nucleus.as_ref().is_none_or(|n| n.center.dist(c) > n.radius_px + rb + gap);
                let clear_of_blobs = blobs.iter().all(|b| b.center.dist(c) > b.radius_px + rb + gap);
                if clear_of_nucleus && clear_of_blobs {
                    spot = Some(c);
                    break;
                }
            }
            if let Some(c) = spot {
                let mask = canvas.disc(c, rb, |r2, v| *v += cap(amp, 0.8, r2, rb));
                blobs.push(GtDisc { center: c, radius_px: rb, amplitude_rad: amp, mask });
            }
        }
        cells.push(GtCell { body, nucleus, blobs });
    }

    let mut artifacts = Vec::new();
    for _ in 0..p.debris_count {
        let sigma = uniform(&mut rng, p.debris_sigma_um) / s;
        let amp = uniform(&mut rng, p.debris_amplitude_rad);
        let radius = 3.0 * sigma;
        let Some(c) = place(&mut rng, radius, &mut occupied) else {
            return Err(Error::Overcrowded { requested: p.debris_count, attempts: p.max_attempts });
        };
        let speckle = Normal::new(0.0, p.debris_speckle.max(f64::MIN_POSITIVE)).expect("valid sigma");
        let mask = canvas.disc(c, radius, |r2, v| {
            let k = if p.debris_speckle > 0.0 { 1.0 + speckle.sample(&mut rng) } else { 1.0 };
            *v += amp * (-r2 / (2.0 * sigma * sigma)).exp() * k;
        });
        artifacts.push(GtArtifact {
            kind: ArtifactKind::Debris,
            region: GtDisc { center: c, radius_px: radius, amplitude_rad: amp, mask },
        });
    }

    for _ in 0..p.reflection_count {
        // concentric fringes, period 3 µm
        let radius = uniform(&mut rng, (8.0, 16.0)) / s;
        let amp = 0.12;
        let Some(c) = place(&mut rng, radius, &mut occupied) else {
            return Err(Error::Overcrowded { requested: p.reflection_count, attempts: p.max_attempts });
        };
        let period = 3.0 / s;
        let mask = canvas.disc(c, radius, |r2, v| *v += amp * 0.5 * (1.0 + (TAU * r2.sqrt() / period).cos()));
        artifacts.push(GtArtifact {
            kind: ArtifactKind::Reflection,
            region: GtDisc { center: c, radius_px: radius, amplitude_rad: amp, mask },
        });
    }

    if p.noise_sigma_rad > 0.0 {
        let noise = Normal::new(0.0, p.noise_sigma_rad).expect("valid sigma");
        for v in canvas.phase.iter_mut() {
            *v += noise.sample(&mut rng);
        }
    }

    for _ in 0..p.wrap_count {
        let radius = uniform(&mut rng, (5.0, 10.0)) / s;
        let c = Point::new(uniform(&mut rng, (0.0, w as f64 - 1.0)), uniform(&mut rng, (0.0, h as f64 - 1.0)));
        let mask = canvas.disc(c, radius, |_, v| *v -= 2.0 * PI);
        artifacts.push(GtArtifact {
            kind: ArtifactKind::PhaseWrap,
            region: GtDisc { center: c, radius_px: radius, amplitude_rad: -2.0 * PI, mask },
        });
    }

    let image = PhaseImage::new(image_id, w, h, phase, s, p.wavelength_nm)?;
    let truth = GroundTruth { image_id: image_id.to_owned(), seed, params: p.clone(), cells, artifacts };
    Ok(PhantomScene { image, truth })
}

/// A measurement of phantom scenes regenerated from their seeds on demand.
#[derive(Debug, Clone, PartialEq)]
pub struct PhantomSet {
    pub params: PhantomParams,
    pub seeds: Vec<u64>,
}

impl PhantomSet {
    /// `count` scenes with seeds `base_seed, base_seed + 1, …`.
    pub fn new(params: PhantomParams, base_seed: u64, count: usize) -> Self {
        Self { params, seeds: (0..count as u64).map(|i| base_seed.wrapping_add(i)).collect() }
    }

    pub fn scene(&self, index: usize) -> Result<PhantomScene> {
        generate_named(&self.params, self.seeds[index], &image_id_for(index))
    }
}

impl ImageSource for PhantomSet {
    fn len(&self) -> usize {
        self.seeds.len()
    }

    fn describe(&self, index: usize) -> String {
        format!("{} (seed {})", image_id_for(index), self.seeds[index])
    }

    fn load(&self, index: usize) -> Result<PhaseImage> {
        Ok(self.scene(index)?.image)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::cell_volume;
    use crate::model::{phase_to_density, Region};

    #[test]
    fn empty_noiseless_scene_is_constant() {
        let p = PhantomParams { cell_count: 0, debris_count: 0, noise_sigma_rad: 0.0, ..Default::default() };
        let scene = generate_phantom(&p, 1).unwrap();
        assert!(scene.image.phase().iter().all(|&v| v == p.background_rad));
        assert!(scene.truth.cells.is_empty());
    }

    #[test]
    fn same_seed_same_scene() {
        let p = PhantomParams::default();
        assert_eq!(generate_phantom(&p, 42).unwrap(), generate_phantom(&p, 42).unwrap());
        assert_ne!(generate_phantom(&p, 42).unwrap().image, generate_phantom(&p, 43).unwrap().image);
    }

    #[test]
    fn masks_nest_and_are_disjoint() {
        let p = PhantomParams { blobs_per_cell: (2, 2), ..Default::default() };
        for seed in 0..20 {
            let scene = generate_phantom(&p, seed).unwrap();
            let bodies: Vec<Vec<Pixel>> = scene.truth.cells.iter().map(|c| c.body.pixels()).collect();
            for (i, c) in scene.truth.cells.iter().enumerate() {
                let body = &bodies[i];
                for inner in c.nucleus.iter().chain(&c.blobs) {
                    assert!(inner.pixels().iter().all(|px| body.binary_search(px).is_ok()));
                }
                for other in &bodies[i + 1..] {
                    assert!(other.iter().all(|px| body.binary_search(px).is_err()));
                }
            }
        }
    }

    #[test]
    fn paraboloid_volume_matches_closed_form() {
        let p = PhantomParams {
            cell_count: 1,
            cell_diameter_um: (30.0, 30.0),
            cell_peak_rad: (2.0, 2.0),
            cell_edge_fraction: (0.0, 0.0),
            nucleus: false,
            blobs_per_cell: (0, 0),
            debris_count: 0,
            background_rad: 0.0,
            noise_sigma_rad: 0.0,
            ..Default::default()
        };
        let scene = generate_phantom(&p, 5).unwrap();
        let body = &scene.truth.cells[0].body;
        let region = Region::from_pixels(body.pixels(), p.pixel_size_um).unwrap();
        let r_um = 15.0;
        let expected = PI * r_um * r_um * phase_to_density(2.0, p.wavelength_nm) / 2.0;
        let v = cell_volume(&region, &scene.image);
        assert!((v - expected).abs() / expected < 0.02, "{v} vs {expected}");
    }

    #[test]
    fn overcrowding_is_an_error() {
        let p = PhantomParams {
            cell_count: 40,
            cell_diameter_um: (50.0, 60.0),
            max_attempts: 50,
            ..Default::default()
        };
        assert!(matches!(generate_phantom(&p, 0), Err(Error::Overcrowded { .. })));
    }

    #[test]
    fn wrap_patches_reach_below_minus_pi() {
        let p = PhantomParams { wrap_count: 1, ..Default::default() };
        let scene = generate_phantom(&p, 3).unwrap();
        assert!(scene.image.phase().iter().any(|&v| v <= -PI));
        assert_eq!(scene.truth.artifacts.last().unwrap().kind, ArtifactKind::PhaseWrap);
    }

    #[test]
    fn invalid_size_range() {
        let p = PhantomParams { cell_diameter_um: (4.0, 20.0), ..Default::default() };
        assert!(generate_phantom(&p, 0).is_err());
    }
}
