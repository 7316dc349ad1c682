//! Second pass: global threshold, 8-connected labelling and candidate regions.

use crate::error::Result;
use crate::model::{PhaseImage, Pixel, Region};

/// Row-major foreground mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Self {
        assert_eq!(data.len(), width * height, "mask size");
        Self { width, height, data }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }
}

/// Foreground iff φ ≥ t.
pub fn binarize(img: &PhaseImage, t: f64) -> BinaryMask {
    BinaryMask {
        width: img.width(),
        height: img.height(),
        data: img.phase().iter().map(|&v| v >= t).collect(),
    }
}

struct DisjointSet {
    parent: Vec<u32>,
}

impl DisjointSet {
    fn make(&mut self) -> u32 {
        let id = self.parent.len() as u32;
        self.parent.push(id);
        id
    }

    fn find(&mut self, mut a: u32) -> u32 {
        while self.parent[a as usize] != a {
            let grand = self.parent[self.parent[a as usize] as usize];
            self.parent[a as usize] = grand;
            a = grand;
        }
        a
    }

    fn union(&mut self, a: u32, b: u32) -> u32 {
        let (ra, rb) = (self.find(a), self.find(b));
        // keep the older label as root so roots follow scan order
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent[hi as usize] = lo;
        lo
    }
}

/// Maximal 8-connected foreground components, each in row-major pixel order,
/// listed by their topmost-then-leftmost pixel.
pub fn connected_components(mask: &BinaryMask) -> Vec<Vec<Pixel>> {
    let (w, h) = (mask.width, mask.height);
    const NONE: u32 = u32::MAX;
    let mut labels = vec![NONE; w * h];
    let mut sets = DisjointSet { parent: Vec::new() };

    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if !mask.data[i] {
                continue;
            }
            let mut label = NONE;
            // already-visited neighbours: W, NW, N, NE
            let mut visit = |j: usize| {
                let l = labels[j];
                if l != NONE {
                    label = if label == NONE { l } else { sets.union(label, l) };
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if y > 0 {
                if x > 0 {
                    visit(i - w - 1);
                }
                visit(i - w);
                if x + 1 < w {
                    visit(i - w + 1);
                }
            }
            labels[i] = if label == NONE { sets.make() } else { label };
        }
    }

    let mut slot = vec![NONE; sets.parent.len()];
    let mut out: Vec<Vec<Pixel>> = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let l = labels[y * w + x];
            if l == NONE {
                continue;
            }
            let root = sets.find(l) as usize;
            if slot[root] == NONE {
                slot[root] = out.len() as u32;
                out.push(Vec::new());
            }
            out[slot[root] as usize].push(Pixel::new(x as u32, y as u32));
        }
    }
    out
}

/// A thresholded component awaiting plausibility checks.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub region: Region,
    /// Touches the image border, so its geometry may be clipped.
    pub border: bool,
}

pub fn detect_candidates(img: &PhaseImage, t: f64) -> Result<Vec<Candidate>> {
    let mask = binarize(img, t);
    connected_components(&mask)
        .into_iter()
        .map(|pixels| {
            let region = Region::from_sorted(pixels, img.pixel_size_um())?;
            let border = region.touches_border(img.width(), img.height());
            Ok(Candidate { region, border })
        })
        .collect()
}
