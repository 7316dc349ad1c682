//! Throughput measurement over repeated pipeline runs.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Config;
use crate::pipeline::{run_pipeline, ImageSource};

/// Reference figures: mean analysis time per image and per cell.
pub const REFERENCE_PER_IMAGE_S: f64 = 0.3;
pub const REFERENCE_PER_CELL_S: f64 = 0.113;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MachineInfo {
    pub os: String,
    pub arch: String,
    pub logical_cpus: usize,
    pub cpu_model: Option<String>,
}

impl MachineInfo {
    pub fn detect() -> Self {
        let cpu_model = std::fs::read_to_string("/proc/cpuinfo").ok().and_then(|s| {
            s.lines()
                .find(|l| l.starts_with("model name"))
                .and_then(|l| l.split_once(':'))
                .map(|(_, v)| v.trim().to_owned())
        });
        Self {
            os: std::env::consts::OS.to_owned(),
            arch: std::env::consts::ARCH.to_owned(),
            logical_cpus: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
            cpu_model,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub images: usize,
    pub cells: usize,
    pub workers: usize,
    pub repetitions: usize,
    /// Wall time of each timed repetition.
    pub run_s: Vec<f64>,
    pub per_image_s: f64,
    /// Absent for a measurement without cells.
    pub per_cell_s: Option<f64>,
    pub reference_per_image_s: f64,
    pub reference_per_cell_s: f64,
    pub machine: MachineInfo,
}

/// One untimed warm-up run, then `repetitions` timed runs (at least 3).
pub fn benchmark<S: ImageSource + ?Sized>(source: &S, cfg: &Config, workers: usize, repetitions: usize) -> Result<BenchReport> {
    if repetitions < 3 {
        return Err(Error::InvalidConfig("benchmark needs at least 3 repetitions".into()));
    }
    let warm = run_pipeline(source, cfg, workers)?;
    let images = warm.manifest.counts.loaded_images;
    let cells = warm.manifest.counts.cells;
    let mut run_s = Vec::with_capacity(repetitions);
    for _ in 0..repetitions {
        let out = run_pipeline(source, cfg, workers)?;
        run_s.push(out.manifest.timings.total_s);
    }
    let mean = run_s.iter().sum::<f64>() / repetitions as f64;
    Ok(BenchReport {
        images,
        cells,
        workers,
        repetitions,
        per_image_s: mean / images as f64,
        per_cell_s: (cells > 0).then(|| mean / cells as f64),
        run_s,
        reference_per_image_s: REFERENCE_PER_IMAGE_S,
        reference_per_cell_s: REFERENCE_PER_CELL_S,
        machine: MachineInfo::detect(),
    })
}

impl fmt::Display for BenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "images {}, cells {}, workers {}, repetitions {}", self.images, self.cells, self.workers, self.repetitions)?;
        writeln!(f, "per image: {:.4} s (reference {} s)", self.per_image_s, self.reference_per_image_s)?;
        match self.per_cell_s {
            Some(c) => writeln!(f, "per cell:  {:.4} s (reference {} s)", c, self.reference_per_cell_s)?,
            None => writeln!(f, "per cell:  n/a (reference {} s)", self.reference_per_cell_s)?,
        }
        write!(
            f,
            "machine: {} {} x{} {}",
            self.machine.os,
            self.machine.arch,
            self.machine.logical_cpus,
            self.machine.cpu_model.as_deref().unwrap_or("unknown cpu")
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PhaseImage;

    #[test]
    fn no_cells_gives_no_per_cell_time() {
        let imgs: Vec<PhaseImage> =
            (0..2).map(|i| PhaseImage::new(format!("e{i}"), 16, 16, vec![0.05; 256], 1.0, 528.0).unwrap()).collect();
        let r = benchmark(imgs.as_slice(), &Config::default(), 1, 3).unwrap();
        assert_eq!(r.per_cell_s, None);
        assert_eq!(r.run_s.len(), 3);
        assert!(r.to_string().contains("n/a"));
    }

    #[test]
    fn too_few_repetitions() {
        let imgs = vec![PhaseImage::new("e", 4, 4, vec![0.05; 16], 1.0, 528.0).unwrap()];
        assert!(benchmark(imgs.as_slice(), &Config::default(), 1, 2).is_err());
    }
}
