//! Feature tables and auxiliary run outputs.
//!
//! `features.csv` has one header row and one row per accepted cell. Column
//! names carry units (`_um`, `_um2`, `_um3`, `_rad`, `_px`); ratios and
//! scores are unitless. Flags are written as 0/1 and an absent nucleus
//! leaves the `nucleus_*` fields empty. Reals are written with at most 9
//! significant digits.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::features::FeatureRecord;
use crate::model::{pixel_runs, Pixel};
use crate::pipeline::{ImageResult, PipelineOutput};
use crate::stats::ImageStats;

pub const FEATURE_COLUMNS: [&str; 33] = [
    "image_id",
    "cell_id",
    "threshold_rad",
    "centroid_x_um",
    "centroid_y_um",
    "bbox_x_min_px",
    "bbox_y_min_px",
    "bbox_x_max_px",
    "bbox_y_max_px",
    "diameter_um",
    "area_um2",
    "perimeter_um",
    "circularity",
    "roundness",
    "polygonality",
    "ellipticity",
    "volume_um3",
    "negative_volume_fraction",
    "nucleus_diameter_um",
    "nucleus_area_um2",
    "nucleus_circularity",
    "nucleus_roundness",
    "nucleus_offset_um",
    "nucleus_area_ratio",
    "nucleus_volume_ratio",
    "nucleus_volume_um3",
    "nucleus_internal_count",
    "nucleus_max_density_um",
    "nucleus_mean_density_um",
    "nucleus_candidate_count",
    "border",
    "abnormal_or_aggregate",
    "internal_skipped",
];

/// `v` rounded to 9 significant digits, printed in the shortest form that
/// reads back to the rounded value.
pub fn format_real(v: f64) -> String {
    let rounded: f64 = format!("{v:.8e}").parse().expect("formatted float parses");
    let s = format!("{rounded:?}");
    s.strip_suffix(".0").map(str::to_owned).unwrap_or(s)
}

fn opt(v: Option<f64>) -> String {
    v.map(format_real).unwrap_or_default()
}

fn flag(b: bool) -> String {
    if b { "1" } else { "0" }.to_owned()
}

fn row(r: &FeatureRecord) -> Vec<String> {
    let n = r.nucleus.as_ref();
    vec![
        r.image_id.clone(),
        r.cell_id.clone(),
        format_real(r.threshold_rad),
        format_real(r.centroid_x_um),
        format_real(r.centroid_y_um),
        r.bbox_x_min_px.to_string(),
        r.bbox_y_min_px.to_string(),
        r.bbox_x_max_px.to_string(),
        r.bbox_y_max_px.to_string(),
        format_real(r.diameter_um),
        format_real(r.area_um2),
        format_real(r.perimeter_um),
        opt(r.circularity),
        opt(r.roundness),
        opt(r.polygonality),
        opt(r.ellipticity),
        format_real(r.volume_um3),
        format_real(r.negative_volume_fraction),
        opt(n.map(|n| n.diameter_um)),
        opt(n.map(|n| n.area_um2)),
        opt(n.and_then(|n| n.circularity)),
        opt(n.and_then(|n| n.roundness)),
        opt(n.map(|n| n.offset_um)),
        opt(n.map(|n| n.area_ratio)),
        opt(n.and_then(|n| n.volume_ratio)),
        opt(n.map(|n| n.volume_um3)),
        n.map(|n| n.internal_count.to_string()).unwrap_or_default(),
        opt(n.map(|n| n.max_density_um)),
        opt(n.map(|n| n.mean_density_um)),
        n.map(|n| n.candidate_count.to_string()).unwrap_or_default(),
        flag(r.flags.border),
        flag(r.flags.abnormal_or_aggregate),
        flag(r.flags.internal_skipped),
    ]
}

pub fn write_features_csv<'a, W: Write>(out: W, records: impl IntoIterator<Item = &'a FeatureRecord>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(FEATURE_COLUMNS)?;
    for r in records {
        w.write_record(row(r))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_features_jsonl<'a, W: Write>(
    mut out: W,
    records: impl IntoIterator<Item = &'a FeatureRecord>,
) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Per-image statistics with the artifact-filter outcome (`kept` or the reason).
pub fn write_stats_csv<W: Write>(out: W, output: &PipelineOutput) -> Result<()> {
    let m = &output.manifest;
    let mut rows: Vec<(&ImageStats, String)> =
        m.measurement.per_image.iter().map(|s| (s, "kept".to_owned())).collect();
    for f in &m.filtered {
        rows.push((&f.stats, f.reason.as_str().to_owned()));
    }
    rows.sort_by(|a, b| a.0.image_id.cmp(&b.0.image_id));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["image_id", "phase_min_rad", "phase_max_rad", "phase_mean_rad", "background_rad", "status"])?;
    for (s, status) in rows {
        w.write_record([
            s.image_id.clone(),
            format_real(s.phase_min),
            format_real(s.phase_max),
            format_real(s.phase_mean),
            format_real(s.background),
            status,
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Pixel sets of one cell as horizontal runs `[y, x_start, x_end]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRegions {
    pub image_id: String,
    pub cell_id: String,
    pub cell: Vec<[u32; 3]>,
    /// Absent when internal detection did not run for the cell.
    pub internal: Option<InternalRegions>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InternalRegions {
    pub structures: Vec<Vec<[u32; 3]>>,
    pub nucleus: Option<Vec<[u32; 3]>>,
}

fn runs(p: &[Pixel]) -> Vec<[u32; 3]> {
    pixel_runs(p)
}

pub fn cell_regions(image: &ImageResult) -> Vec<CellRegions> {
    image
        .cells
        .iter()
        .map(|c| CellRegions {
            image_id: image.image_id.clone(),
            cell_id: c.record.cell_id.clone(),
            cell: runs(c.region.pixels()),
            internal: c.internal.as_ref().map(|(structures, n)| InternalRegions {
                structures: structures.iter().map(|s| runs(s.region.pixels())).collect(),
                nucleus: n.nucleus.as_ref().map(|s| runs(s.region.pixels())),
            }),
        })
        .collect()
}

pub fn write_regions_jsonl<W: Write>(mut out: W, output: &PipelineOutput) -> Result<()> {
    for image in &output.images {
        for c in cell_regions(image) {
            serde_json::to_writer(&mut out, &c)?;
            out.write_all(b"\n")?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_regions_jsonl(text: &str) -> Result<Vec<CellRegions>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| Ok(serde_json::from_str(l)?))
        .collect()
}

/// Plausibility rejects, filtered images and load failures, one per line.
pub fn write_diagnostics<W: Write>(mut out: W, output: &PipelineOutput) -> Result<()> {
    let m = &output.manifest;
    for f in &m.load_failures {
        writeln!(out, "load_failure\t{}\t{}", f.input, f.error)?;
    }
    for f in &m.filtered {
        writeln!(out, "filtered_image\t{}\t{}", f.stats.image_id, f.reason.as_str())?;
    }
    for image in &output.images {
        for r in &image.rejects {
            writeln!(
                out,
                "rejected\t{}\tx={} y={} bbox={}..{}x{}..{} area_px={}\t{}",
                image.image_id,
                r.top_left.x,
                r.top_left.y,
                r.bbox.x_min,
                r.bbox.x_max,
                r.bbox.y_min,
                r.bbox.y_max,
                r.area_px,
                r.reason.as_str()
            )?;
        }
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::CellFlags;

    fn record(nucleus: bool) -> FeatureRecord {
        use crate::features::NucleusFeatures;
        FeatureRecord {
            image_id: "img,1".into(),
            cell_id: "img,1#0".into(),
            threshold_rad: 0.1,
            centroid_x_um: 12.345678912345,
            centroid_y_um: 3.0,
            bbox_x_min_px: 1,
            bbox_y_min_px: 2,
            bbox_x_max_px: 30,
            bbox_y_max_px: 40,
            diameter_um: 20.0,
            area_um2: 300.25,
            perimeter_um: 70.1,
            circularity: Some(0.91),
            roundness: None,
            polygonality: Some(0.97),
            ellipticity: Some(0.95),
            volume_um3: 1.0e-12,
            negative_volume_fraction: 0.0,
            nucleus: nucleus.then_some(NucleusFeatures {
                diameter_um: 5.0,
                area_um2: 20.0,
                circularity: Some(0.9),
                roundness: Some(0.8),
                offset_um: 0.5,
                area_ratio: 0.07,
                volume_ratio: Some(0.2),
                volume_um3: 4.0,
                internal_count: 0,
                max_density_um: 0.1,
                mean_density_um: 0.08,
                candidate_count: 1,
            }),
            flags: CellFlags { border: true, abnormal_or_aggregate: false, internal_skipped: !nucleus },
        }
    }

    #[test]
    fn header_only_for_zero_cells() {
        let mut buf = Vec::new();
        write_features_csv(&mut buf, []).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert_eq!(text.trim_end(), FEATURE_COLUMNS.join(","));
    }

    #[test]
    fn one_row_per_cell() {
        let recs = [record(true), record(false)];
        let mut buf = Vec::new();
        write_features_csv(&mut buf, &recs).unwrap();
        let mut rd = csv::Reader::from_reader(buf.as_slice());
        let rows: Vec<csv::StringRecord> = rd.records().map(|r| r.unwrap()).collect();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.len() == FEATURE_COLUMNS.len()));
        assert_eq!(&rows[0][0], "img,1");
        let col = |name: &str| FEATURE_COLUMNS.iter().position(|c| *c == name).unwrap();
        assert_eq!(&rows[1][col("nucleus_area_um2")], "");
        assert_eq!(&rows[0][col("nucleus_area_um2")], "20");
        assert_eq!(&rows[0][col("border")], "1");
        assert_eq!(&rows[0][col("roundness")], "");
    }

    #[test]
    fn nine_significant_digits_round_trip() {
        for v in [12.345678912345, 1.0e-12, 123456789.0, -0.000123456789012, 0.1 + 0.2, 7.0] {
            let s = format_real(v);
            let back: f64 = s.parse().unwrap();
            assert!((back - v).abs() <= v.abs() * 5e-9, "{v} -> {s}");
            let digits = s.trim_start_matches('-').split('e').next().unwrap().replace('.', "");
            assert!(digits.trim_start_matches('0').len() <= 9, "{s}");
            assert_eq!(format_real(back), s);
        }
    }

    #[test]
    fn jsonl_round_trip() {
        let recs = [record(true), record(false)];
        let mut buf = Vec::new();
        write_features_jsonl(&mut buf, &recs).unwrap();
        let back: Vec<FeatureRecord> =
            String::from_utf8(buf).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(back, recs);
    }
}
