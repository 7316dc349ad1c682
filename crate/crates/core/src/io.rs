//! Phase image files.
//!
//! Two formats are read:
//!
//! * single-channel 32- or 64-bit floating-point TIFF, samples in radians;
//! * raw little-endian grids (`<id>.raw`) described by a JSON sidecar
//!   (`<id>.json`) with `width`, `height`, `dtype` (`"f32"` or `"f64"`),
//!   `pixel_size_um`, `wavelength_nm` and `endianness` (`"little"`).
//!
//! TIFF files carry no calibration, so it must come from [`Calibration`];
//! for raw files the calibration overrides the header.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tiff::decoder::{Decoder, DecodingResult};
use tiff::encoder::{colortype, TiffEncoder};
use tiff::ColorType;

use crate::error::{Error, Result};
use crate::model::PhaseImage;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Calibration {
    pub pixel_size_um: Option<f64>,
    pub wavelength_nm: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RawDtype {
    F32,
    F64,
}

impl RawDtype {
    fn size(self) -> usize {
        match self {
            RawDtype::F32 => 4,
            RawDtype::F64 => 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawHeader {
    pub width: usize,
    pub height: usize,
    pub dtype: RawDtype,
    #[serde(default)]
    pub pixel_size_um: Option<f64>,
    #[serde(default)]
    pub wavelength_nm: Option<f64>,
    #[serde(default = "little")]
    pub endianness: String,
}

fn little() -> String {
    "little".to_owned()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    Tiff,
    Raw,
}

pub fn detect_format(path: &Path) -> Option<ImageFormat> {
    let ext = path.extension()?.to_str()?.to_ascii_lowercase();
    match ext.as_str() {
        "tif" | "tiff" => Some(ImageFormat::Tiff),
        "raw" => Some(ImageFormat::Raw),
        _ => None,
    }
}

/// Image id: the file name without extension.
pub fn image_id(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Supported image files in `dir`, sorted by file name.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && detect_format(p).is_some())
        .collect();
    paths.sort();
    Ok(paths)
}

fn load_err(path: &Path, msg: impl Into<String>) -> Error {
    Error::Load { path: path.to_owned(), msg: msg.into() }
}

fn resolve(path: &Path, flag: Option<f64>, header: Option<f64>, what: &str) -> Result<f64> {
    flag.or(header).ok_or_else(|| load_err(path, format!("no {what} in header or flags")))
}

pub fn load_image(path: &Path, cal: Calibration) -> Result<PhaseImage> {
    match detect_format(path) {
        Some(ImageFormat::Tiff) => load_tiff(path, cal),
        Some(ImageFormat::Raw) => load_raw(path, cal),
        None => Err(Error::UnsupportedFormat(path.to_owned())),
    }
}

fn load_tiff(path: &Path, cal: Calibration) -> Result<PhaseImage> {
    let mut dec = Decoder::new(BufReader::new(File::open(path)?))?;
    let (w, h) = dec.dimensions()?;
    let phase: Vec<f64> = match (dec.colortype()?, dec.read_image()?) {
        (ColorType::Gray(32), DecodingResult::F32(v)) => v.into_iter().map(f64::from).collect(),
        (ColorType::Gray(64), DecodingResult::F64(v)) => v,
        (ct, _) => return Err(load_err(path, format!("expected single-channel float TIFF, got {ct:?}"))),
    };
    let s = resolve(path, cal.pixel_size_um, None, "pixel size")?;
    let l = resolve(path, cal.wavelength_nm, None, "wavelength")?;
    PhaseImage::new(image_id(path), w as usize, h as usize, phase, s, l)
        .map_err(|e| load_err(path, e.to_string()))
}

pub fn read_raw_header(raw_path: &Path) -> Result<RawHeader> {
    let header_path = raw_path.with_extension("json");
    let text = fs::read_to_string(&header_path).map_err(|e| load_err(&header_path, e.to_string()))?;
    let header: RawHeader = serde_json::from_str(&text).map_err(|e| load_err(&header_path, e.to_string()))?;
    if header.endianness != "little" {
        return Err(load_err(&header_path, format!("unsupported endianness '{}'", header.endianness)));
    }
    Ok(header)
}

fn load_raw(path: &Path, cal: Calibration) -> Result<PhaseImage> {
    let header = read_raw_header(path)?;
    let bytes = fs::read(path)?;
    let expected = header.width * header.height * header.dtype.size();
    if bytes.len() != expected {
        return Err(load_err(
            path,
            format!("{} bytes, header {}x{} {:?} needs {expected}", bytes.len(), header.width, header.height, header.dtype),
        ));
    }
    let phase: Vec<f64> = match header.dtype {
        RawDtype::F32 => bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
            .collect(),
        RawDtype::F64 => bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect(),
    };
    let s = resolve(path, cal.pixel_size_um, header.pixel_size_um, "pixel size")?;
    let l = resolve(path, cal.wavelength_nm, header.wavelength_nm, "wavelength")?;
    PhaseImage::new(image_id(path), header.width, header.height, phase, s, l)
        .map_err(|e| load_err(path, e.to_string()))
}

/// Writes `<dir>/<id>.raw` and its JSON sidecar; returns the `.raw` path.
pub fn write_raw(img: &PhaseImage, dir: &Path, dtype: RawDtype) -> Result<PathBuf> {
    let raw_path = dir.join(format!("{}.raw", img.id()));
    let header = RawHeader {
        width: img.width(),
        height: img.height(),
        dtype,
        pixel_size_um: Some(img.pixel_size_um()),
        wavelength_nm: Some(img.wavelength_nm()),
        endianness: little(),
    };
    fs::write(raw_path.with_extension("json"), serde_json::to_string_pretty(&header)?)?;
    let mut out = BufWriter::new(File::create(&raw_path)?);
    for &v in img.phase() {
        match dtype {
            RawDtype::F32 => out.write_all(&(v as f32).to_le_bytes())?,
            RawDtype::F64 => out.write_all(&v.to_le_bytes())?,
        }
    }
    out.flush()?;
    Ok(raw_path)
}

/// Writes a single-channel 32-bit float TIFF.
pub fn write_tiff(img: &PhaseImage, path: &Path) -> Result<()> {
    let data: Vec<f32> = img.phase().iter().map(|&v| v as f32).collect();
    let mut enc = TiffEncoder::new(BufWriter::new(File::create(path)?))?;
    enc.write_image::<colortype::Gray32Float>(img.width() as u32, img.height() as u32, &data)?;
    Ok(())
}
