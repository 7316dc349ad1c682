//! PNG overlays for visual inspection of a segmented image.

use std::path::Path;

use image::{Rgb, RgbImage};

use crate::error::Result;
use crate::model::{PhaseImage, Region};
use crate::pipeline::CellResult;

pub const BBOX_COLOR: Rgb<u8> = Rgb([255, 210, 0]);
pub const CIRCLE_COLOR: Rgb<u8> = Rgb([0, 200, 255]);
pub const CONTOUR_COLOR: Rgb<u8> = Rgb([0, 230, 60]);
pub const NUCLEUS_COLOR: Rgb<u8> = Rgb([255, 40, 40]);

fn put(out: &mut RgbImage, x: i64, y: i64, c: Rgb<u8>) {
    if x >= 0 && y >= 0 && (x as u32) < out.width() && (y as u32) < out.height() {
        out.put_pixel(x as u32, y as u32, c);
    }
}

/// Phase mapped linearly from its minimum (black) to its maximum (white).
pub fn grayscale(img: &PhaseImage) -> RgbImage {
    let (lo, hi) = img.phase().iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = hi - lo;
    RgbImage::from_fn(img.width() as u32, img.height() as u32, |x, y| {
        let v = if span > 0.0 { (img.at(x as usize, y as usize) - lo) / span } else { 0.0 };
        let g = (v * 255.0).round() as u8;
        Rgb([g, g, g])
    })
}

fn draw_bbox(out: &mut RgbImage, r: &Region) {
    let b = r.bbox();
    let (x0, y0, x1, y1) = (b.x_min as i64 - 1, b.y_min as i64 - 1, b.x_max as i64 + 1, b.y_max as i64 + 1);
    for x in x0..=x1 {
        put(out, x, y0, BBOX_COLOR);
        put(out, x, y1, BBOX_COLOR);
    }
    for y in y0..=y1 {
        put(out, x0, y, BBOX_COLOR);
        put(out, x1, y, BBOX_COLOR);
    }
}

fn draw_circle(out: &mut RgbImage, r: &Region) {
    let s = r.pixel_size_um();
    let c = r.enclosing_circle();
    let (cx, cy, rad) = (c.center.x / s, c.center.y / s, c.radius / s);
    let steps = ((2.0 * std::f64::consts::PI * rad).ceil() as usize * 2).max(16);
    for k in 0..steps {
        let a = k as f64 / steps as f64 * std::f64::consts::TAU;
        put(out, (cx + rad * a.cos()).round() as i64, (cy + rad * a.sin()).round() as i64, CIRCLE_COLOR);
    }
}

fn draw_contour(out: &mut RgbImage, r: &Region, color: Rgb<u8>) {
    for p in r.boundary() {
        put(out, p.x as i64, p.y as i64, color);
    }
}

/// Grayscale phase with each cell's bounding box (drawn one pixel outside
/// the box), enclosing circle, contour and nucleus contour.
pub fn render_overlay(img: &PhaseImage, cells: &[CellResult]) -> RgbImage {
    let mut out = grayscale(img);
    for c in cells {
        draw_bbox(&mut out, &c.region);
        draw_circle(&mut out, &c.region);
        draw_contour(&mut out, &c.region, CONTOUR_COLOR);
        if let Some(n) = c.internal.as_ref().and_then(|(_, n)| n.nucleus.as_ref()) {
            draw_contour(&mut out, &n.region, NUCLEUS_COLOR);
        }
    }
    out
}

pub fn save_overlay(img: &PhaseImage, cells: &[CellResult], path: &Path) -> Result<()> {
    render_overlay(img, cells).save(path)?;
    Ok(())
}
