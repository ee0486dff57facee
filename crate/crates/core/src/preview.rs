//! 8-bit PNG previews with fixed tone maps. Float data is always written as PFM;
//! these files are for looking at only.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{Grid, Mask};
use crate::scene::Vec3;

fn write_png(path: &Path, width: usize, height: usize, color: png::ColorType, data: &[u8]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut encoder = png::Encoder::new(BufWriter::new(file), width as u32, height as u32);
    encoder.set_color(color);
    encoder.set_depth(png::BitDepth::Eight);
    let to_io = |e: png::EncodingError| Error::io(path, std::io::Error::other(e));
    encoder
        .write_header()
        .map_err(to_io)?
        .write_image_data(data)
        .map_err(to_io)
}

fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Radiance scaled by the masked maximum, gamma 1/2.2.
pub fn write_radiance(path: &Path, image: &Grid<f64>, mask: &Mask) -> Result<()> {
    let peak = image
        .as_slice()
        .iter()
        .zip(mask.as_slice())
        .filter(|(_, &m)| m)
        .map(|(v, _)| *v)
        .fold(0.0, f64::max);
    let scale = if peak > 0.0 { 1.0 / peak } else { 0.0 };
    let data: Vec<u8> = image
        .as_slice()
        .iter()
        .map(|v| quantize((v * scale).max(0.0).powf(1.0 / 2.2)))
        .collect();
    write_png(path, image.width(), image.height(), png::ColorType::Grayscale, &data)
}

/// Normals mapped from `[-1, 1]` to `[0, 255]` per channel; unmasked pixels are black.
pub fn write_normals(path: &Path, normals: &Grid<Vec3>, mask: &Mask) -> Result<()> {
    let data: Vec<u8> = normals
        .as_slice()
        .iter()
        .zip(mask.as_slice())
        .flat_map(|(n, &m)| {
            if m {
                [quantize(0.5 * (n.x + 1.0)), quantize(0.5 * (n.y + 1.0)), quantize(0.5 * (n.z + 1.0))]
            } else {
                [0, 0, 0]
            }
        })
        .collect();
    write_png(path, normals.width(), normals.height(), png::ColorType::Rgb, &data)
}

/// Angular error in degrees, saturating at `max_deg`.
pub fn write_error_map(path: &Path, errors: &Grid<f64>, max_deg: f64) -> Result<()> {
    let data: Vec<u8> = errors.as_slice().iter().map(|e| quantize(e / max_deg)).collect();
    write_png(path, errors.width(), errors.height(), png::ColorType::Grayscale, &data)
}
