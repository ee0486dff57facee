//! Portable float map (PFM) images.
//!
//! `Pf` is single-channel and `PF` is three-channel. A negative scale in the
//! header marks little-endian samples and a positive one big-endian. Rows are
//! stored bottom to top; in memory [`PfmImage`] keeps them top to bottom.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{Grid, Mask};
use crate::scene::Vec3;

#[derive(Debug, Clone, PartialEq)]
pub struct PfmImage {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    /// Interleaved samples, top row first.
    pub data: Vec<f32>,
}

impl PfmImage {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::Pfm(format!("{channels} channels; only 1 or 3 are supported")));
        }
        if data.len() != width * height * channels {
            return Err(Error::Pfm(format!(
                "{} samples for {width}x{height}x{channels}",
                data.len()
            )));
        }
        Ok(PfmImage {
            width,
            height,
            channels,
            data,
        })
    }

    /// Little-endian encoding.
    pub fn encode(&self) -> Vec<u8> {
        let tag = if self.channels == 3 { "PF" } else { "Pf" };
        let mut out = format!("{tag}\n{} {}\n-1.0\n", self.width, self.height).into_bytes();
        let row = self.width * self.channels;
        out.reserve(self.data.len() * 4);
        for y in (0..self.height).rev() {
            for v in &self.data[y * row..(y + 1) * row] {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut pos = 0;
        let mut token = || -> Result<&str> {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(Error::Pfm("truncated header".into()));
            }
            std::str::from_utf8(&bytes[start..pos]).map_err(|_| Error::Pfm("header is not ASCII".into()))
        };
        let channels = match token()? {
            "Pf" => 1,
            "PF" => 3,
            other => return Err(Error::Pfm(format!("unknown magic {other:?}"))),
        };
        let parse_dim = |s: &str| {
            s.parse::<usize>()
                .ok()
                .filter(|&v| v > 0)
                .ok_or_else(|| Error::Pfm(format!("bad dimension {s:?}")))
        };
        let width = parse_dim(token()?)?;
        let height = parse_dim(token()?)?;
        let scale_tok = token()?;
        let scale: f64 = scale_tok
            .parse()
            .map_err(|_| Error::Pfm(format!("bad scale {scale_tok:?}")))?;
        if scale == 0.0 || !scale.is_finite() {
            return Err(Error::Pfm(format!("bad scale {scale_tok:?}")));
        }
        // Exactly one whitespace byte separates the header from the samples.
        pos += 1;
        let little = scale < 0.0;
        let count = width
            .checked_mul(height)
            .and_then(|v| v.checked_mul(channels))
            .ok_or_else(|| Error::Pfm("image too large".into()))?;
        let body = bytes.get(pos..).unwrap_or(&[]);
        if body.len() != count * 4 {
            return Err(Error::Pfm(format!(
                "expected {} data bytes, found {}",
                count * 4,
                body.len()
            )));
        }
        let row = width * channels;
        let mut data = vec![0f32; count];
        for (file_row, chunk) in body.chunks_exact(row * 4).enumerate() {
            let y = height - 1 - file_row;
            for (i, b) in chunk.chunks_exact(4).enumerate() {
                let raw = [b[0], b[1], b[2], b[3]];
                data[y * row + i] = if little {
                    f32::from_le_bytes(raw)
                } else {
                    f32::from_be_bytes(raw)
                };
            }
        }
        PfmImage::new(width, height, channels, data)
    }
}

pub fn write_pfm(path: &Path, image: &PfmImage) -> Result<()> {
    fs::write(path, image.encode()).map_err(|e| Error::io(path, e))
}

pub fn read_pfm(path: &Path) -> Result<PfmImage> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    PfmImage::decode(&bytes)
}

pub fn from_scalar(grid: &Grid<f64>) -> PfmImage {
    PfmImage {
        width: grid.width(),
        height: grid.height(),
        channels: 1,
        data: grid.as_slice().iter().map(|&v| v as f32).collect(),
    }
}

pub fn to_scalar(image: &PfmImage) -> Result<Grid<f64>> {
    if image.channels != 1 {
        return Err(Error::Pfm("expected a single-channel image".into()));
    }
    Grid::from_vec(image.width, image.height, image.data.iter().map(|&v| v as f64).collect())
}

pub fn from_normals(grid: &Grid<Vec3>) -> PfmImage {
    PfmImage {
        width: grid.width(),
        height: grid.height(),
        channels: 3,
        data: grid
            .as_slice()
            .iter()
            .flat_map(|n| [n.x as f32, n.y as f32, n.z as f32])
            .collect(),
    }
}

pub fn to_normals(image: &PfmImage) -> Result<Grid<Vec3>> {
    if image.channels != 3 {
        return Err(Error::Pfm("expected a three-channel image".into()));
    }
    let values = image
        .data
        .chunks_exact(3)
        .map(|c| Vec3::new(c[0] as f64, c[1] as f64, c[2] as f64))
        .collect();
    Grid::from_vec(image.width, image.height, values)
}

/// Masks are stored as 0/1 single-channel images; any positive sample is inside.
pub fn from_mask(mask: &Mask) -> PfmImage {
    from_scalar(&mask.map(|&m| if m { 1.0 } else { 0.0 }))
}

pub fn to_mask(image: &PfmImage) -> Result<Mask> {
    Ok(to_scalar(image)?.map(|&v| v > 0.0))
}

pub fn write_scalar(path: &Path, grid: &Grid<f64>) -> Result<()> {
    write_pfm(path, &from_scalar(grid))
}

pub fn read_scalar(path: &Path) -> Result<Grid<f64>> {
    to_scalar(&read_pfm(path)?)
}

pub fn write_normals(path: &Path, grid: &Grid<Vec3>) -> Result<()> {
    write_pfm(path, &from_normals(grid))
}

pub fn read_normals(path: &Path) -> Result<Grid<Vec3>> {
    to_normals(&read_pfm(path)?)
}

pub fn write_mask(path: &Path, mask: &Mask) -> Result<()> {
    write_pfm(path, &from_mask(mask))
}

pub fn read_mask(path: &Path) -> Result<Mask> {
    to_mask(&read_pfm(path)?)
}
