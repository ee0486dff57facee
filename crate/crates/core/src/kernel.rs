//! The shape-dependent surface-to-camera forward-scatter operator.
//!
//! Row `p` of `K` maps reflected radiance at every surface point `q` to the
//! radiance observed at pixel `p`: the diagonal is the attenuation
//! `exp(-T_vp)`, and off-diagonal entries treat the facet at `q` as a virtual
//! point source whose light scatters into the viewing ray of `p`.
//!
//! `K` is dense, so it is truncated to an `r × r` window around each pixel. The
//! truncated entries settle to a small positive value; their contribution is
//! folded into a single unknown `C = ε·Σ L_s` solved alongside `L_s`:
//!
//! ```text
//! [ L' ]   [ K̂     1 ] [ L_s ]
//! [ 0  ] = [ ε·1ᵀ  -1 ] [ C   ]
//! ```

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{Grid, MaskIndex};
use crate::render::{airlight, clamp_dvp_prime};
use crate::scene::{angle_between, clamp_gamma, Camera, Medium, Scene, Vec3};
use crate::tables::TableF;

/// Facets seen at `v·n` below this are dropped from the forward-scatter sum.
pub const GRAZING_FLOOR: f64 = 0.05;

/// Largest masked-pixel count for which a dense kernel is materialized.
pub const DENSE_LIMIT: usize = 4096;

/// Per-pixel surface quantities shared by every kernel entry.
#[derive(Debug, Clone, Copy)]
pub struct SurfaceSample {
    pub point: Vec3,
    /// Unit direction from the camera to `point`.
    pub ray: Vec3,
    pub distance: f64,
    pub normal: Vec3,
    /// Area of the facet seen through the pixel, `d²·Ω / (v·n)`, or 0 for grazing facets.
    pub footprint: f64,
}

pub fn surface_samples(scene: &Scene, camera: &Camera, index: &MaskIndex) -> Vec<SurfaceSample> {
    index
        .pixels()
        .iter()
        .map(|&(x, y)| {
            let point = scene.point(camera, x, y);
            let distance = point.norm();
            let ray = point / distance;
            let normal = *scene.normals.get(x, y);
            let cos = -ray.dot(&normal);
            let footprint = if cos < GRAZING_FLOOR {
                0.0
            } else {
                distance * distance * camera.pixel_solid_angle(x, y) / cos
            };
            SurfaceSample {
                point,
                ray,
                distance,
                normal,
                footprint,
            }
        })
        .collect()
}

/// Off-diagonal kernel coefficient: radiance scattered into the ray of `p` per
/// unit reflected radiance at `q`.
#[inline]
pub fn pair_coefficient(p: &SurfaceSample, q: &SurfaceSample, medium: &Medium, table: &TableF) -> f64 {
    if q.footprint == 0.0 || medium.scattering() == 0.0 {
        return 0.0;
    }
    let gamma = clamp_gamma(angle_between(&p.ray, &q.ray));
    let d_upper = clamp_dvp_prime(&p.ray, p.distance, &q.point, &q.normal);
    q.footprint
        * airlight(
            table,
            medium,
            medium.optical_thickness(q.distance),
            gamma,
            medium.optical_thickness(d_upper),
        )
}

#[inline]
fn diagonal(sample: &SurfaceSample, medium: &Medium) -> f64 {
    (-medium.optical_thickness(sample.distance)).exp()
}

/// Single entry `K_pq` for masked pixels `p` and `q`.
pub fn kernel_entry(
    p: (usize, usize),
    q: (usize, usize),
    scene: &Scene,
    camera: &Camera,
    medium: &Medium,
    table: &TableF,
) -> Result<f64> {
    if !*scene.mask.get(p.0, p.1) || !*scene.mask.get(q.0, q.1) {
        return Err(Error::Geometry("kernel entries are defined on masked pixels only".into()));
    }
    let sample = |(x, y): (usize, usize)| {
        let index = MaskIndex::new(&single_pixel_mask(scene, x, y));
        surface_samples(scene, camera, &index)[0]
    };
    let sp = sample(p);
    if p == q {
        return Ok(diagonal(&sp, medium));
    }
    let sq = sample(q);
    if sq.footprint == 0.0 {
        log::warn!("grazing facet at {q:?} contributes no forward scatter");
    }
    Ok(pair_coefficient(&sp, &sq, medium, table))
}

fn single_pixel_mask(scene: &Scene, x: usize, y: usize) -> Grid<bool> {
    let mut m = Grid::filled(scene.mask.width(), scene.mask.height(), false);
    m.set(x, y, true);
    m
}

/// Row-compressed truncation of `K` to `r × r` windows, with the attenuation
/// diagonal stored separately.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseKernel {
    index: MaskIndex,
    support: usize,
    diagonal: Vec<f64>,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
    epsilon: f64,
}

impl SparseKernel {
    /// Builds rows for every masked pixel from the current shape estimate.
    ///
    /// `support` is the odd window side `r`; `r = 1` keeps only the diagonal.
    /// `ε` is the smallest stored off-diagonal entry, or 0 when none is stored.
    pub fn build(
        scene: &Scene,
        camera: &Camera,
        medium: &Medium,
        table: &TableF,
        support: usize,
    ) -> Result<Self> {
        if support % 2 == 0 {
            return Err(Error::InvalidParameter(format!("kernel support {support} must be odd")));
        }
        if scene.mask.dims() != (camera.width, camera.height) {
            return Err(Error::Dimension("scene does not match the camera".into()));
        }
        let index = MaskIndex::new(&scene.mask);
        let samples = surface_samples(scene, camera, &index);
        let half = (support / 2) as isize;
        let (w, h) = (camera.width as isize, camera.height as isize);

        let rows: Vec<Vec<(u32, f64)>> = (0..index.len())
            .into_par_iter()
            .map(|p| {
                let (px, py) = index.pixel(p);
                let (px, py) = (px as isize, py as isize);
                let mut row = Vec::new();
                for qy in (py - half).max(0)..=(py + half).min(h - 1) {
                    for qx in (px - half).max(0)..=(px + half).min(w - 1) {
                        let Some(q) = index.index_of(qx as usize, qy as usize) else {
                            continue;
                        };
                        if q == p {
                            continue;
                        }
                        let k = pair_coefficient(&samples[p], &samples[q], medium, table);
                        if k > 0.0 {
                            row.push((q as u32, k));
                        }
                    }
                }
                row
            })
            .collect();

        let nnz: usize = rows.iter().map(Vec::len).sum();
        let mut row_ptr = Vec::with_capacity(index.len() + 1);
        let mut cols = Vec::with_capacity(nnz);
        let mut vals = Vec::with_capacity(nnz);
        row_ptr.push(0);
        for row in rows {
            for (q, k) in row {
                cols.push(q);
                vals.push(k);
            }
            row_ptr.push(cols.len());
        }
        let epsilon = if vals.is_empty() {
            if support > 1 && medium.scattering() > 0.0 {
                log::warn!("no off-diagonal kernel entries stored; epsilon set to 0");
            }
            0.0
        } else {
            vals.iter().copied().fold(f64::INFINITY, f64::min)
        };
        let diagonal = samples.iter().map(|s| diagonal(s, medium)).collect();
        Ok(SparseKernel {
            index,
            support,
            diagonal,
            row_ptr,
            cols,
            vals,
            epsilon,
        })
    }

    /// Number of masked pixels.
    pub fn n(&self) -> usize {
        self.diagonal.len()
    }

    pub fn support(&self) -> usize {
        self.support
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn index(&self) -> &MaskIndex {
        &self.index
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Stored off-diagonal entries of row `p` as `(q, K_pq)`.
    pub fn row(&self, p: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[p]..self.row_ptr[p + 1];
        self.cols[range.clone()]
            .iter()
            .zip(&self.vals[range])
            .map(|(&q, &k)| (q as usize, k))
    }

    /// `out = K̂·x`.
    pub fn matvec_into(&self, x: &[f64], out: &mut [f64]) {
        out.par_iter_mut().enumerate().for_each(|(p, o)| {
            let mut acc = self.diagonal[p] * x[p];
            for i in self.row_ptr[p]..self.row_ptr[p + 1] {
                acc += self.vals[i] * x[self.cols[i] as usize];
            }
            *o = acc;
        });
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n() {
            return Err(Error::Dimension(format!("vector of length {} for n = {}", x.len(), self.n())));
        }
        let mut out = vec![0.0; self.n()];
        self.matvec_into(x, &mut out);
        Ok(out)
    }

    /// Applies the augmented operator to `[L_s; C]` (length `n + 1`).
    pub fn augmented_matvec_into(&self, x: &[f64], out: &mut [f64]) {
        let n = self.n();
        let c = x[n];
        self.matvec_into(&x[..n], &mut out[..n]);
        for o in &mut out[..n] {
            *o += c;
        }
        out[n] = self.epsilon * x[..n].iter().sum::<f64>() - c;
    }

    pub fn augmented_matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n() + 1 {
            return Err(Error::Dimension(format!(
                "augmented vector of length {} for n = {}",
                x.len(),
                self.n()
            )));
        }
        let mut out = vec![0.0; x.len()];
        self.augmented_matvec_into(x, &mut out);
        Ok(out)
    }

    /// Explicit augmented matrix (small kernels only).
    pub fn augmented_dense(&self) -> Result<DMatrix<f64>> {
        let n = self.n();
        if n + 1 > DENSE_LIMIT + 1 {
            return Err(Error::InvalidParameter(format!("{n} pixels exceed the dense limit")));
        }
        let mut m = DMatrix::zeros(n + 1, n + 1);
        for p in 0..n {
            m[(p, p)] = self.diagonal[p];
            for (q, k) in self.row(p) {
                m[(p, q)] = k;
            }
            m[(p, n)] = 1.0;
            m[(n, p)] = self.epsilon;
        }
        m[(n, n)] = -1.0;
        Ok(m)
    }
}

pub fn build_sparse_kernel(
    scene: &Scene,
    camera: &Camera,
    medium: &Medium,
    table: &TableF,
    support: usize,
) -> Result<SparseKernel> {
    SparseKernel::build(scene, camera, medium, table, support)
}

/// Full `K` over the masked pixels, ordered by [`MaskIndex`].
pub fn dense_kernel(scene: &Scene, camera: &Camera, medium: &Medium, table: &TableF) -> Result<DMatrix<f64>> {
    let index = MaskIndex::new(&scene.mask);
    let n = index.len();
    if n > DENSE_LIMIT {
        return Err(Error::InvalidParameter(format!(
            "dense kernel refused for {n} pixels (limit {DENSE_LIMIT})"
        )));
    }
    let samples = surface_samples(scene, camera, &index);
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|p| {
            (0..n)
                .map(|q| {
                    if p == q {
                        diagonal(&samples[p], medium)
                    } else {
                        pair_coefficient(&samples[p], &samples[q], medium, table)
                    }
                })
                .collect()
        })
        .collect();
    Ok(DMatrix::from_fn(n, n, |p, q| rows[p][q]))
}

/// One dense row `K_p·` laid out as an image; unmasked pixels are 0.
pub fn kernel_row_image(
    pixel: (usize, usize),
    scene: &Scene,
    camera: &Camera,
    medium: &Medium,
    table: &TableF,
) -> Result<Grid<f64>> {
    let index = MaskIndex::new(&scene.mask);
    let p = index
        .index_of(pixel.0, pixel.1)
        .ok_or_else(|| Error::Geometry(format!("pixel {pixel:?} is not masked")))?;
    let samples = surface_samples(scene, camera, &index);
    let row: Vec<f64> = (0..index.len())
        .map(|q| {
            if q == p {
                diagonal(&samples[p], medium)
            } else {
                pair_coefficient(&samples[p], &samples[q], medium, table)
            }
        })
        .collect();
    Ok(index.scatter(&row, 0.0))
}
