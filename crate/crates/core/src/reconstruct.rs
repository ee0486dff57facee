//! Inverse stages: backscatter and forward-scatter removal, near-light
//! photometric stereo and perspective normal integration.

use std::collections::VecDeque;
use std::f64::consts::PI;

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{Grid, Mask, MaskIndex};
use crate::kernel::SparseKernel;
use crate::scene::{geometry_at_point, Camera, ImageStack, LightSource, Medium, Vec3};
use crate::solver::{bicgstab, conjugate_gradient, BiCgStabParams, SolveReport};
use crate::tables::TableG;

/// Normal-equation condition number above which a pixel's solve is rejected.
pub const CONDITION_LIMIT: f64 = 1e6;

const MAX_SHADOW_PASSES: usize = 3;

/// `max(observed − no_object, 0)` on masked pixels; 0 elsewhere.
pub fn subtract_backscatter(observed: &ImageStack, no_object: &ImageStack) -> Result<ImageStack> {
    check_aligned(observed, no_object)?;
    let images = observed
        .images
        .iter()
        .zip(&no_object.images)
        .map(|(o, e)| {
            Grid::from_fn(o.width(), o.height(), |x, y| {
                if *observed.mask.get(x, y) {
                    (o.get(x, y) - e.get(x, y)).max(0.0)
                } else {
                    0.0
                }
            })
        })
        .collect();
    ImageStack::new(images, observed.lights.clone(), observed.mask.clone())
}

fn check_aligned(a: &ImageStack, b: &ImageStack) -> Result<()> {
    if a.len() != b.len() || a.dims() != b.dims() {
        return Err(Error::Dimension("observed and object-free stacks differ in shape".into()));
    }
    if a.mask != b.mask {
        return Err(Error::Dimension("observed and object-free stacks use different masks".into()));
    }
    if a.lights != b.lights {
        return Err(Error::Dimension("observed and object-free stacks use different lights".into()));
    }
    Ok(())
}

/// 3×3 median over the in-mask neighbourhood of each masked pixel. With an
/// even number of neighbours the lower median is taken, so the output only
/// contains input values. Unmasked pixels are 0.
pub fn median_filter_masked(image: &Grid<f64>, mask: &Mask) -> Grid<f64> {
    let (w, h) = image.dims();
    let mut window = Vec::with_capacity(9);
    Grid::from_fn(w, h, |x, y| {
        if !*mask.get(x, y) {
            return 0.0;
        }
        window.clear();
        for qy in y.saturating_sub(1)..=(y + 1).min(h - 1) {
            for qx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                if *mask.get(qx, qy) {
                    window.push(*image.get(qx, qy));
                }
            }
        }
        window.sort_by(f64::total_cmp);
        window[(window.len() - 1) / 2]
    })
}

/// Backscatter subtraction followed by the masked median filter.
pub fn remove_backscatter(observed: &ImageStack, no_object: &ImageStack) -> Result<ImageStack> {
    let diff = subtract_backscatter(observed, no_object)?;
    let images = diff
        .images
        .par_iter()
        .map(|img| median_filter_masked(img, &diff.mask))
        .collect();
    ImageStack::new(images, diff.lights, diff.mask)
}

/// Reflected-radiance estimates recovered from the augmented system.
#[derive(Debug, Clone)]
pub struct ForwardScatterRemoval {
    pub reflected: ImageStack,
    /// Solved rank-one correction `C` per light image.
    pub corrections: Vec<f64>,
    /// Number of negative `L_s` values clamped to 0, summed over images.
    pub clamped: usize,
    pub reports: Vec<SolveReport>,
}

/// Solves the augmented system once per light image.
pub fn remove_forward_scatter(
    lprime: &ImageStack,
    kernel: &SparseKernel,
    params: &BiCgStabParams,
) -> Result<ForwardScatterRemoval> {
    let index = kernel.index();
    if index.dims() != lprime.dims() || MaskIndex::new(&lprime.mask) != *index {
        return Err(Error::Dimension("kernel was built for a different mask".into()));
    }
    let n = kernel.n();
    let mut images = Vec::with_capacity(lprime.len());
    let mut corrections = Vec::with_capacity(lprime.len());
    let mut reports = Vec::with_capacity(lprime.len());
    let mut clamped = 0;
    for img in &lprime.images {
        let mut rhs = index.gather(img);
        let x0: Vec<f64> = rhs
            .iter()
            .zip(kernel.diagonal())
            .map(|(l, d)| l / d)
            .chain(std::iter::once(0.0))
            .collect();
        rhs.push(0.0);
        let (x, report) = bicgstab(|v, out| kernel.augmented_matvec_into(v, out), &rhs, Some(&x0), params)?;
        if !report.converged {
            return Err(Error::Solve {
                message: "forward-scatter removal did not reach tolerance".into(),
                report,
            });
        }
        let ls: Vec<f64> = x[..n]
            .iter()
            .map(|&v| {
                if v < 0.0 {
                    clamped += 1;
                    0.0
                } else {
                    v
                }
            })
            .collect();
        corrections.push(x[n]);
        reports.push(report);
        images.push(index.scatter(&ls, 0.0));
    }
    if clamped > 0 {
        log::info!("{clamped} negative reflected-radiance values clamped to 0");
    }
    Ok(ForwardScatterRemoval {
        reflected: ImageStack::new(images, lprime.lights.clone(), lprime.mask.clone())?,
        corrections,
        clamped,
        reports,
    })
}

/// Per-pixel photometric stereo output.
#[derive(Debug, Clone)]
pub struct NormalSolveResult {
    pub normals: Grid<Vec3>,
    pub albedo: Grid<f64>,
    /// Root-mean-square residual of the per-pixel least-squares fit.
    pub residual: Grid<f64>,
    /// Masked pixels whose solve was rejected and whose normal was carried over.
    pub flagged: Mask,
}

impl NormalSolveResult {
    pub fn flagged_count(&self) -> usize {
        self.flagged.count()
    }
}

/// Scalar weight multiplying `ρ·I0·(n·l)` in the linearized reflection model.
pub fn shading_weight(t_sp: f64, d_sp: f64, medium: &Medium, table: &TableG) -> f64 {
    let direct = (-t_sp).exp() / (d_sp * d_sp);
    let b = medium.scattering();
    if b == 0.0 {
        return direct;
    }
    direct + b * medium.extinction() / (2.0 * PI * t_sp) * table.lookup(t_sp, 1.0)
}

/// Linear least squares for `m = ρ·n` at every masked pixel using the
/// geometry of the current shape estimate.
///
/// Lights with non-positive radiance at a pixel are left out, as are lights the
/// fit itself predicts to be behind the surface (the fit is then repeated). Pixels with
/// fewer than three usable lights, an ill-conditioned system or a normal
/// facing away from the camera keep the corresponding `previous` normal.
pub fn solve_normals(
    reflected: &ImageStack,
    depth: &Grid<f64>,
    camera: &Camera,
    medium: &Medium,
    table: &TableG,
    previous: &Grid<Vec3>,
) -> Result<NormalSolveResult> {
    let mask = &reflected.mask;
    if depth.dims() != mask.dims() || previous.dims() != mask.dims() {
        return Err(Error::Dimension("depth or previous normals differ from the stack".into()));
    }
    let index = MaskIndex::new(mask);
    let solved: Vec<(Vec3, f64, f64, bool)> = index
        .pixels()
        .par_iter()
        .map(|&(x, y)| {
            let p = camera.point(x, y, *depth.get(x, y));
            let mut rows: Vec<(Vector3<f64>, f64)> = reflected
                .lights
                .iter()
                .zip(&reflected.images)
                .filter_map(|(light, img)| {
                    let l = *img.get(x, y);
                    (l > 0.0).then(|| (design_row(&p, light, medium, table), l))
                })
                .collect();
            let keep = (*previous.get(x, y), 0.0, 0.0, true);
            let Some(mut m) = least_squares(&rows) else {
                return keep;
            };
            // Lights the fit places behind the surface are self-shadowed there.
            for _ in 0..MAX_SHADOW_PASSES {
                let lit: Vec<_> = rows.iter().copied().filter(|(a, _)| a.dot(&m) > 0.0).collect();
                if lit.len() == rows.len() {
                    break;
                }
                match least_squares(&lit) {
                    Some(refit) => {
                        m = refit;
                        rows = lit;
                    }
                    None => break,
                }
            }
            let rho = m.norm();
            if !(rho > 0.0 && rho.is_finite()) {
                return keep;
            }
            let n = m / rho;
            if n.dot(&p) >= 0.0 {
                return keep;
            }
            let sse: f64 = rows.iter().map(|(a, l)| (a.dot(&m) - l).powi(2)).sum();
            (n, rho, (sse / rows.len() as f64).sqrt(), false)
        })
        .collect();

    let (w, h) = mask.dims();
    let mut normals = Grid::filled(w, h, Vec3::zeros());
    let mut albedo = Grid::filled(w, h, 0.0);
    let mut residual = Grid::filled(w, h, 0.0);
    let mut flagged = Grid::filled(w, h, false);
    for (&(x, y), (n, rho, res, flag)) in index.pixels().iter().zip(solved) {
        normals.set(x, y, n);
        albedo.set(x, y, rho);
        residual.set(x, y, res);
        flagged.set(x, y, flag);
    }
    let count = flagged.count();
    if count > 0 {
        log::debug!("{count} pixels kept their previous normal");
    }
    Ok(NormalSolveResult {
        normals,
        albedo,
        residual,
        flagged,
    })
}

/// Normal-equation solve for `m`, or `None` with fewer than three rows or a
/// condition number above [`CONDITION_LIMIT`].
fn least_squares(rows: &[(Vector3<f64>, f64)]) -> Option<Vector3<f64>> {
    if rows.len() < 3 {
        return None;
    }
    let mut ata = Matrix3::zeros();
    let mut atb = Vector3::zeros();
    for (a, l) in rows {
        ata += a * a.transpose();
        atb += a * *l;
    }
    let eig = SymmetricEigen::new(ata).eigenvalues;
    let (lo, hi) = (eig.min(), eig.max());
    if !(lo > 0.0) || hi / lo > CONDITION_LIMIT {
        return None;
    }
    ata.cholesky().map(|c| c.solve(&atb))
}

fn design_row(p: &Vec3, light: &LightSource, medium: &Medium, table: &TableG) -> Vector3<f64> {
    let geom = geometry_at_point(p, light, medium);
    geom.l_sp * (light.intensity * shading_weight(geom.t_sp, geom.d_sp, medium, table))
}

/// Depth from a normal field under perspective projection.
///
/// Each masked 4-neighbour edge contributes the averaged log-depth gradient
/// implied by the normals at its endpoints; the resulting Poisson system is
/// solved per connected component and each component is scaled so that its
/// mean depth equals `anchor_depth`.
pub fn integrate_normals(normals: &Grid<Vec3>, mask: &Mask, camera: &Camera, anchor_depth: f64) -> Result<Grid<f64>> {
    if !(anchor_depth > 0.0 && anchor_depth.is_finite()) {
        return Err(Error::InvalidParameter(format!("anchor depth {anchor_depth} must be positive")));
    }
    if normals.dims() != mask.dims() || mask.dims() != (camera.width, camera.height) {
        return Err(Error::Dimension("normals, mask and camera differ in size".into()));
    }
    let (w, h) = mask.dims();
    let mut grad = Grid::filled(w, h, (0.0, 0.0));
    for y in 0..h {
        for x in 0..w {
            if !*mask.get(x, y) {
                continue;
            }
            let n = normals.get(x, y);
            if (n.norm() - 1.0).abs() > 1e-6 {
                return Err(Error::InvalidParameter(format!("normal at ({x}, {y}) is not unit length")));
            }
            let r = camera.ray_direction(x as f64, y as f64);
            let nr = n.dot(&r);
            if nr.abs() < 1e-9 {
                return Err(Error::Geometry(format!("normal at ({x}, {y}) is perpendicular to its ray")));
            }
            grad.set(x, y, (-n.x / (camera.fx * nr), -n.y / (camera.fy * nr)));
        }
    }

    let mut depth = Grid::filled(w, h, 0.0);
    for component in components(mask) {
        let mut component_mask = Grid::filled(w, h, false);
        for &(x, y) in &component {
            component_mask.set(x, y, true);
        }
        let local = MaskIndex::new(&component_mask);
        let m = local.len();
        // Edges (i, j, g) meaning φ_j − φ_i ≈ g.
        let mut edges = Vec::new();
        for (i, &(x, y)) in local.pixels().iter().enumerate() {
            if x + 1 < w {
                if let Some(j) = local.index_of(x + 1, y) {
                    edges.push((i, j, 0.5 * (grad.get(x, y).0 + grad.get(x + 1, y).0)));
                }
            }
            if y + 1 < h {
                if let Some(j) = local.index_of(x, y + 1) {
                    edges.push((i, j, 0.5 * (grad.get(x, y).1 + grad.get(x, y + 1).1)));
                }
            }
        }
        let mut rhs = vec![0.0; m];
        let mut neighbours = vec![Vec::new(); m];
        for &(i, j, g) in &edges {
            rhs[j] += g;
            rhs[i] -= g;
            neighbours[i].push(j);
            neighbours[j].push(i);
        }
        let apply = |v: &[f64], out: &mut [f64]| {
            for (k, o) in out.iter_mut().enumerate() {
                *o = neighbours[k].iter().map(|&q| v[k] - v[q]).sum();
            }
        };
        let (phi, report) = conjugate_gradient(apply, &rhs, &vec![0.0; m], 1e-12, 20 * m + 100);
        if !report.converged && report.residual > 1e-8 {
            log::warn!("normal integration stopped at relative residual {:.3e}", report.residual);
        }
        let mean_exp = phi.iter().map(|v| v.exp()).sum::<f64>() / m as f64;
        let shift = (anchor_depth / mean_exp).ln();
        for (&(x, y), v) in local.pixels().iter().zip(&phi) {
            depth.set(x, y, (v + shift).exp());
        }
    }
    Ok(depth)
}

/// 4-connected components of the mask, each in row-major pixel order.
pub fn components(mask: &Mask) -> Vec<Vec<(usize, usize)>> {
    let (w, h) = mask.dims();
    let mut label = Grid::filled(w, h, usize::MAX);
    let mut out: Vec<Vec<(usize, usize)>> = Vec::new();
    let mut queue = VecDeque::new();
    for y in 0..h {
        for x in 0..w {
            if !*mask.get(x, y) || *label.get(x, y) != usize::MAX {
                continue;
            }
            let id = out.len();
            let mut pixels = Vec::new();
            label.set(x, y, id);
            queue.push_back((x, y));
            while let Some((px, py)) = queue.pop_front() {
                pixels.push((px, py));
                let neighbours = [
                    (px.wrapping_sub(1), py),
                    (px + 1, py),
                    (px, py.wrapping_sub(1)),
                    (px, py + 1),
                ];
                for (qx, qy) in neighbours {
                    if qx < w && qy < h && *mask.get(qx, qy) && *label.get(qx, qy) == usize::MAX {
                        label.set(qx, qy, id);
                        queue.push_back((qx, qy));
                    }
                }
            }
            pixels.sort_by_key(|&(x, y)| (y, x));
            out.push(pixels);
        }
    }
    out
}
