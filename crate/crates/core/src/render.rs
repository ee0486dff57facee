//! Analytic single-scattering image formation.
//!
//! An observed pixel is the attenuated reflected radiance plus backscatter along
//! the viewing ray plus forward scatter of light reflected at other surface points:
//! `L = L_s·exp(-c·d_vp) + L_b + L_f`. The reflected radiance `L_s` itself is the
//! direct Lambertian term plus source-to-surface forward scatter.

use std::f64::consts::{FRAC_PI_4, PI};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{Grid, MaskIndex};
use crate::kernel::{pair_coefficient, surface_samples};
use crate::scene::{geometry_at_point, Camera, ImageStack, LightSource, Medium, Scene, ScatterGeometry, Vec3};
use crate::tables::{TableF, TableG, Tables};

/// Single-scattered light gathered along a ray segment `[0, t_upper/c]` from an
/// isotropic unit-intensity point source, per the `H0·[F(H1, H2) - F(H1, γ/2)]` closed form.
///
/// `t_source` is the optical distance from the ray origin to the source and
/// `gamma` the angle at the origin between the ray and the source direction.
#[inline]
pub fn airlight(table: &TableF, medium: &Medium, t_source: f64, gamma: f64, t_upper: f64) -> f64 {
    let b = medium.scattering();
    if b == 0.0 || t_upper <= 0.0 {
        return 0.0;
    }
    let c = medium.extinction();
    let (sin_g, cos_g) = gamma.sin_cos();
    let h0 = b * c * (-t_source * cos_g).exp() / (2.0 * PI * t_source * sin_g);
    let h1 = t_source * sin_g;
    let h2 = FRAC_PI_4 + 0.5 * (t_upper - t_source * cos_g).atan2(t_source * sin_g);
    h0 * table.difference(h1, h2, 0.5 * gamma)
}

/// Backscatter along a pixel's viewing ray up to `d_upper`.
pub fn backscatter_pixel(
    geom: &ScatterGeometry,
    light: &LightSource,
    medium: &Medium,
    table: &TableF,
    d_upper: f64,
) -> f64 {
    light.intensity * airlight(table, medium, geom.t_sv, geom.gamma, medium.optical_thickness(d_upper))
}

/// Attenuated Lambertian reflection of the direct source light. Facets turned
/// away from the source contribute nothing.
pub fn direct_reflection_pixel(
    geom: &ScatterGeometry,
    light: &LightSource,
    normal: &Vec3,
    albedo: f64,
) -> f64 {
    let cos = normal.dot(&geom.l_sp).max(0.0);
    light.intensity / (geom.d_sp * geom.d_sp) * (-geom.t_sp).exp() * albedo * cos
}

/// Light scattered towards the surface from the medium around it.
pub fn source_surface_fs_pixel(
    geom: &ScatterGeometry,
    light: &LightSource,
    medium: &Medium,
    normal: &Vec3,
    albedo: f64,
    table: &TableG,
) -> f64 {
    let b = medium.scattering();
    if b == 0.0 || albedo == 0.0 {
        return 0.0;
    }
    let mu = normal.dot(&geom.l_sp);
    b * medium.extinction() * light.intensity * albedo / (2.0 * PI * geom.t_sp)
        * table.lookup(geom.t_sp, mu)
}

/// Reflected radiance `L_s = L_s,d + L_s,f` at one surface sample.
pub fn reflected_pixel(
    geom: &ScatterGeometry,
    light: &LightSource,
    medium: &Medium,
    normal: &Vec3,
    albedo: f64,
    table: &TableG,
) -> f64 {
    direct_reflection_pixel(geom, light, normal, albedo)
        + source_surface_fs_pixel(geom, light, medium, normal, albedo, table)
}

/// Distance along `ray_p` (unit) to the tangent plane of the facet at `q_point`,
/// clamped to `[0, d_vp]`.
pub fn clamp_dvp_prime(ray_p: &Vec3, d_vp: f64, q_point: &Vec3, q_normal: &Vec3) -> f64 {
    let denom = q_normal.dot(ray_p);
    let num = q_normal.dot(q_point);
    if denom.abs() < 1e-12 {
        // Parallel: the whole segment is on the camera's side of the plane or none of it is.
        return if num < 0.0 { d_vp } else { 0.0 };
    }
    let t = num / denom;
    if t > d_vp {
        d_vp
    } else if t < 0.0 {
        0.0
    } else {
        t
    }
}

/// Dense surface-to-camera forward scatter `L_f = Σ_{q≠p} K_pq·L_s(q)` for several
/// reflected-radiance images at once. Cost is quadratic in the masked pixel count.
pub fn surface_camera_fs_images(
    ls_images: &[Grid<f64>],
    scene: &Scene,
    camera: &Camera,
    medium: &Medium,
    table: &TableF,
) -> Result<Vec<Grid<f64>>> {
    for img in ls_images {
        if img.dims() != scene.mask.dims() {
            return Err(Error::Dimension("reflected image differs from the scene".into()));
        }
    }
    let index = MaskIndex::new(&scene.mask);
    let k = ls_images.len();
    if medium.scattering() == 0.0 || index.is_empty() {
        return Ok(ls_images.iter().map(|i| Grid::filled(i.width(), i.height(), 0.0)).collect());
    }
    let samples = surface_samples(scene, camera, &index);
    let ls: Vec<Vec<f64>> = ls_images.iter().map(|img| index.gather(img)).collect();
    let dropped = samples.iter().filter(|s| s.footprint == 0.0).count();
    if dropped > 0 {
        log::warn!("{dropped} grazing facets dropped from the forward-scatter sum");
    }
    let rows: Vec<Vec<f64>> = (0..index.len())
        .into_par_iter()
        .map(|p| {
            let mut acc = vec![0.0; k];
            for q in 0..index.len() {
                if q == p {
                    continue;
                }
                let kpq = pair_coefficient(&samples[p], &samples[q], medium, table);
                if kpq != 0.0 {
                    for (a, l) in acc.iter_mut().zip(&ls) {
                        *a += kpq * l[q];
                    }
                }
            }
            acc
        })
        .collect();
    Ok((0..k)
        .map(|j| {
            let vals: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            index.scatter(&vals, 0.0)
        })
        .collect())
}

pub fn surface_camera_fs_image(
    ls_image: &Grid<f64>,
    scene: &Scene,
    camera: &Camera,
    medium: &Medium,
    table: &TableF,
) -> Result<Grid<f64>> {
    Ok(surface_camera_fs_images(std::slice::from_ref(ls_image), scene, camera, medium, table)?
        .pop()
        .unwrap())
}

/// Per-light component images of a render.
#[derive(Debug, Clone)]
pub struct RenderComponents {
    /// Reflected radiance `L_s` at the surface (masked pixels).
    pub reflected: Grid<f64>,
    /// `L_s·exp(-T_vp)`.
    pub attenuated: Grid<f64>,
    /// Backscatter up to the surface (masked) or `d_max` (background).
    pub backscatter: Grid<f64>,
    /// Surface-to-camera forward scatter.
    pub forward: Grid<f64>,
}

#[derive(Debug, Clone)]
pub struct RenderOutput {
    pub observed: ImageStack,
    /// Backscatter-only images with the object removed, integrated to `d_max`.
    pub no_object: ImageStack,
    pub components: Vec<RenderComponents>,
}

/// Additive Gaussian sensor noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Noise {
    pub sigma: f64,
    pub seed: u64,
}

/// Reflected radiance images for every light over the scene mask.
pub fn reflected_images(
    scene: &Scene,
    lights: &[LightSource],
    medium: &Medium,
    camera: &Camera,
    table: &TableG,
) -> Vec<Grid<f64>> {
    lights
        .iter()
        .map(|light| {
            Grid::from_fn(camera.width, camera.height, |x, y| {
                if !*scene.mask.get(x, y) {
                    return 0.0;
                }
                let p = scene.point(camera, x, y);
                let geom = geometry_at_point(&p, light, medium);
                reflected_pixel(&geom, light, medium, scene.normals.get(x, y), *scene.albedo.get(x, y), table)
            })
        })
        .collect()
}

/// Renders observed and object-free image stacks for every light.
pub fn render_stack(
    scene: &Scene,
    lights: &[LightSource],
    medium: &Medium,
    camera: &Camera,
    tables: &Tables,
    d_max: f64,
    noise: Option<Noise>,
) -> Result<RenderOutput> {
    scene.validate()?;
    if scene.mask.dims() != (camera.width, camera.height) {
        return Err(Error::Dimension("scene does not match the camera".into()));
    }
    for light in lights {
        light.validate()?;
    }
    let max_depth = scene
        .mask
        .as_slice()
        .iter()
        .zip(0..)
        .filter(|(&m, _)| m)
        .map(|(_, i)| {
            let (x, y) = (i % camera.width, i / camera.width);
            scene.point(camera, x, y).norm()
        })
        .fold(0.0, f64::max);
    if !(d_max > max_depth) {
        return Err(Error::InvalidParameter(format!(
            "d_max {d_max} must exceed the farthest surface distance {max_depth:.3}"
        )));
    }

    let reflected = reflected_images(scene, lights, medium, camera, &tables.g);
    let forward = surface_camera_fs_images(&reflected, scene, camera, medium, &tables.f)?;

    let mut observed = Vec::with_capacity(lights.len());
    let mut no_object = Vec::with_capacity(lights.len());
    let mut components = Vec::with_capacity(lights.len());
    for ((light, ls), lf) in lights.iter().zip(reflected).zip(forward) {
        let (w, h) = (camera.width, camera.height);
        let mut attenuated = Grid::filled(w, h, 0.0);
        let mut backscatter = Grid::filled(w, h, 0.0);
        let mut empty = Grid::filled(w, h, 0.0);
        let mut obs = Grid::filled(w, h, 0.0);
        for y in 0..h {
            for x in 0..w {
                let ray = camera.pixel_ray(x, y);
                let far = geometry_at_point(&(ray * d_max), light, medium);
                let lb_far = backscatter_pixel(&far, light, medium, &tables.f, d_max);
                empty.set(x, y, lb_far);
                if *scene.mask.get(x, y) {
                    let p = scene.point(camera, x, y);
                    let geom = geometry_at_point(&p, light, medium);
                    let att = ls.get(x, y) * (-geom.t_vp).exp();
                    let lb = backscatter_pixel(&geom, light, medium, &tables.f, geom.d_vp);
                    attenuated.set(x, y, att);
                    backscatter.set(x, y, lb);
                    obs.set(x, y, att + lb + lf.get(x, y));
                } else {
                    backscatter.set(x, y, lb_far);
                    obs.set(x, y, lb_far);
                }
            }
        }
        observed.push(obs);
        no_object.push(empty);
        components.push(RenderComponents {
            reflected: ls,
            attenuated,
            backscatter,
            forward: lf,
        });
    }

    if let Some(noise) = noise {
        if noise.sigma > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
            let normal = Normal::new(0.0, noise.sigma)
                .map_err(|e| Error::InvalidParameter(format!("noise: {e}")))?;
            for img in observed.iter_mut().chain(no_object.iter_mut()) {
                for v in img.as_mut_slice() {
                    *v += normal.sample(&mut rng);
                }
            }
        }
    }

    Ok(RenderOutput {
        observed: ImageStack::new(observed, lights.to_vec(), scene.mask.clone())?,
        no_object: ImageStack::new(no_object, lights.to_vec(), scene.mask.clone())?,
        components,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom_for(d_sp: f64, n_dot_l: f64) -> (ScatterGeometry, Vec3) {
        let l = Vec3::new(0.0, 0.0, -1.0);
        let n = Vec3::new((1.0 - n_dot_l * n_dot_l).max(0.0).sqrt(), 0.0, -n_dot_l);
        let g = ScatterGeometry {
            d_sv: 100.0,
            d_vp: 300.0,
            d_sp,
            gamma: 0.4,
            t_sv: 0.0,
            t_vp: 0.0,
            t_sp: 0.0,
            l_sp: l,
        };
        (g, n)
    }

    #[test]
    fn vacuum_direct_reflection_is_inverse_square_lambertian() {
        let light = LightSource::new(Vec3::new(10.0, 0.0, 0.0), 2.0).unwrap();
        let (g, n) = geom_for(200.0, 0.6);
        let v = direct_reflection_pixel(&g, &light, &n, 0.5);
        assert!((v - 2.0 * 0.5 * 0.6 / 40000.0).abs() < 1e-15);
        let (g2, _) = geom_for(400.0, 0.6);
        let v2 = direct_reflection_pixel(&g2, &light, &n, 0.5);
        assert!((v2 - v / 4.0).abs() < 1e-18);
    }

    #[test]
    fn shadowed_facets_reflect_nothing() {
        let light = LightSource::new(Vec3::new(10.0, 0.0, 0.0), 2.0).unwrap();
        let (g, n) = geom_for(200.0, -0.3);
        assert_eq!(direct_reflection_pixel(&g, &light, &n, 0.5), 0.0);
    }

    #[test]
    fn dvp_prime_clamp_branches() {
        let ray = Vec3::new(0.0, 0.0, 1.0);
        // Tangent plane beyond the surface point: clamp to d_vp.
        let q = Vec3::new(10.0, 0.0, 500.0);
        let n = Vec3::new(0.0, 0.0, -1.0);
        assert_eq!(clamp_dvp_prime(&ray, 300.0, &q, &n), 300.0);
        // Plane crossing the ray behind the camera: clamp to zero.
        let n_tilt = Vec3::new(1.0, 0.0, 0.1).normalize();
        let q2 = Vec3::new(-50.0, 0.0, 10.0);
        assert!(n_tilt.dot(&q2) / n_tilt.dot(&ray) < 0.0);
        assert_eq!(clamp_dvp_prime(&ray, 300.0, &q2, &n_tilt), 0.0);
        // Plane in between.
        let q3 = Vec3::new(0.0, 5.0, 200.0);
        assert!((clamp_dvp_prime(&ray, 300.0, &q3, &n) - 200.0).abs() < 1e-12);
        // Parallel plane with the camera outside.
        let n_par = Vec3::new(-1.0, 0.0, 0.0);
        assert_eq!(clamp_dvp_prime(&ray, 300.0, &Vec3::new(20.0, 0.0, 100.0), &n_par), 300.0);
        assert_eq!(clamp_dvp_prime(&ray, 300.0, &Vec3::new(-20.0, 0.0, 100.0), &n_par), 0.0);
    }

    #[test]
    fn airlight_vanishes_without_scattering_or_path() {
        let f = TableF::build(64, 64, 10.0).unwrap();
        let m = Medium::new(0.01, 0.0).unwrap();
        assert_eq!(airlight(&f, &m, 0.5, 0.3, 1.0), 0.0);
        let m = Medium::new(0.0, 0.005).unwrap();
        assert_eq!(airlight(&f, &m, 0.5, 0.3, 0.0), 0.0);
        assert!(airlight(&f, &m, 0.5, 0.3, 1e-9).abs() < 1e-12);
        assert!(airlight(&f, &m, 0.5, 0.3, 1.0) > 0.0);
    }
}
