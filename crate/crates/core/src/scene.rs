//! Camera, lights, medium and per-pixel surface maps.
//!
//! The world frame is the camera frame: the camera sits at the origin looking
//! down `+z`, image `x` grows to the right and image `y` grows downwards. Pixel
//! centres sit at integer pixel coordinates.

use std::f64::consts::PI;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, Mask};

pub type Vec3 = Vector3<f64>;

/// Angles at the camera are kept away from 0 and π so `1/sin γ` stays finite.
pub const GAMMA_CLAMP: f64 = 1e-6;

/// Sphere pixels whose surface is seen at `n·v` below this are treated as silhouette.
pub const SILHOUETTE_COS: f64 = 0.1;

/// Homogeneous, isotropically scattering medium.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MediumSpec", into = "MediumSpec")]
pub struct Medium {
    absorption: f64,
    scattering: f64,
    extinction: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct MediumSpec {
    absorption: f64,
    scattering: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    extinction: Option<f64>,
}

impl TryFrom<MediumSpec> for Medium {
    type Error = Error;

    fn try_from(spec: MediumSpec) -> Result<Self> {
        match spec.extinction {
            Some(c) => Medium::with_extinction(spec.absorption, spec.scattering, c),
            None => Medium::new(spec.absorption, spec.scattering),
        }
    }
}

impl From<Medium> for MediumSpec {
    fn from(m: Medium) -> Self {
        MediumSpec {
            absorption: m.absorption,
            scattering: m.scattering,
            extinction: Some(m.extinction),
        }
    }
}

impl Medium {
    pub fn new(absorption: f64, scattering: f64) -> Result<Self> {
        if !(absorption >= 0.0 && absorption.is_finite()) {
            return Err(Error::InvalidParameter(format!("absorption {absorption} must be >= 0")));
        }
        if !(scattering >= 0.0 && scattering.is_finite()) {
            return Err(Error::InvalidParameter(format!("scattering {scattering} must be >= 0")));
        }
        Ok(Medium {
            absorption,
            scattering,
            extinction: absorption + scattering,
        })
    }

    /// Rejects an extinction coefficient that is not exactly `absorption + scattering`.
    pub fn with_extinction(absorption: f64, scattering: f64, extinction: f64) -> Result<Self> {
        let m = Medium::new(absorption, scattering)?;
        if m.extinction != extinction {
            return Err(Error::InvalidParameter(format!(
                "extinction {extinction} != absorption {absorption} + scattering {scattering}"
            )));
        }
        Ok(m)
    }

    pub fn vacuum() -> Self {
        Medium {
            absorption: 0.0,
            scattering: 0.0,
            extinction: 0.0,
        }
    }

    #[inline]
    pub fn absorption(&self) -> f64 {
        self.absorption
    }

    #[inline]
    pub fn scattering(&self) -> f64 {
        self.scattering
    }

    #[inline]
    pub fn extinction(&self) -> f64 {
        self.extinction
    }

    /// Isotropic phase function value.
    #[inline]
    pub fn phase(&self) -> f64 {
        1.0 / (4.0 * PI)
    }

    #[inline]
    pub fn optical_thickness(&self, distance: f64) -> f64 {
        self.extinction * distance
    }
}

/// Pinhole camera at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub width: usize,
    pub height: usize,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Camera {
    pub fn new(width: usize, height: usize, fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self> {
        let cam = Camera {
            width,
            height,
            fx,
            fy,
            cx,
            cy,
        };
        cam.validate()?;
        Ok(cam)
    }

    /// Square pixels with the principal point at the image centre.
    pub fn centered(width: usize, height: usize, focal: f64) -> Result<Self> {
        Camera::new(
            width,
            height,
            focal,
            focal,
            (width as f64 - 1.0) / 2.0,
            (height as f64 - 1.0) / 2.0,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidParameter("camera resolution must be non-zero".into()));
        }
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(Error::InvalidParameter("focal lengths must be positive".into()));
        }
        let inside = |c: f64, n: usize| c >= -0.5 && c <= n as f64 - 0.5;
        if !(inside(self.cx, self.width) && inside(self.cy, self.height)) {
            return Err(Error::InvalidParameter("principal point outside the image".into()));
        }
        Ok(())
    }

    /// Back-projection direction with unit `z` component.
    #[inline]
    pub fn ray_direction(&self, x: f64, y: f64) -> Vec3 {
        Vec3::new((x - self.cx) / self.fx, (y - self.cy) / self.fy, 1.0)
    }

    /// Unit viewing direction through the centre of pixel `(x, y)`.
    #[inline]
    pub fn pixel_ray(&self, x: usize, y: usize) -> Vec3 {
        self.ray_direction(x as f64, y as f64).normalize()
    }

    /// Solid angle subtended by pixel `(x, y)` at the camera centre.
    #[inline]
    pub fn pixel_solid_angle(&self, x: usize, y: usize) -> f64 {
        let r = self.ray_direction(x as f64, y as f64);
        1.0 / (self.fx * self.fy * r.norm().powi(3))
    }

    /// 3D point at depth `z` along pixel `(x, y)`.
    #[inline]
    pub fn point(&self, x: usize, y: usize, z: f64) -> Vec3 {
        self.ray_direction(x as f64, y as f64) * z
    }

    /// Perspective projection to continuous pixel coordinates.
    pub fn project(&self, p: &Vec3) -> (f64, f64) {
        (self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy)
    }
}

/// Isotropic near point light.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LightSource {
    pub position: [f64; 3],
    /// Radiant intensity (flux per steradian).
    pub intensity: f64,
}

impl LightSource {
    pub fn new(position: Vec3, intensity: f64) -> Result<Self> {
        let light = LightSource {
            position: [position.x, position.y, position.z],
            intensity,
        };
        light.validate()?;
        Ok(light)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.intensity > 0.0 && self.intensity.is_finite()) {
            return Err(Error::InvalidParameter("light intensity must be positive".into()));
        }
        if !(self.pos().norm() > 0.0) {
            return Err(Error::InvalidParameter("light must not coincide with the camera".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn pos(&self) -> Vec3 {
        Vec3::new(self.position[0], self.position[1], self.position[2])
    }
}

/// `count` lights evenly spaced on a ring of `radius` in the camera's `z = 0` plane.
pub fn ring_lights(count: usize, radius: f64, intensity: f64) -> Result<Vec<LightSource>> {
    (0..count)
        .map(|k| {
            let phi = 2.0 * PI * k as f64 / count as f64;
            LightSource::new(Vec3::new(radius * phi.cos(), radius * phi.sin(), 0.0), intensity)
        })
        .collect()
}

/// Per-pixel surface: depth, unit normals, albedo and the object mask.
///
/// Outside the mask depth and albedo are 0 and the normal is the zero vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub depth: Grid<f64>,
    pub normals: Grid<Vec3>,
    pub albedo: Grid<f64>,
    pub mask: Mask,
}

impl Scene {
    pub fn validate(&self) -> Result<()> {
        let dims = self.mask.dims();
        if self.depth.dims() != dims || self.normals.dims() != dims || self.albedo.dims() != dims {
            return Err(Error::Dimension("scene maps differ in size".into()));
        }
        for (i, &m) in self.mask.as_slice().iter().enumerate() {
            let (d, n, a) = (
                self.depth.as_slice()[i],
                self.normals.as_slice()[i],
                self.albedo.as_slice()[i],
            );
            if m {
                if !(d > 0.0 && d.is_finite()) || (n.norm() - 1.0).abs() > 1e-6 || !(a >= 0.0) {
                    return Err(Error::Geometry(format!("invalid surface sample at pixel {i}")));
                }
            } else if d != 0.0 || n != Vec3::zeros() || a != 0.0 {
                return Err(Error::Geometry(format!("unmasked pixel {i} carries data")));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn point(&self, camera: &Camera, x: usize, y: usize) -> Vec3 {
        camera.point(x, y, *self.depth.get(x, y))
    }
}

/// Distances, the camera-side angle and optical thicknesses for one pixel and light.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatterGeometry {
    pub d_sv: f64,
    pub d_vp: f64,
    pub d_sp: f64,
    /// Angle at the camera between the viewing ray and the direction to the source.
    pub gamma: f64,
    pub t_sv: f64,
    pub t_vp: f64,
    pub t_sp: f64,
    /// Unit direction from the surface point to the source.
    pub l_sp: Vec3,
}

/// Angle between two vectors, accurate for nearly parallel inputs.
#[inline]
pub fn angle_between(a: &Vec3, b: &Vec3) -> f64 {
    a.cross(b).norm().atan2(a.dot(b))
}

#[inline]
pub fn clamp_gamma(gamma: f64) -> f64 {
    gamma.clamp(GAMMA_CLAMP, PI - GAMMA_CLAMP)
}

pub fn scatter_geometry(
    camera: &Camera,
    light: &LightSource,
    medium: &Medium,
    pixel: (usize, usize),
    depth: f64,
) -> Result<ScatterGeometry> {
    if !(depth > 0.0 && depth.is_finite()) {
        return Err(Error::Geometry(format!("depth {depth} must be positive")));
    }
    light.validate()?;
    let p = camera.point(pixel.0, pixel.1, depth);
    Ok(geometry_at_point(&p, light, medium))
}

/// Same as [`scatter_geometry`] for an explicit surface point.
pub fn geometry_at_point(p: &Vec3, light: &LightSource, medium: &Medium) -> ScatterGeometry {
    let s = light.pos();
    let d_vp = p.norm();
    let d_sv = s.norm();
    let to_source = s - p;
    let d_sp = to_source.norm();
    let gamma = clamp_gamma(angle_between(p, &s));
    ScatterGeometry {
        d_sv,
        d_vp,
        d_sp,
        gamma,
        t_sv: medium.optical_thickness(d_sv),
        t_vp: medium.optical_thickness(d_vp),
        t_sp: medium.optical_thickness(d_sp),
        l_sp: to_source / d_sp,
    }
}

/// Ray-traced sphere: depth of the first hit, analytic outward normals, constant albedo.
pub fn make_sphere_scene(camera: &Camera, center: Vec3, radius: f64, albedo: f64) -> Result<Scene> {
    camera.validate()?;
    if !(radius > 0.0) || !(albedo >= 0.0) {
        return Err(Error::InvalidParameter("sphere needs radius > 0 and albedo >= 0".into()));
    }
    if center.z - radius <= 0.0 {
        return Err(Error::Geometry("sphere is not entirely in front of the camera".into()));
    }
    let (w, h) = (camera.width, camera.height);
    let mut depth = Grid::filled(w, h, 0.0);
    let mut normals = Grid::filled(w, h, Vec3::zeros());
    let mut albedo_map = Grid::filled(w, h, 0.0);
    let mut mask = Grid::filled(w, h, false);
    let c2 = center.norm_squared() - radius * radius;
    for y in 0..h {
        for x in 0..w {
            let d = camera.pixel_ray(x, y);
            let b = d.dot(&center);
            let disc = b * b - c2;
            if disc < 0.0 {
                continue;
            }
            let t = b - disc.sqrt();
            let p = d * t;
            let n = (p - center) / radius;
            let n = n.normalize();
            if -n.dot(&d) < SILHOUETTE_COS {
                continue;
            }
            depth.set(x, y, p.z);
            normals.set(x, y, n);
            albedo_map.set(x, y, albedo);
            mask.set(x, y, true);
        }
    }
    Ok(Scene {
        depth,
        normals,
        albedo: albedo_map,
        mask,
    })
}

/// Fronto-parallel plane at `depth0` over `mask`, facing the camera with unit albedo.
pub fn make_plane_init(mask: &Mask, depth0: f64, camera: &Camera) -> Result<Scene> {
    if !(depth0 > 0.0 && depth0.is_finite()) {
        return Err(Error::InvalidParameter(format!("plane depth {depth0} must be positive")));
    }
    if mask.dims() != (camera.width, camera.height) {
        return Err(Error::Dimension("mask does not match the camera".into()));
    }
    if mask.count() == 0 {
        return Err(Error::InvalidParameter("mask is empty".into()));
    }
    let toward_camera = Vec3::new(0.0, 0.0, -1.0);
    Ok(Scene {
        depth: mask.map(|&m| if m { depth0 } else { 0.0 }),
        normals: mask.map(|&m| if m { toward_camera } else { Vec3::zeros() }),
        albedo: mask.map(|&m| if m { 1.0 } else { 0.0 }),
        mask: mask.clone(),
    })
}

/// Normals recomputed from a depth map.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthNormals {
    pub normals: Grid<Vec3>,
    /// False for masked pixels with no masked neighbour along some axis.
    pub valid: Mask,
}

/// Unit normals from central differences of the back-projected surface, with
/// one-sided differences at the mask boundary. Normals face the camera.
pub fn normals_from_depth(depth: &Grid<f64>, mask: &Mask, camera: &Camera) -> DepthNormals {
    let (w, h) = mask.dims();
    let point = |x: usize, y: usize| camera.point(x, y, *depth.get(x, y));
    let inside = |x: isize, y: isize| {
        x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h && *mask.get(x as usize, y as usize)
    };
    let tangent = |x: usize, y: usize, dx: isize, dy: isize| -> Option<Vec3> {
        let (xi, yi) = (x as isize, y as isize);
        let fwd = inside(xi + dx, yi + dy);
        let bwd = inside(xi - dx, yi - dy);
        let at = |s: isize| point((xi + s * dx) as usize, (yi + s * dy) as usize);
        match (fwd, bwd) {
            (true, true) => Some(at(1) - at(-1)),
            (true, false) => Some(at(1) - at(0)),
            (false, true) => Some(at(0) - at(-1)),
            (false, false) => None,
        }
    };
    let mut normals = Grid::filled(w, h, Vec3::zeros());
    let mut valid = Grid::filled(w, h, false);
    for y in 0..h {
        for x in 0..w {
            if !*mask.get(x, y) {
                continue;
            }
            let (Some(tu), Some(tv)) = (tangent(x, y, 1, 0), tangent(x, y, 0, 1)) else {
                continue;
            };
            let n = tv.cross(&tu);
            let len = n.norm();
            if !(len > 0.0) {
                continue;
            }
            let mut n = n / len;
            if n.dot(&point(x, y)) > 0.0 {
                n = -n;
            }
            normals.set(x, y, n);
            valid.set(x, y, true);
        }
    }
    DepthNormals { normals, valid }
}

/// One radiance image per light over a shared mask.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageStack {
    pub images: Vec<Grid<f64>>,
    pub lights: Vec<LightSource>,
    pub mask: Mask,
}

impl ImageStack {
    pub fn new(images: Vec<Grid<f64>>, lights: Vec<LightSource>, mask: Mask) -> Result<Self> {
        if images.len() != lights.len() {
            return Err(Error::Dimension(format!(
                "{} images for {} lights",
                images.len(),
                lights.len()
            )));
        }
        for (k, img) in images.iter().enumerate() {
            if img.dims() != mask.dims() {
                return Err(Error::Dimension(format!("image {k} differs in size from the mask")));
            }
            if img.as_slice().iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter(format!("image {k} has non-finite radiance")));
            }
        }
        Ok(ImageStack {
            images,
            lights,
            mask,
        })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.mask.dims()
    }
}
