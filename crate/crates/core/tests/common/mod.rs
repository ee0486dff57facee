//! Independent reference computations shared by the integration tests.
//!
//! Nothing here calls the crate's closed forms or lookup tables: scattering
//! integrals are evaluated directly along rays with adaptive Gauss–Kronrod.

#![allow(dead_code)]

use std::f64::consts::PI;
use std::sync::OnceLock;

use scatterstereo::grid::Grid;
use scatterstereo::scene::{Camera, Medium, Scene, Vec3};
use scatterstereo::tables::Tables;

pub fn tables() -> &'static Tables {
    static TABLES: OnceLock<Tables> = OnceLock::new();
    TABLES.get_or_init(|| Tables::build_default().expect("default tables"))
}

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Adaptive Gauss–Kronrod 7-15 by recursive bisection.
pub fn integrate(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> f64 {
    fn rec(
        f: &mut impl FnMut(f64) -> f64,
        a: f64,
        b: f64,
        whole: (f64, f64),
        abs_tol: f64,
        rel_tol: f64,
        depth: u32,
    ) -> f64 {
        let (val, err) = whole;
        if err <= abs_tol.max(rel_tol * val.abs()) || depth == 0 {
            return val;
        }
        let m = 0.5 * (a + b);
        let left = gk15(f, a, m);
        let right = gk15(f, m, b);
        rec(f, a, m, left, 0.5 * abs_tol, rel_tol, depth - 1) + rec(f, m, b, right, 0.5 * abs_tol, rel_tol, depth - 1)
    }
    if a == b {
        return 0.0;
    }
    let whole = gk15(&mut f, a, b);
    rec(&mut f, a, b, whole, abs_tol, rel_tol, 40)
}

/// `F(u, v) = ∫₀ᵛ exp(-u·tan ξ) dξ`.
pub fn f_integral(u: f64, v: f64) -> f64 {
    integrate(|xi| (-u * xi.tan()).exp(), 0.0, v, 1e-14, 1e-12)
}

/// Isotropic single scattering gathered along `origin + x·dir`, `x ∈ [0, length]`,
/// from a point source of unit intensity at `source`:
/// `∫ b/(4π)·exp(-c(x + r))/r² dx` with `r` the distance to the source.
pub fn ray_scatter(origin: &Vec3, dir: &Vec3, length: f64, source: &Vec3, medium: &Medium) -> f64 {
    let (b, c) = (medium.scattering(), medium.extinction());
    let to_source = source - origin;
    let f = |x: f64| {
        let r2 = (to_source - dir * x).norm_squared();
        b / (4.0 * PI) * (-c * (x + r2.sqrt())).exp() / r2
    };
    // Split at the closest approach so the peak sits on a panel boundary.
    let closest = dir.dot(&to_source).clamp(0.0, length);
    let scale = b / (4.0 * PI) / to_source.norm_squared().max(1e-300);
    let tol = 1e-13 * scale;
    integrate(f, 0.0, closest, tol, 1e-10) + integrate(f, closest, length, tol, 1e-10)
}

/// Backscatter along a viewing ray from the camera at the origin.
pub fn backscatter(ray: &Vec3, length: f64, source: &Vec3, intensity: f64, medium: &Medium) -> f64 {
    intensity * ray_scatter(&Vec3::zeros(), ray, length, source, medium)
}

/// Intersection of the ray `t·dir` with the plane through `point` with normal `normal`.
pub fn ray_plane(dir: &Vec3, point: &Vec3, normal: &Vec3) -> Option<f64> {
    let denom = normal.dot(dir);
    if denom.abs() < 1e-15 {
        return None;
    }
    Some(normal.dot(point) / denom)
}

/// Area of the facet cut from the plane by the frustum of pixel `(x, y)`,
/// from the projected pixel corners.
pub fn facet_area(camera: &Camera, x: usize, y: usize, point: &Vec3, normal: &Vec3) -> f64 {
    let corners: Vec<Vec3> = [(-0.5, -0.5), (0.5, -0.5), (0.5, 0.5), (-0.5, 0.5)]
        .iter()
        .map(|&(dx, dy)| {
            let d = Vec3::new(
                (x as f64 + dx - camera.cx) / camera.fx,
                (y as f64 + dy - camera.cy) / camera.fy,
                1.0,
            );
            d * ray_plane(&d, point, normal).expect("pixel corner misses the plane")
        })
        .collect();
    0.5 * ((corners[2] - corners[0]).cross(&(corners[3] - corners[1]))).norm()
}

/// A planar scene over the whole image: the plane through `point` with unit
/// `normal` (facing the camera), unit albedo.
pub fn plane_scene(camera: &Camera, point: Vec3, normal: Vec3) -> Scene {
    let (w, h) = (camera.width, camera.height);
    let depth = Grid::from_fn(w, h, |x, y| {
        let d = Vec3::new((x as f64 - camera.cx) / camera.fx, (y as f64 - camera.cy) / camera.fy, 1.0);
        ray_plane(&d, &point, &normal).expect("plane parallel to a pixel ray")
    });
    Scene {
        depth,
        normals: Grid::filled(w, h, normal),
        albedo: Grid::filled(w, h, 1.0),
        mask: Grid::filled(w, h, true),
    }
}

/// Gaussian elimination with partial pivoting on a row-major copy.
pub fn gauss_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.iter().zip(b).map(|(row, &r)| row.iter().copied().chain([r]).collect()).collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        m.swap(col, pivot);
        let p = m[col][col];
        assert!(p != 0.0, "singular test matrix");
        for row in col + 1..n {
            let factor = m[row][col] / p;
            if factor != 0.0 {
                for k in col..=n {
                    m[row][k] -= factor * m[col][k];
                }
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| m[row][k] * x[k]).sum();
        x[row] = (m[row][n] - s) / m[row][row];
    }
    x
}

pub fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

/// Minimal PFM parser: header tokens, then raw floats with rows bottom-up.
pub fn parse_pfm(bytes: &[u8]) -> (usize, usize, usize, Vec<f32>) {
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).unwrap().to_string());
    }
    pos += 1;
    let channels = match fields[0].as_str() {
        "PF" => 3,
        "Pf" => 1,
        other => panic!("not a PFM: {other}"),
    };
    let w: usize = fields[1].parse().unwrap();
    let h: usize = fields[2].parse().unwrap();
    let little = fields[3].parse::<f64>().unwrap() < 0.0;
    let raw = &bytes[pos..];
    assert_eq!(raw.len(), w * h * channels * 4);
    let row_len = w * channels;
    let mut out = vec![0f32; w * h * channels];
    for (i, chunk) in raw.chunks_exact(4).enumerate() {
        let b = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little { f32::from_le_bytes(b) } else { f32::from_be_bytes(b) };
        let (file_row, col) = (i / row_len, i % row_len);
        out[(h - 1 - file_row) * row_len + col] = v;
    }
    (w, h, channels, out)
}
