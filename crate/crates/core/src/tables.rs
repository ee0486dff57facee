//! Precomputed 2D lookup tables for the single-scattering integrals.
//!
//! `TableF` stores `F(u, v) = ∫₀ᵛ exp(-u·tan ξ) dξ`, the line integral that turns
//! airlight along a viewing ray into closed form. `TableG` stores the
//! hemispherical integral of that airlight weighted by the cosine to the surface
//! normal, as a function of the optical thickness `T` between source and surface
//! and `μ = n·l`.
//!
//! Both tables are immutable after construction and interpolated bilinearly.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::OnceLock;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;

/// Upper end of the tabulated `v` range; `tan ξ` diverges at `π/2`.
pub const V_MAX: f64 = FRAC_PI_2 - 1e-4;

pub const DEFAULT_F_SAMPLES: usize = 1024;
pub const DEFAULT_U_MAX: f64 = 10.0;
pub const DEFAULT_G_SAMPLES: usize = 256;
pub const DEFAULT_T_MIN: f64 = 1e-3;
pub const DEFAULT_T_MAX: f64 = 20.0;

/// Widest Gauss–Legendre panel used when integrating `F` along `v`.
const F_MAX_PANEL: f64 = 2e-3;
const GL_ORDER: usize = 8;

const MAGIC: &[u8; 8] = b"SSTABLES";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct TableF {
    u_grid: Vec<f64>,
    v_grid: Vec<f64>,
    /// Row-major by `u`: `values[i * v_grid.len() + j] = F(u_i, v_j)`.
    values: Vec<f64>,
}

impl TableF {
    /// Tabulates `F` on a linear `u` grid over `[0, u_max]` and a linear `v` grid over `[0, V_MAX]`.
    pub fn build(u_samples: usize, v_samples: usize, u_max: f64) -> Result<Self> {
        if u_samples < 2 || v_samples < 2 {
            return Err(Error::InvalidParameter(format!(
                "table F needs at least 2x2 samples, got {u_samples}x{v_samples}"
            )));
        }
        if !(u_max > 0.0 && u_max.is_finite()) {
            return Err(Error::InvalidParameter(format!("u_max must be positive, got {u_max}")));
        }
        let u_grid = linspace(0.0, u_max, u_samples);
        let v_grid = linspace(0.0, V_MAX, v_samples);
        let rule = GaussLegendre::new(GL_ORDER);

        let rows: Vec<Vec<f64>> = u_grid
            .par_iter()
            .map(|&u| {
                let mut row = Vec::with_capacity(v_samples);
                let mut acc = 0.0;
                row.push(0.0);
                for w in v_grid.windows(2) {
                    let (a, b) = (w[0], w[1]);
                    let panels = ((b - a) / F_MAX_PANEL).ceil().max(1.0) as usize;
                    acc += rule.composite(a, b, panels, |xi| (-u * xi.tan()).exp());
                    row.push(acc);
                }
                row
            })
            .collect();

        let mut values = Vec::with_capacity(u_samples * v_samples);
        for (i, row) in rows.into_iter().enumerate() {
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::TableConstruction {
                    table: "F",
                    row: i,
                    col: j,
                });
            }
            values.extend(row);
        }
        Ok(TableF {
            u_grid,
            v_grid,
            values,
        })
    }

    /// The default 1024×1024 table over `u ∈ [0, 10]`.
    pub fn build_default() -> Result<Self> {
        Self::build(DEFAULT_F_SAMPLES, DEFAULT_F_SAMPLES, DEFAULT_U_MAX)
    }

    pub fn u_grid(&self) -> &[f64] {
        &self.u_grid
    }

    pub fn v_grid(&self) -> &[f64] {
        &self.v_grid
    }

    pub fn u_max(&self) -> f64 {
        *self.u_grid.last().unwrap()
    }

    #[inline]
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.v_grid.len() + j]
    }

    /// Checked lookup: `u ≥ 0`, `0 ≤ v < π/2`. `u` beyond the grid clamps to `u_max`
    /// and `v` in `[V_MAX, π/2)` clamps to `V_MAX`.
    pub fn lookup(&self, u: f64, v: f64) -> Result<f64> {
        if !(u >= 0.0) || u.is_infinite() {
            return Err(Error::Domain(format!("F lookup needs u >= 0, got {u}")));
        }
        if !(0.0..FRAC_PI_2).contains(&v) {
            return Err(Error::Domain(format!("F lookup needs v in [0, pi/2), got {v}")));
        }
        Ok(self.eval(u, v))
    }

    /// Unchecked bilinear interpolation; arguments are clamped into the grid.
    #[inline]
    pub fn eval(&self, u: f64, v: f64) -> f64 {
        let (i, s) = locate_uniform(&self.u_grid, u);
        let (j, t) = locate_uniform(&self.v_grid, v);
        let nv = self.v_grid.len();
        let f00 = self.values[i * nv + j];
        let f01 = self.values[i * nv + j + 1];
        let f10 = self.values[(i + 1) * nv + j];
        let f11 = self.values[(i + 1) * nv + j + 1];
        let r0 = f00 + t * (f01 - f00);
        let r1 = f10 + t * (f11 - f10);
        r0 + s * (r1 - r0)
    }

    /// `F(u, v_hi) - F(u, v_lo)`.
    ///
    /// Interpolated from the table except when the whole interval lies close to
    /// `π/2`: there the two values nearly cancel and the integral is taken directly.
    #[inline]
    pub fn difference(&self, u: f64, v_hi: f64, v_lo: f64) -> f64 {
        if v_lo >= DIRECT_V_LO && v_hi > v_lo {
            return f_difference_direct(u, v_hi, v_lo);
        }
        self.eval(u, v_hi) - self.eval(u, v_lo)
    }
}

/// Lower end above which [`TableF::difference`] integrates directly.
const DIRECT_V_LO: f64 = 1.0;

/// `∫ exp(-u·tan ξ) dξ` over `[v_lo, v_hi]`, in `η = π/2 - ξ` on panels that
/// double in width away from `η = 0`, where the integrand behaves like `exp(-u/η)`.
pub fn f_difference_direct(u: f64, v_hi: f64, v_lo: f64) -> f64 {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    let rule = RULE.get_or_init(|| GaussLegendre::new(GL_ORDER));
    let eta_hi = FRAC_PI_2 - v_lo;
    // Below u/40 the integrand is under exp(-40).
    let mut lo = (FRAC_PI_2 - v_hi).max(u / 40.0).max(1e-12);
    if lo >= eta_hi {
        return 0.0;
    }
    let mut sum = 0.0;
    while lo < eta_hi {
        let hi = (2.0 * lo).min(eta_hi);
        sum += rule.integrate(lo, hi, |eta| {
            let (s, c) = eta.sin_cos();
            (-u * c / s).exp()
        });
        lo = hi;
    }
    sum
}

/// Options for the hemisphere quadrature behind [`TableG`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GQuadrature {
    /// Composite Gauss–Legendre panels over the polar angle `γ' ∈ [0, π]`
    /// measured from the source direction.
    pub polar_panels: usize,
    /// Gauss–Legendre nodes over the lit azimuth arc at each polar angle.
    pub azimuth_nodes: usize,
    /// Geometric refinements of the inner line integral towards `ξ = π/2`.
    pub line_refinements: usize,
}

impl Default for GQuadrature {
    fn default() -> Self {
        GQuadrature {
            polar_panels: 128,
            azimuth_nodes: 8,
            line_refinements: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableG {
    t_grid: Vec<f64>,
    ln_t_grid: Vec<f64>,
    mu_grid: Vec<f64>,
    /// Row-major by `T`.
    values: Vec<f64>,
}

impl TableG {
    /// Tabulates `G` on `t_samples` log-spaced optical thicknesses over
    /// `[t_min, t_max]` and `mu_samples` linear values of `n·l` over `[-1, 1]`.
    pub fn build(
        t_samples: usize,
        mu_samples: usize,
        t_min: f64,
        t_max: f64,
        quad: GQuadrature,
    ) -> Result<Self> {
        if t_samples < 2 || mu_samples < 2 {
            return Err(Error::InvalidParameter(format!(
                "table G needs at least 2x2 samples, got {t_samples}x{mu_samples}"
            )));
        }
        if !(t_min > 0.0 && t_max > t_min && t_max.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "table G needs 0 < t_min < t_max, got [{t_min}, {t_max}]"
            )));
        }
        if quad.polar_panels == 0 || quad.azimuth_nodes == 0 {
            return Err(Error::InvalidParameter("empty G quadrature".into()));
        }
        let t_grid = logspace(t_min, t_max, t_samples);
        let mu_grid = linspace(-1.0, 1.0, mu_samples);

        let rule = GaussLegendre::new(GL_ORDER);
        let mut polar = Vec::with_capacity(quad.polar_panels * GL_ORDER);
        let h = PI / quad.polar_panels as f64;
        for k in 0..quad.polar_panels {
            rule.push_nodes(h * k as f64, h * (k + 1) as f64, &mut polar);
        }

        // Lit-arc azimuth weight per (μ, γ'), independent of T.
        let azimuth = GaussLegendre::new(quad.azimuth_nodes);
        let arc: Vec<Vec<f64>> = mu_grid
            .iter()
            .map(|&mu| {
                polar
                    .iter()
                    .map(|&(gamma, w)| w * lit_arc_integral(mu, gamma, &azimuth))
                    .collect()
            })
            .collect();

        let rows: Vec<Vec<f64>> = t_grid
            .par_iter()
            .map(|&t| {
                let line: Vec<f64> = polar
                    .iter()
                    .map(|&(gamma, _)| airlight_to_infinity(t, gamma, quad.line_refinements, &rule))
                    .collect();
                arc.iter()
                    .map(|weights| weights.iter().zip(&line).map(|(w, l)| w * l).sum())
                    .collect()
            })
            .collect();

        let mut values = Vec::with_capacity(t_samples * mu_samples);
        for (i, row) in rows.into_iter().enumerate() {
            if let Some(j) = row.iter().position(|v: &f64| !v.is_finite()) {
                return Err(Error::TableConstruction {
                    table: "G",
                    row: i,
                    col: j,
                });
            }
            values.extend(row);
        }
        let ln_t_grid = t_grid.iter().map(|t| t.ln()).collect();
        Ok(TableG {
            t_grid,
            ln_t_grid,
            mu_grid,
            values,
        })
    }

    /// The default 256×256 table over `T ∈ [1e-3, 20]`.
    pub fn build_default() -> Result<Self> {
        Self::build(
            DEFAULT_G_SAMPLES,
            DEFAULT_G_SAMPLES,
            DEFAULT_T_MIN,
            DEFAULT_T_MAX,
            GQuadrature::default(),
        )
    }

    pub fn t_grid(&self) -> &[f64] {
        &self.t_grid
    }

    pub fn mu_grid(&self) -> &[f64] {
        &self.mu_grid
    }

    #[inline]
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.mu_grid.len() + j]
    }

    /// Bilinear lookup, linear in `ln T` and `μ`. Out-of-range arguments are clamped.
    pub fn lookup(&self, t: f64, mu: f64) -> f64 {
        let t_lo = self.t_grid[0];
        let t_hi = *self.t_grid.last().unwrap();
        let t = if t < t_lo || t > t_hi {
            log::trace!("G lookup clamps T={t} into [{t_lo}, {t_hi}]");
            t.clamp(t_lo, t_hi)
        } else {
            t
        };
        let mu = mu.clamp(-1.0, 1.0);
        let (i, s) = locate_sorted(&self.ln_t_grid, t.ln());
        let (j, r) = locate_uniform(&self.mu_grid, mu);
        let nm = self.mu_grid.len();
        let g00 = self.values[i * nm + j];
        let g01 = self.values[i * nm + j + 1];
        let g10 = self.values[(i + 1) * nm + j];
        let g11 = self.values[(i + 1) * nm + j + 1];
        (1.0 - s) * ((1.0 - r) * g00 + r * g01) + s * ((1.0 - r) * g10 + r * g11)
    }
}

/// Airlight reaching a point from a direction at angle `gamma` to the source,
/// integrated to infinity: `exp(-T cos γ)·[F(T sin γ, π/2) - F(T sin γ, γ/2)]`.
///
/// Evaluated as a single line integral whose exponent stays non-positive, so the
/// large `exp(-T cos γ)` factor behind the source never multiplies a small
/// difference of tabulated values.
pub fn airlight_to_infinity(t: f64, gamma: f64, refinements: usize, rule: &GaussLegendre) -> f64 {
    let a = 0.5 * gamma;
    let b = FRAC_PI_2;
    let len = b - a;
    if len <= 0.0 {
        return 0.0;
    }
    let f = |xi: f64| {
        let c = xi.cos();
        if c <= 0.0 {
            0.0
        } else {
            (-t * (gamma - xi).cos() / c).exp()
        }
    };
    // Panels shrink geometrically towards ξ = π/2 where the integrand cuts off.
    let mut sum = 0.0;
    let mut lo = a;
    for k in 1..=refinements {
        let hi = b - len * 0.5f64.powi(k as i32);
        sum += rule.integrate(lo, hi, f);
        lo = hi;
    }
    sum + rule.integrate(lo, b, f)
}

/// `∫ max(n·ω, 0) dψ` over the azimuth `ψ` of directions at polar angle `gamma`
/// around a source with `n·l = mu`.
fn lit_arc_integral(mu: f64, gamma: f64, rule: &GaussLegendre) -> f64 {
    let a = mu * gamma.cos();
    let b = (1.0 - mu * mu).max(0.0).sqrt() * gamma.sin();
    if a >= b {
        return 2.0 * PI * a;
    }
    if a <= -b {
        return 0.0;
    }
    let half = (-a / b).clamp(-1.0, 1.0).acos();
    rule.integrate(-half, half, |psi| (a + b * psi.cos()).max(0.0))
}

/// Both lookup tables, bundled for the renderer and the reconstruction.
#[derive(Debug, Clone, PartialEq)]
pub struct Tables {
    pub f: TableF,
    pub g: TableG,
}

impl Tables {
    pub fn build_default() -> Result<Self> {
        Ok(Tables {
            f: TableF::build_default()?,
            g: TableG::build_default()?,
        })
    }

    /// Loads `path` if it exists, otherwise builds the default tables and writes them there.
    pub fn load_or_build(path: &Path) -> Result<Self> {
        if path.exists() {
            return load_tables(path);
        }
        let tables = Self::build_default()?;
        save_tables(path, &tables)?;
        Ok(tables)
    }
}

pub fn save_tables(path: &Path, tables: &Tables) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    write_block(&mut buf, &tables.f.u_grid, &tables.f.v_grid, &tables.f.values);
    write_block(&mut buf, &tables.g.t_grid, &tables.g.mu_grid, &tables.g.values);
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&buf).map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn load_tables(path: &Path) -> Result<Tables> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_tables(&bytes)
}

pub fn decode_tables(bytes: &[u8]) -> Result<Tables> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::TableFormat("bad magic bytes".into()));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::TableVersion {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let (u_grid, v_grid, f_values) = read_block(&mut r, "F")?;
    let (t_grid, mu_grid, g_values) = read_block(&mut r, "G")?;
    if r.pos != bytes.len() {
        return Err(Error::TableFormat(format!(
            "{} trailing bytes",
            bytes.len() - r.pos
        )));
    }
    if t_grid.iter().any(|&t| t <= 0.0) {
        return Err(Error::TableFormat("G grid has non-positive T".into()));
    }
    let ln_t_grid = t_grid.iter().map(|t| t.ln()).collect();
    Ok(Tables {
        f: TableF {
            u_grid,
            v_grid,
            values: f_values,
        },
        g: TableG {
            t_grid,
            ln_t_grid,
            mu_grid,
            values: g_values,
        },
    })
}

fn write_block(buf: &mut Vec<u8>, rows: &[f64], cols: &[f64], values: &[f64]) {
    buf.extend_from_slice(&(rows.len() as u32).to_le_bytes());
    buf.extend_from_slice(&(cols.len() as u32).to_le_bytes());
    for v in rows.iter().chain(cols).chain(values) {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

type Block = (Vec<f64>, Vec<f64>, Vec<f64>);

fn read_block(r: &mut Reader<'_>, name: &str) -> Result<Block> {
    let nr = r.u32()? as usize;
    let nc = r.u32()? as usize;
    if nr < 2 || nc < 2 {
        return Err(Error::TableFormat(format!("table {name} has {nr}x{nc} grid")));
    }
    let rows = r.f64s(nr)?;
    let cols = r.f64s(nc)?;
    let values = r.f64s(nr.checked_mul(nc).ok_or_else(|| {
        Error::TableFormat(format!("table {name} dimensions overflow"))
    })?)?;
    if rows.iter().chain(&cols).chain(&values).any(|v| !v.is_finite()) {
        return Err(Error::TableFormat(format!("table {name} has non-finite payload")));
    }
    if rows.windows(2).any(|w| w[1] <= w[0]) || cols.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::TableFormat(format!("table {name} grid is not increasing")));
    }
    Ok((rows, cols, values))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::TableFormat("truncated file".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| {
            Error::TableFormat("length overflow".into())
        })?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

pub(crate) fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    let step = (b - a) / (n - 1) as f64;
    (0..n)
        .map(|i| if i == n - 1 { b } else { a + step * i as f64 })
        .collect()
}

fn logspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    let (la, lb) = (a.ln(), b.ln());
    linspace(la, lb, n)
        .into_iter()
        .enumerate()
        .map(|(i, l)| match i {
            0 => a,
            _ if i == n - 1 => b,
            _ => l.exp(),
        })
        .collect()
}

/// Cell index and fractional offset on a uniformly spaced grid, clamped to the grid.
#[inline]
fn locate_uniform(grid: &[f64], x: f64) -> (usize, f64) {
    let n = grid.len();
    let lo = grid[0];
    let hi = grid[n - 1];
    if !(x > lo) {
        return (0, 0.0);
    }
    if x >= hi {
        return (n - 2, 1.0);
    }
    let pos = (x - lo) / (hi - lo) * (n - 1) as f64;
    let mut i = (pos as usize).min(n - 2);
    // Guard against rounding in `pos` near cell edges.
    if x < grid[i] {
        i -= 1;
    } else if x >= grid[i + 1] && i + 2 < n {
        i += 1;
    }
    let t = (x - grid[i]) / (grid[i + 1] - grid[i]);
    (i, t.clamp(0.0, 1.0))
}

#[inline]
fn locate_sorted(grid: &[f64], x: f64) -> (usize, f64) {
    // ln-spaced grids are uniform in their own coordinate.
    locate_uniform(grid, x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_f() -> TableF {
        TableF::build(64, 128, 10.0).unwrap()
    }

    #[test]
    fn f_is_zero_on_v_axis_and_identity_at_u_zero() {
        let t = small_f();
        for i in 0..t.u_grid.len() {
            assert_eq!(t.value(i, 0), 0.0);
        }
        for (j, &v) in t.v_grid.iter().enumerate() {
            assert!((t.value(0, j) - v).abs() < 1e-12);
        }
    }

    #[test]
    fn f_monotone_in_both_axes() {
        let t = small_f();
        let nv = t.v_grid.len();
        for i in 0..t.u_grid.len() {
            for j in 1..nv {
                assert!(t.value(i, j) >= t.value(i, j - 1));
                if i > 0 {
                    assert!(t.value(i, j) <= t.value(i - 1, j));
                }
            }
        }
    }

    #[test]
    fn f_lookup_exact_at_nodes() {
        let t = small_f();
        for i in (0..t.u_grid.len()).step_by(7) {
            for j in (0..t.v_grid.len()).step_by(11) {
                let got = t.lookup(t.u_grid[i], t.v_grid[j]).unwrap();
                assert_eq!(got.to_bits(), t.value(i, j).to_bits(), "node ({i},{j})");
            }
        }
    }

    #[test]
    fn f_lookup_rejects_out_of_domain_v() {
        let t = small_f();
        assert!(matches!(t.lookup(1.0, -0.1), Err(Error::Domain(_))));
        assert!(matches!(t.lookup(1.0, FRAC_PI_2), Err(Error::Domain(_))));
        assert!(matches!(t.lookup(-1.0, 0.2), Err(Error::Domain(_))));
        assert!(t.lookup(1.0, FRAC_PI_2 - 1e-6).is_ok());
        // u beyond the grid clamps.
        assert_eq!(t.lookup(50.0, 0.7).unwrap(), t.lookup(10.0, 0.7).unwrap());
    }

    #[test]
    fn f_lookup_monotone_sweep() {
        let t = small_f();
        let mut prev = 0.0;
        for k in 0..2000 {
            let v = V_MAX * k as f64 / 1999.0;
            let f = t.lookup(0.5, v).unwrap();
            assert!(f >= prev);
            prev = f;
        }
    }

    #[test]
    fn build_rejects_bad_parameters() {
        assert!(TableF::build(1, 10, 1.0).is_err());
        assert!(TableF::build(10, 10, 0.0).is_err());
        assert!(TableG::build(10, 10, 0.0, 1.0, GQuadrature::default()).is_err());
    }

    #[test]
    fn lit_arc_limits() {
        let rule = GaussLegendre::new(8);
        // Source along the normal: the whole ring is lit with n·ω = cos γ.
        let w = lit_arc_integral(1.0, 0.3, &rule);
        assert!((w - 2.0 * PI * 0.3f64.cos()).abs() < 1e-12);
        // Fully below the horizon.
        assert_eq!(lit_arc_integral(1.0, 2.0, &rule), 0.0);
        // Source in the tangent plane: half of the ring sees cos ψ·sin γ.
        let w = lit_arc_integral(0.0, FRAC_PI_2, &rule);
        assert!((w - 2.0).abs() < 1e-9);
    }

    #[test]
    fn g_lookup_exact_at_nodes_and_clamps() {
        let g = TableG::build(8, 9, 0.01, 5.0, GQuadrature::default()).unwrap();
        for i in 0..8 {
            for j in 0..9 {
                let got = g.lookup(g.t_grid[i], g.mu_grid[j]);
                assert_eq!(got.to_bits(), g.value(i, j).to_bits());
            }
        }
        assert_eq!(g.lookup(100.0, 1.0), g.lookup(5.0, 1.0));
        assert_eq!(g.lookup(1e-9, 0.5), g.lookup(0.01, 0.5));
    }

    #[test]
    fn locate_uniform_handles_edges() {
        let grid = linspace(0.0, 1.0, 11);
        assert_eq!(locate_uniform(&grid, -1.0), (0, 0.0));
        assert_eq!(locate_uniform(&grid, 2.0), (9, 1.0));
        let (i, t) = locate_uniform(&grid, 0.3);
        assert!(i == 2 || i == 3);
        assert!((grid[i] + t * 0.1 - 0.3).abs() < 1e-15);
    }
}
