//! Iterative and direct linear solvers.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Outcome of an iterative solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// Relative true residual `‖b − A x‖ / ‖b‖` at exit.
    pub residual: f64,
    pub converged: bool,
    pub restarts: usize,
    pub breakdown: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiCgStabParams {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for BiCgStabParams {
    fn default() -> Self {
        BiCgStabParams {
            tolerance: 1e-8,
            max_iterations: 2000,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn residual_into(apply: &mut impl FnMut(&[f64], &mut [f64]), rhs: &[f64], x: &[f64], r: &mut [f64]) {
    apply(x, r);
    for (ri, bi) in r.iter_mut().zip(rhs) {
        *ri = bi - *ri;
    }
}

/// BiCGStab for a general nonsymmetric operator given as `apply(x, out)`.
///
/// Convergence is declared on the recomputed true residual. A breakdown
/// triggers one restart from the current iterate with a perturbed shadow
/// vector; a second breakdown returns [`Error::Solve`].
pub fn bicgstab(
    mut apply: impl FnMut(&[f64], &mut [f64]),
    rhs: &[f64],
    x0: Option<&[f64]>,
    params: &BiCgStabParams,
) -> Result<(Vec<f64>, SolveReport)> {
    let n = rhs.len();
    if params.tolerance <= 0.0 || params.max_iterations == 0 {
        return Err(Error::InvalidParameter("solver tolerance and iteration cap must be positive".into()));
    }
    let mut x = match x0 {
        Some(x0) if x0.len() == n => x0.to_vec(),
        Some(x0) => {
            return Err(Error::Dimension(format!("initial guess of length {} for n = {n}", x0.len())))
        }
        None => vec![0.0; n],
    };
    let bnorm = norm(rhs);
    let mut report = SolveReport {
        iterations: 0,
        residual: 0.0,
        converged: true,
        restarts: 0,
        breakdown: false,
    };
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok((x, report));
    }

    let mut r = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut scratch = vec![0.0; n];

    residual_into(&mut apply, rhs, &x, &mut r);
    let mut shadow = r.clone();
    let mut rho = 1.0;
    let mut alpha = 1.0;
    let mut omega = 1.0;
    let tol = params.tolerance * bnorm;

    if norm(&r) <= tol {
        report.residual = norm(&r) / bnorm;
        return Ok((x, report));
    }

    while report.iterations < params.max_iterations {
        report.iterations += 1;
        let rho_new = dot(&shadow, &r);
        let broke = rho_new.abs() < 1e-300 || omega == 0.0 || !rho_new.is_finite();
        if broke {
            report.breakdown = true;
            if report.restarts >= 1 {
                residual_into(&mut apply, rhs, &x, &mut scratch);
                report.residual = norm(&scratch) / bnorm;
                report.converged = false;
                return Err(Error::Solve {
                    message: "BiCGStab broke down twice".into(),
                    report,
                });
            }
            report.restarts += 1;
            residual_into(&mut apply, rhs, &x, &mut r);
            perturb_shadow(&r, &mut shadow, report.restarts);
            rho = 1.0;
            alpha = 1.0;
            omega = 1.0;
            p.iter_mut().for_each(|e| *e = 0.0);
            v.iter_mut().for_each(|e| *e = 0.0);
            continue;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        apply(&p, &mut v);
        let sv = dot(&shadow, &v);
        if sv == 0.0 || !sv.is_finite() {
            omega = 0.0;
            continue;
        }
        alpha = rho / sv;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm(&s) <= tol {
            for i in 0..n {
                x[i] += alpha * p[i];
            }
            residual_into(&mut apply, rhs, &x, &mut r);
            if norm(&r) <= tol {
                report.residual = norm(&r) / bnorm;
                return Ok((x, report));
            }
            continue;
        }
        apply(&s, &mut t);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        for i in 0..n {
            x[i] += alpha * p[i] + omega * s[i];
            r[i] = s[i] - omega * t[i];
        }
        if norm(&r) <= tol {
            residual_into(&mut apply, rhs, &x, &mut scratch);
            if norm(&scratch) <= tol {
                report.residual = norm(&scratch) / bnorm;
                return Ok((x, report));
            }
            r.copy_from_slice(&scratch);
        }
    }

    residual_into(&mut apply, rhs, &x, &mut scratch);
    report.residual = norm(&scratch) / bnorm;
    report.converged = report.residual <= params.tolerance;
    if !report.converged {
        log::warn!(
            "BiCGStab stopped after {} iterations at relative residual {:.3e}",
            report.iterations,
            report.residual
        );
    }
    Ok((x, report))
}

fn perturb_shadow(r: &[f64], shadow: &mut [f64], salt: usize) {
    let scale = norm(r) / (r.len() as f64).sqrt();
    for (i, (sh, ri)) in shadow.iter_mut().zip(r).enumerate() {
        let jitter = ((i * 2_654_435_761 + salt * 40_503) % 1000) as f64 / 1000.0 - 0.5;
        *sh = ri + 0.5 * scale * jitter;
    }
}

/// Direct LU solve for small systems; near-singular matrices are rejected.
pub fn dense_solve(matrix: &DMatrix<f64>, rhs: &[f64]) -> Result<Vec<f64>> {
    let n = matrix.nrows();
    if matrix.ncols() != n || rhs.len() != n {
        return Err(Error::Dimension(format!(
            "{}x{} matrix with right-hand side of length {}",
            n,
            matrix.ncols(),
            rhs.len()
        )));
    }
    let lu = matrix.clone().lu();
    let u = lu.u();
    let diag = u.diagonal();
    let (lo, hi) = diag.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), d| (lo.min(d.abs()), hi.max(d.abs())));
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !condition.is_finite() || condition > 1e14 {
        return Err(Error::Singular { condition });
    }
    lu.solve(&DVector::from_column_slice(rhs))
        .map(|x| x.as_slice().to_vec())
        .ok_or(Error::Singular { condition })
}

/// Conjugate gradients for a symmetric positive (semi)definite operator.
pub fn conjugate_gradient(
    mut apply: impl FnMut(&[f64], &mut [f64]),
    rhs: &[f64],
    x0: &[f64],
    tolerance: f64,
    max_iterations: usize,
) -> (Vec<f64>, SolveReport) {
    let n = rhs.len();
    let mut x = x0.to_vec();
    let mut r = vec![0.0; n];
    residual_into(&mut apply, rhs, &x, &mut r);
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let bnorm = norm(rhs).max(f64::MIN_POSITIVE);
    let mut rr = dot(&r, &r);
    let mut iterations = 0;
    while iterations < max_iterations && rr.sqrt() > tolerance * bnorm {
        iterations += 1;
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            break;
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    let residual = rr.sqrt() / bnorm;
    (
        x,
        SolveReport {
            iterations,
            residual,
            converged: residual <= tolerance,
            restarts: 0,
            breakdown: false,
        },
    )
}
