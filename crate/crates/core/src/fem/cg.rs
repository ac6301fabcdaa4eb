use super::sparse::SparseOperator;
use super::{axpy, dot, norm, FemSpace};
use crate::error::{Error, Result};

pub const DEFAULT_CG_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct CgReport {
    pub iterations: usize,
    pub residual: f64,
}

/// Jacobi-preconditioned conjugate gradients for `A x = rhs` with `A` given
/// as a matrix-free product.
///
/// With `project_constants` the residual is kept orthogonal to the constant
/// vector, which is what a consistent singular Neumann system needs.
pub fn pcg(
    apply: impl Fn(&[f64], &mut [f64]),
    diag: &[f64],
    rhs: &[f64],
    x0: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
    project_constants: bool,
) -> Result<(Vec<f64>, CgReport)> {
    let n = rhs.len();
    let rhs_norm = norm(rhs);
    let mut x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    if rhs_norm == 0.0 && x0.is_none() {
        return Ok((x, CgReport { iterations: 0, residual: 0.0 }));
    }
    let project = |v: &mut [f64]| {
        if project_constants {
            let mean = v.iter().sum::<f64>() / n as f64;
            v.iter_mut().for_each(|x| *x -= mean);
        }
    };
    let mut r = vec![0.0; n];
    apply(&x, &mut r);
    for i in 0..n {
        r[i] = rhs[i] - r[i];
    }
    project(&mut r);
    let target = tol * rhs_norm.max(f64::MIN_POSITIVE);
    let inv_diag: Vec<f64> = diag.iter().map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 }).collect();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut res = norm(&r);
    for it in 0..max_iter {
        if res <= target {
            return Ok((x, CgReport { iterations: it, residual: res / rhs_norm.max(f64::MIN_POSITIVE) }));
        }
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::NotConverged {
                what: "conjugate gradients (operator not positive definite)",
                iterations: it,
                residual: res / rhs_norm,
                history: vec![],
            });
        }
        let alpha = rz / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        project(&mut r);
        res = norm(&r);
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    if res <= target {
        return Ok((x, CgReport { iterations: max_iter, residual: res / rhs_norm }));
    }
    Err(Error::NotConverged {
        what: "conjugate gradients",
        iterations: max_iter,
        residual: res / rhs_norm,
        history: vec![],
    })
}

fn default_max_iter(n: usize) -> usize {
    10 * n + 100
}

/// Solves `A x = rhs` for symmetric positive (semi)definite `A`.
///
/// When `A 1 = 0` the system is treated as a Neumann problem: `rhs` must be
/// orthogonal to constants within `tol` and the returned solution has zero
/// mean.
pub fn solve_spd(a: &SparseOperator, rhs: &[f64], tol: f64) -> Result<Vec<f64>> {
    let n = a.dim();
    if rhs.len() != n {
        return Err(Error::Precondition(format!("rhs has length {}, operator {}", rhs.len(), n)));
    }
    let diag = a.diagonal();
    let scale = diag.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    let a1 = a.mul(&vec![1.0; n]);
    let singular = a1.iter().all(|v| v.abs() <= 1e-12 * scale);
    let mut b = rhs.to_vec();
    if singular {
        let total: f64 = b.iter().sum();
        let abs: f64 = b.iter().map(|v| v.abs()).sum();
        if total.abs() > tol * abs {
            return Err(Error::Incompatible(format!(
                "right-hand side must sum to zero for a singular operator: sum = {total:e}, sum of magnitudes = {abs:e}"
            )));
        }
        let mean = total / n as f64;
        b.iter_mut().for_each(|v| *v -= mean);
    }
    let (mut x, _) = pcg(|v, out| a.mul_into(v, out), &diag, &b, None, tol, default_max_iter(n), singular)?;
    if singular {
        let mean = x.iter().sum::<f64>() / n as f64;
        x.iter_mut().for_each(|v| *v -= mean);
    }
    Ok(x)
}

/// Weak solution of `-Δu = f` in Ω, `∂u/∂ν = g_c` on boundary component `c`,
/// normalized to `∫ u dx = 0`.
pub fn neumann_poisson(space: &FemSpace, f: f64, g: &[f64]) -> Result<Vec<f64>> {
    if g.len() != space.b_components.len() {
        return Err(Error::Precondition(format!(
            "expected {} boundary flux values, got {}",
            space.b_components.len(),
            g.len()
        )));
    }
    let source = f * space.area;
    let flux: f64 = space
        .b_components
        .iter()
        .zip(g)
        .map(|(bc, g)| g * bc.iter().sum::<f64>())
        .sum();
    let scale = source.abs().max(flux.abs());
    if (source + flux).abs() > 1e-10 * scale {
        return Err(Error::Incompatible(format!(
            "∫ f dx = {source:e} must equal -∫ g dσ = {:e}",
            -flux
        )));
    }
    let mut rhs: Vec<f64> = space.ell.iter().map(|l| f * l).collect();
    for (bc, g) in space.b_components.iter().zip(g) {
        axpy(*g, bc, &mut rhs);
    }
    if scale == 0.0 {
        return Ok(vec![0.0; space.n()]);
    }
    let mut u = solve_spd(&space.stiffness, &rhs, 1e-12)?;
    let mean = space.integral(&u) / space.area;
    u.iter_mut().for_each(|v| *v -= mean);
    Ok(u)
}
