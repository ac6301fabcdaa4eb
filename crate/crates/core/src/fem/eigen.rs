use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::cg::pcg;
use super::sparse::SparseOperator;
use super::{axpy, dot, norm};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct EigOptions {
    /// Relative residual target.
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    /// Block size beyond the deflated pairs.
    pub extra: usize,
    /// Full-length vector placed first in the starting block.
    pub guess: Option<Vec<f64>>,
}

impl Default for EigOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 2000, seed: 0, extra: 4, guess: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralResult {
    pub eigenvalue: f64,
    /// Full-length field, zero on Dirichlet vertices, `xᵀMx = 1`.
    pub eigenfunction: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

/// Smallest generalized eigenpair of `K x = λ M x` above the `skip` lowest
/// ones, on `{x : cᵀx = 0 for every constraint c}`, optionally restricted to
/// the vertices where `dirichlet` is false.
pub fn eig_smallest(
    k: &SparseOperator,
    m: &SparseOperator,
    constraints: &[Vec<f64>],
    dirichlet: Option<&[bool]>,
    skip: usize,
) -> Result<SpectralResult> {
    eig_smallest_with(k, m, constraints, dirichlet, skip, &EigOptions::default())
}

/// Shift-inverted block subspace iteration with Rayleigh-Ritz extraction.
///
/// Linear constraints are imposed exactly inside the inverse: each step
/// solves `A y = r + Cν`, `Cᵀy = 0` with `A = K + σM` through the Schur
/// complement `CᵀA⁻¹C`.
pub fn eig_smallest_with(
    k: &SparseOperator,
    m: &SparseOperator,
    constraints: &[Vec<f64>],
    dirichlet: Option<&[bool]>,
    skip: usize,
    opts: &EigOptions,
) -> Result<SpectralResult> {
    eig_smallest_updated(k, &[], m, constraints, dirichlet, skip, opts)
}

/// As [`eig_smallest_with`] for the operator `K + Σ c_j w_j w_jᵀ` with
/// nonnegative weights `c_j`.
pub fn eig_smallest_updated(
    k: &SparseOperator,
    updates: &[(f64, Vec<f64>)],
    m: &SparseOperator,
    constraints: &[Vec<f64>],
    dirichlet: Option<&[bool]>,
    skip: usize,
    opts: &EigOptions,
) -> Result<SpectralResult> {
    let full = k.dim();
    let free: Vec<usize> = match dirichlet {
        Some(mask) => (0..full).filter(|&i| !mask[i]).collect(),
        None => (0..full).collect(),
    };
    let (kr, mr) = match dirichlet {
        Some(_) => (k.restrict(&free), m.restrict(&free)),
        None => (k.clone(), m.clone()),
    };
    let cons: Vec<Vec<f64>> = constraints.iter().map(|c| free.iter().map(|&i| c[i]).collect()).collect();
    let ups: Vec<(f64, Vec<f64>)> = updates
        .iter()
        .map(|(c, w)| (*c, free.iter().map(|&i| w[i]).collect()))
        .collect();
    let apply_k = |x: &[f64], out: &mut [f64]| {
        kr.mul_into(x, out);
        for (c, w) in &ups {
            axpy(c * dot(w, x), w, out);
        }
    };
    let mul_k = |x: &[f64]| {
        let mut out = vec![0.0; x.len()];
        apply_k(x, &mut out);
        out
    };
    let n = free.len();
    let nc = cons.len();
    if n <= nc + skip {
        return Err(Error::Precondition(format!(
            "{n} free unknowns cannot hold {nc} constraints and {skip} deflated pairs"
        )));
    }
    let block = (skip + opts.extra).min(n - nc);

    let total_mass: f64 = mr.mul(&vec![1.0; n]).iter().sum();
    let sigma = 1.0 / total_mass;
    let a = kr.combine(1.0, &mr, sigma);
    let mut diag = a.diagonal();
    for (c, w) in &ups {
        for (d, wi) in diag.iter_mut().zip(w) {
            *d += c * wi * wi;
        }
    }
    let apply_a = |x: &[f64], out: &mut [f64]| {
        a.mul_into(x, out);
        for (c, w) in &ups {
            axpy(c * dot(w, x), w, out);
        }
    };
    let inv = |r: &[f64]| -> Result<Vec<f64>> { pcg(apply_a, &diag, r, None, 1e-12, 20 * n + 200, false).map(|p| p.0) };

    let z: Vec<Vec<f64>> = cons.iter().map(|c| inv(c)).collect::<Result<_>>()?;
    let g = DMatrix::from_fn(nc, nc, |i, j| dot(&cons[i], &z[j]));
    let g_inv = g
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Precondition("constraint vectors are linearly dependent".into()))?;
    let cc = DMatrix::from_fn(nc, nc, |i, j| dot(&cons[i], &cons[j]));
    let cc_inv = cc
        .try_inverse()
        .ok_or_else(|| Error::Precondition("constraint vectors are linearly dependent".into()))?;
    // least-squares removal of the constraint span
    let project = |x: &mut [f64]| {
        if nc == 0 {
            return;
        }
        let w = DVector::from_iterator(nc, cons.iter().map(|c| dot(c, x)));
        let mu = &cc_inv * w;
        for (j, c) in cons.iter().enumerate() {
            axpy(-mu[j], c, x);
        }
    };
    let constrained_inv = |r: &[f64]| -> Result<Vec<f64>> {
        let mut y = inv(r)?;
        if nc > 0 {
            let w = DVector::from_iterator(nc, cons.iter().map(|c| dot(c, &y)));
            let nu = -(&g_inv * w);
            for (j, zj) in z.iter().enumerate() {
                axpy(nu[j], zj, &mut y);
            }
        }
        Ok(y)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut x: Vec<Vec<f64>> = (0..block)
        .map(|j| {
            let mut v: Vec<f64> = match (&opts.guess, j) {
                (Some(g), 0) => free.iter().map(|&i| g[i]).collect(),
                _ => (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            };
            project(&mut v);
            v
        })
        .collect();
    m_orthonormalize(&mr, &mut x)?;

    let mut history = Vec::new();
    for it in 1..=opts.max_iter {
        let mut y: Vec<Vec<f64>> = x.iter().map(|xi| constrained_inv(&mr.mul(xi))).collect::<Result<_>>()?;
        for yi in &mut y {
            project(yi);
        }
        m_orthonormalize(&mr, &mut y)?;
        let ky: Vec<Vec<f64>> = y.iter().map(|yi| mul_k(yi)).collect();
        let small = DMatrix::from_fn(block, block, |i, j| 0.5 * (dot(&y[i], &ky[j]) + dot(&y[j], &ky[i])));
        let eig = SymmetricEigen::new(small);
        let mut order: Vec<usize> = (0..block).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        x = order
            .iter()
            .map(|&c| {
                let mut v = vec![0.0; n];
                for (i, yi) in y.iter().enumerate() {
                    axpy(eig.eigenvectors[(i, c)], yi, &mut v);
                }
                v
            })
            .collect();
        let lambda = eig.eigenvalues[order[skip]];
        let target = &x[skip];
        let mx = mr.mul(target);
        let mut r = mul_k(target);
        axpy(-lambda, &mx, &mut r);
        project(&mut r);
        let rel = norm(&r) / ((lambda.abs() + sigma) * norm(&mx));
        history.push(rel);
        if rel <= opts.tol {
            let mut v = target.clone();
            let scale = mr.quad_form(&v).sqrt();
            v.iter_mut().for_each(|t| *t /= scale);
            let mut eigenfunction = vec![0.0; full];
            for (j, &i) in free.iter().enumerate() {
                eigenfunction[i] = v[j];
            }
            fix_sign(m, &mut eigenfunction);
            return Ok(SpectralResult { eigenvalue: lambda, eigenfunction, residual: rel, iterations: it });
        }
    }
    Err(Error::NotConverged {
        what: "generalized eigenvalue iteration",
        iterations: opts.max_iter,
        residual: *history.last().unwrap_or(&f64::NAN),
        history,
    })
}

fn m_orthonormalize(m: &SparseOperator, vs: &mut [Vec<f64>]) -> Result<()> {
    for i in 0..vs.len() {
        for _ in 0..2 {
            let mv = m.mul(&vs[i]);
            for j in 0..i {
                let c = dot(&vs[j], &mv);
                let (head, tail) = vs.split_at_mut(i);
                axpy(-c, &head[j], &mut tail[0]);
            }
        }
        let nrm = m.quad_form(&vs[i]).max(0.0).sqrt();
        if !(nrm > 0.0 && nrm.is_finite()) {
            return Err(Error::NotConverged {
                what: "subspace orthonormalization (block collapsed)",
                iterations: 0,
                residual: nrm,
                history: vec![],
            });
        }
        vs[i].iter_mut().for_each(|t| *t /= nrm);
    }
    Ok(())
}

/// Positive mean, or a positive largest entry when the mean vanishes.
fn fix_sign(m: &SparseOperator, x: &mut [f64]) {
    let mean: f64 = m.mul(x).iter().sum();
    let scale: f64 = m.mul(&vec![1.0; x.len()]).iter().sum::<f64>().sqrt();
    let flip = if mean.abs() > 1e-8 * scale {
        mean < 0.0
    } else {
        let (mut best, mut val) = (0.0f64, 0.0);
        for &v in x.iter() {
            if v.abs() > best * (1.0 + 1e-9) {
                best = v.abs();
                val = v;
            }
        }
        val < 0.0
    };
    if flip {
        x.iter_mut().for_each(|t| *t = -*t);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::FemSpace;
    use crate::geometry::{build_mesh, refine_times, DomainSpec};

    fn space(spec: DomainSpec, levels: usize) -> FemSpace {
        FemSpace::new(&refine_times(&build_mesh(&spec).unwrap(), levels))
    }

    #[test]
    fn neumann_ground_state_is_constant() {
        let fs = space(DomainSpec::disk(1.0, 0.4), 1);
        let r = eig_smallest(&fs.stiffness, &fs.mass, &[], None, 0).unwrap();
        assert!(r.eigenvalue.abs() < 1e-8);
        let c = 1.0 / fs.area.sqrt();
        assert!(r.eigenfunction.iter().all(|v| (v - c).abs() < 1e-6));
    }

    #[test]
    fn eigenfunction_normalized_and_admissible() {
        let fs = space(DomainSpec::square(1.0, 0.25), 1);
        let r = eig_smallest(&fs.stiffness, &fs.mass, std::slice::from_ref(&fs.b), None, 0).unwrap();
        assert!((fs.mass.quad_form(&r.eigenfunction) - 1.0).abs() < 1e-10);
        assert!(fs.boundary_integral(&r.eigenfunction).abs() < 1e-8);
        let d = eig_smallest(&fs.stiffness, &fs.mass, &[], Some(&fs.on_boundary), 0).unwrap();
        assert!(fs.trace(&d.eigenfunction).iter().all(|p| p.1 == 0.0));
        assert!(d.eigenfunction.iter().all(|v| *v >= -1e-8));
    }

    #[test]
    fn square_spectrum() {
        let fs = space(DomainSpec::square(1.0, 0.25), 2);
        let pi2 = std::f64::consts::PI.powi(2);
        let mu2 = eig_smallest(&fs.stiffness, &fs.mass, &[], None, 1).unwrap();
        assert!((mu2.eigenvalue / pi2 - 1.0).abs() < 0.01, "{}", mu2.eigenvalue);
        assert!(fs.integral(&mu2.eigenfunction).abs() < 1e-8);
        let ld = eig_smallest(&fs.stiffness, &fs.mass, &[], Some(&fs.on_boundary), 0).unwrap();
        assert!((ld.eigenvalue / (2.0 * pi2) - 1.0).abs() < 0.01, "{}", ld.eigenvalue);
    }
}
