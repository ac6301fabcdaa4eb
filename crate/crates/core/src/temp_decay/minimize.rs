use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{dot, eig_smallest_updated, pcg, EigOptions, FemSpace, SpectralResult};
use crate::heat_content::{check_m, check_schedule, vanishing_set, VanishingSet, DEFAULT_VANISH_TOL};

use super::{eig_dirichlet, eig_kappa1};

/// `[uᵀKu + (1/m)(∫_∂Ω |u| dσ)²] / uᵀMu`.
pub fn decay_quotient(space: &FemSpace, u: &[f64], m: f64) -> f64 {
    let a = space.boundary_abs_integral(u);
    (space.energy(u) + a * a / m) / space.mass.quad_form(u)
}

/// Same quotient with `|u|` replaced by `√(u² + δ²)` on the boundary.
pub fn regularized_decay_quotient(space: &FemSpace, u: &[f64], m: f64, delta: f64) -> f64 {
    let a = smooth_abs(space, u, delta).0;
    (space.energy(u) + a * a / m) / space.mass.quad_form(u)
}

/// `Σ b √(u² + δ²)` and the boundary values `√(u² + δ²)` (zero off the boundary).
fn smooth_abs(space: &FemSpace, u: &[f64], delta: f64) -> (f64, Vec<f64>) {
    let mut s = vec![0.0; u.len()];
    let mut phi = 0.0;
    for (i, &b) in space.b.iter().enumerate() {
        if b > 0.0 {
            s[i] = (u[i] * u[i] + delta * delta).sqrt();
            phi += b * s[i];
        }
    }
    (phi, s)
}

/// Relative δ values for the decay problem. Coarser smoothing than `1e-3`
/// hides the symmetry-broken minimizers behind the symmetric one.
pub const DECAY_SCHEDULE: [f64; 4] = [1e-3, 1e-4, 1e-5, 1e-6];

#[derive(Clone, Debug, PartialEq)]
pub struct DecayOptions {
    /// Relative δ values, multiplied by `1/√|Ω|`.
    pub schedule: Vec<f64>,
    /// Iteration cap per δ stage.
    pub max_iter: usize,
    /// Stationarity residual target per stage.
    pub tol: f64,
}

impl Default for DecayOptions {
    fn default() -> Self {
        Self { schedule: DECAY_SCHEDULE.to_vec(), max_iter: 2000, tol: 1e-9 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayStageLog {
    pub start: String,
    pub delta: f64,
    pub iterations: usize,
    /// Regularized objective on `uᵀMu = 1`.
    pub objective: f64,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StartLog {
    pub name: String,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayMinimizerResult {
    pub m: f64,
    pub lambda_m: f64,
    /// Minimizer with `uᵀMu = 1`.
    pub u: Vec<f64>,
    pub trace: Vec<(usize, f64)>,
    pub vanishing: VanishingSet,
    /// How the returned field was obtained: `eigenpair`, `descent` or `active-set`.
    pub method: String,
    pub starts: Vec<StartLog>,
    /// Absolute δ values used by the descent.
    pub schedule: Vec<f64>,
    pub log: Vec<DecayStageLog>,
}

impl DecayMinimizerResult {
    pub fn min_trace(&self) -> f64 {
        self.trace.iter().map(|p| p.1).fold(f64::INFINITY, f64::min)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "schema": "insulab-v1",
            "kind": "decay-minimizer",
            "m": self.m,
            "lambda_m": self.lambda_m,
            "method": self.method,
            "delta_schedule": self.schedule,
            "boundary_trace": self.trace.iter().map(|(i, v)| serde_json::json!([i, v])).collect::<Vec<_>>(),
            "vanishing_edges": self.vanishing.edges,
            "vanishing_measure": self.vanishing.measure,
            "starts": self.starts,
            "log": self.log,
        })
    }
}

/// Spectral data of one mesh shared by every `m`.
#[derive(Clone, Debug)]
pub struct DecayProblem<'a> {
    pub space: &'a FemSpace,
    pub kappa1: SpectralResult,
    pub dirichlet: SpectralResult,
}

impl<'a> DecayProblem<'a> {
    pub fn new(space: &'a FemSpace) -> Result<Self> {
        Ok(Self { space, kappa1: eig_kappa1(space)?, dirichlet: eig_dirichlet(space)? })
    }

    /// Lowest eigenpair of `(K + bbᵀ/m, M)`. Its eigenvalue bounds `λ_m` from
    /// below, with equality when the eigenfunction has a nonnegative trace.
    pub fn smooth_candidate(&self, m: f64) -> Result<SpectralResult> {
        let fs = self.space;
        let opts = EigOptions { tol: 1e-10, ..EigOptions::default() };
        eig_smallest_updated(&fs.stiffness, &[(1.0 / m, fs.b.clone())], &fs.mass, &[], None, 0, &opts)
    }

    pub fn minimize(&self, m: f64, opts: &DecayOptions, extra_starts: &[Vec<f64>]) -> Result<DecayMinimizerResult> {
        check_m(m)?;
        check_schedule(&opts.schedule)?;
        let fs = self.space;
        let n = fs.n();
        if extra_starts.iter().any(|s| s.len() != n) {
            return Err(Error::Precondition("starting field has the wrong length".into()));
        }
        let deltas: Vec<f64> = opts.schedule.iter().map(|d| d / fs.area.sqrt()).collect();

        let cand = self.smooth_candidate(m)?;
        let scale = cand.eigenfunction.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if fs.boundary_min(&cand.eigenfunction) >= -1e-12 * scale {
            let mut u = cand.eigenfunction;
            u.iter_mut().for_each(|v| *v = v.max(0.0));
            normalize(fs, &mut u);
            let lambda = decay_quotient(fs, &u, m);
            return Ok(self.finish(m, u, lambda, "eigenpair", vec![StartLog { name: "eigenpair".into(), value: lambda }], deltas, vec![]));
        }

        let mut starts: Vec<(String, Vec<f64>)> = vec![
            ("constant".into(), vec![1.0; n]),
            ("dirichlet".into(), self.dirichlet.eigenfunction.clone()),
        ];
        let w = &self.kappa1.eigenfunction;
        let lift = -fs.boundary_min(w);
        starts.push(("kappa".into(), w.iter().map(|v| v + lift).collect()));
        for (k, s) in extra_starts.iter().enumerate() {
            starts.push((format!("given-{k}"), s.clone()));
        }

        let mut best: Option<(f64, Vec<f64>)> = None;
        let mut start_log = Vec::new();
        let mut log = Vec::new();
        for (name, init) in starts {
            let mut u = init;
            if !(fs.mass.quad_form(&u) > 0.0) {
                continue;
            }
            normalize(fs, &mut u);
            for &delta in &deltas {
                log.push(descent_stage(fs, m, delta, opts, &name, &mut u)?);
            }
            let value = decay_quotient(fs, &u, m);
            start_log.push(StartLog { name, value });
            if best.as_ref().is_none_or(|b| value < b.0) {
                best = Some((value, u));
            }
        }
        let (mut lambda, mut u) = best.expect("constant start is always admissible");
        let mut method = "descent";
        if let Some((v, lv)) = self.active_set(m, &u)? {
            if lv <= lambda {
                lambda = lv;
                u = v;
                method = "active-set";
            }
        }
        let mut abs_u: Vec<f64> = u.iter().map(|v| v.abs()).collect();
        normalize(fs, &mut abs_u);
        let abs_lambda = decay_quotient(fs, &abs_u, m);
        if abs_lambda <= lambda {
            lambda = abs_lambda;
            u = abs_u;
        } else if fs.integral(&u) < 0.0 {
            u.iter_mut().for_each(|v| *v = -*v);
        }
        Ok(self.finish(m, u, lambda, method, start_log, deltas, log))
    }

    /// Exact eigenpair with the boundary vertices where `u` is negligible
    /// clamped to zero, the set being adjusted by the sign of the multipliers.
    fn active_set(&self, m: f64, u: &[f64]) -> Result<Option<(Vec<f64>, f64)>> {
        let fs = self.space;
        let cutoff = DEFAULT_VANISH_TOL * fs.boundary_max_abs(u);
        let mut clamp: Vec<bool> = (0..fs.n()).map(|i| fs.on_boundary[i] && u[i].abs() < cutoff).collect();
        let mut best: Option<(Vec<f64>, f64)> = None;
        for _ in 0..6 {
            if !clamp.iter().any(|&c| c) || clamp.iter().filter(|&&c| !c).count() < 2 {
                break;
            }
            let bf: Vec<f64> = fs.b.iter().zip(&clamp).map(|(b, &c)| if c { 0.0 } else { *b }).collect();
            let opts = EigOptions { tol: 1e-10, guess: Some(u.to_vec()), ..EigOptions::default() };
            let r = eig_smallest_updated(&fs.stiffness, &[(1.0 / m, bf.clone())], &fs.mass, &[], Some(&clamp), 0, &opts)?;
            let v = r.eigenfunction;
            let lv = decay_quotient(fs, &v, m);
            if best.as_ref().is_none_or(|b| lv < b.1) {
                best = Some((v.clone(), lv));
            }
            // multipliers s_i = m (λMv - Kv)_i / (φ b_i) must lie in [-1, 1]
            let phi = dot(&bf, &v);
            let mv = fs.mass.mul(&v);
            let kv = fs.stiffness.mul(&v);
            let mut changed = false;
            for i in 0..fs.n() {
                if !fs.on_boundary[i] {
                    continue;
                }
                if clamp[i] {
                    let s = m * (r.eigenvalue * mv[i] - kv[i]) / (phi * fs.b[i]);
                    if s.abs() > 1.0 + 1e-6 {
                        clamp[i] = false;
                        changed = true;
                    }
                } else if v[i] < 0.0 {
                    clamp[i] = true;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        Ok(best)
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(
        &self,
        m: f64,
        u: Vec<f64>,
        lambda_m: f64,
        method: &str,
        starts: Vec<StartLog>,
        schedule: Vec<f64>,
        log: Vec<DecayStageLog>,
    ) -> DecayMinimizerResult {
        let fs = self.space;
        let u: Vec<f64> = u.into_iter().map(|v| v + 0.0).collect();
        DecayMinimizerResult {
            m,
            lambda_m,
            trace: fs.trace(&u),
            vanishing: vanishing_set(fs, &u, DEFAULT_VANISH_TOL),
            method: method.into(),
            starts,
            schedule,
            log,
            u,
        }
    }
}

fn normalize(space: &FemSpace, u: &mut [f64]) {
    let s = space.mass.quad_form(u).sqrt();
    u.iter_mut().for_each(|v| *v /= s);
}

/// `uᵀKu + (1/m) φ²` for `uᵀMu = 1`.
fn value(space: &FemSpace, u: &[f64], m: f64, delta: f64) -> f64 {
    let phi = smooth_abs(space, u, delta).0;
    (space.energy(u) + phi * phi / m) / space.mass.quad_form(u)
}

/// Descent at fixed δ on `uᵀMu = 1`.
///
/// Each step minimizes the regularized quotient over
/// `span{u_k, A_k⁻¹Mu_k, u_k - u_{k-1}}` with `A_k = K + (φ_k/m) diag(b/s_k)`,
/// `s = √(u_k² + δ²)`. The gradient of the objective at `u_k` is
/// `2(A_k u_k - θ_k Mu_k)`, so the second vector is the preconditioned
/// gradient direction.
fn descent_stage(space: &FemSpace, m: f64, delta: f64, opts: &DecayOptions, name: &str, u: &mut Vec<f64>) -> Result<DecayStageLog> {
    let n = space.n();
    let kdiag = space.stiffness.diagonal();
    let bidx: Vec<usize> = (0..n).filter(|&i| space.b[i] > 0.0).collect();
    let mut prev: Option<Vec<f64>> = None;
    let mut t = value(space, u, m, delta);
    let mut history = vec![t];
    let mut residual = f64::INFINITY;
    for it in 0..opts.max_iter {
        let (phi, s) = smooth_abs(space, u, delta);
        let mut d = vec![0.0; n];
        for &i in &bidx {
            d[i] = phi / m * space.b[i] / s[i];
        }
        let apply = |x: &[f64], out: &mut [f64]| {
            space.stiffness.mul_into(x, out);
            for &i in &bidx {
                out[i] += d[i] * x[i];
            }
        };
        let diag: Vec<f64> = kdiag.iter().zip(&d).map(|(a, b)| a + b).collect();
        let mut au = vec![0.0; n];
        apply(u, &mut au);
        let theta = dot(u, &au);
        let mu = space.mass.mul(u);
        let r: Vec<f64> = au.iter().zip(&mu).map(|(a, b)| a - theta * b).collect();
        residual = (dot(&r, &r) / dot(&mu, &mu)).sqrt() / theta;
        if residual <= opts.tol {
            return Ok(DecayStageLog { start: name.into(), delta, iterations: it, objective: t, residual });
        }
        let guess: Vec<f64> = u.iter().map(|v| v / theta).collect();
        let (y, _) = pcg(apply, &diag, &mu, Some(&guess), 1e-12, 20 * n + 200, false)?;
        let mut basis = vec![u.clone(), y];
        if let Some(p) = &prev {
            basis.push(u.iter().zip(p).map(|(a, b)| a - b).collect());
        }
        let sub = Subspace::new(space, &bidx, &basis);
        let (v, tv) = sub.minimize(m, delta);
        if !(tv <= t * (1.0 + 1e-14)) {
            // roundoff-level increase: the subspace cannot resolve further progress
            if tv <= t * (1.0 + 1e-10) {
                return Ok(DecayStageLog { start: name.into(), delta, iterations: it, objective: t, residual });
            }
            return Err(Error::NotConverged {
                what: "temperature-decay descent (no decrease in the search subspace)",
                iterations: it,
                residual,
                history,
            });
        }
        prev = Some(std::mem::replace(u, v));
        let stalled = t - tv <= 1e-15 * t;
        t = tv;
        history.push(t);
        if stalled && residual < 1e3 * opts.tol {
            return Ok(DecayStageLog { start: name.into(), delta, iterations: it + 1, objective: t, residual });
        }
    }
    Ok(DecayStageLog { start: name.into(), delta, iterations: opts.max_iter, objective: t, residual })
}

/// M-orthonormal basis of a search subspace with the stiffness projected onto
/// it and the basis values at the boundary vertices.
struct Subspace<'a> {
    space: &'a FemSpace,
    q: Vec<Vec<f64>>,
    k: DMatrix<f64>,
    /// `qb[t][j]`: basis vector `j` at boundary vertex `t`
    qb: Vec<Vec<f64>>,
    b: Vec<f64>,
}

impl<'a> Subspace<'a> {
    fn new(space: &'a FemSpace, bidx: &[usize], basis: &[Vec<f64>]) -> Self {
        let mut q: Vec<Vec<f64>> = Vec::new();
        for v0 in basis {
            let mut v = v0.clone();
            for _ in 0..2 {
                let mv = space.mass.mul(&v);
                for qj in &q {
                    let c = dot(qj, &mv);
                    v.iter_mut().zip(qj).for_each(|(a, b)| *a -= c * b);
                }
            }
            let nrm = space.mass.quad_form(&v).max(0.0).sqrt();
            let base = space.mass.quad_form(v0).max(0.0).sqrt();
            if nrm > 1e-10 * base && nrm.is_finite() {
                v.iter_mut().for_each(|t| *t /= nrm);
                q.push(v);
            }
        }
        let kq: Vec<Vec<f64>> = q.iter().map(|v| space.stiffness.mul(v)).collect();
        let dim = q.len();
        let k = DMatrix::from_fn(dim, dim, |i, j| 0.5 * (dot(&q[i], &kq[j]) + dot(&q[j], &kq[i])));
        let qb = bidx.iter().map(|&i| q.iter().map(|v| v[i]).collect()).collect();
        let b = bidx.iter().map(|&i| space.b[i]).collect();
        Self { space, q, k, qb, b }
    }

    fn dim(&self) -> usize {
        self.q.len()
    }

    fn boundary_values(&self, c: &DVector<f64>) -> Vec<f64> {
        self.qb.iter().map(|row| row.iter().zip(c.iter()).map(|(a, b)| a * b).sum()).collect()
    }

    fn value(&self, c: &DVector<f64>, m: f64, delta: f64) -> f64 {
        let v = self.boundary_values(c);
        let phi: f64 = v.iter().zip(&self.b).map(|(v, b)| b * (v * v + delta * delta).sqrt()).sum();
        (c.dot(&(&self.k * c)) + phi * phi / m) / c.norm_squared()
    }

    fn gradient_hessian(&self, c: &DVector<f64>, m: f64, delta: f64) -> (DVector<f64>, DMatrix<f64>) {
        let dim = self.dim();
        let v = self.boundary_values(c);
        let mut phi = 0.0;
        let mut w = DVector::zeros(dim);
        let mut curv = DMatrix::zeros(dim, dim);
        for (t, row) in self.qb.iter().enumerate() {
            let s = (v[t] * v[t] + delta * delta).sqrt();
            phi += self.b[t] * s;
            let r = DVector::from_column_slice(row);
            w.axpy(self.b[t] * v[t] / s, &r, 1.0);
            curv += (self.b[t] * delta * delta / (s * s * s)) * &r * r.transpose();
        }
        let g = 2.0 * &self.k * c + (2.0 * phi / m) * &w;
        let h = 2.0 * &self.k + (2.0 / m) * &w * w.transpose() + (2.0 * phi / m) * curv;
        (g, h)
    }

    /// Riemannian Newton on the unit sphere of coefficients, started at the
    /// first basis vector. Returns the M-normalized field and its value.
    fn minimize(&self, m: f64, delta: f64) -> (Vec<f64>, f64) {
        let dim = self.dim();
        let mut c = DVector::zeros(dim);
        c[0] = 1.0;
        let mut f = self.value(&c, m, delta);
        for _ in 0..if dim > 1 { 50 } else { 0 } {
            let (g, h) = self.gradient_hessian(&c, m, delta);
            let z = tangent_basis(&c);
            let gr = z.transpose() * &g;
            let hr = z.transpose() * (&h - c.dot(&g) * DMatrix::identity(dim, dim)) * &z;
            let gnorm = gr.norm();
            if gnorm <= 1e-14 * f.abs().max(1e-300) {
                break;
            }
            let eig = SymmetricEigen::new(hr.clone());
            let lmin = eig.eigenvalues.min();
            let lmax = eig.eigenvalues.max().abs().max(1e-300);
            let shift = if lmin > 1e-10 * lmax { 0.0 } else { -lmin + 1e-6 * lmax };
            let mut step = DVector::zeros(dim - 1);
            for (i, ev) in eig.eigenvalues.iter().enumerate() {
                let e = eig.eigenvectors.column(i);
                step -= (e.dot(&gr) / (ev + shift)) * e;
            }
            let slope = gr.dot(&step);
            let mut alpha = 1.0;
            let mut accepted = false;
            for _ in 0..40 {
                let mut trial = &c + alpha * (&z * &step);
                trial /= trial.norm();
                let ft = self.value(&trial, m, delta);
                if ft <= f + 1e-4 * alpha * slope {
                    c = trial;
                    f = ft;
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        let mut v = vec![0.0; self.space.n()];
        for (j, qj) in self.q.iter().enumerate() {
            v.iter_mut().zip(qj).for_each(|(a, b)| *a += c[j] * b);
        }
        normalize(self.space, &mut v);
        let fv = value(self.space, &v, m, delta);
        (v, fv)
    }
}

/// Orthonormal basis of the complement of the unit vector `c`.
fn tangent_basis(c: &DVector<f64>) -> DMatrix<f64> {
    let dim = c.len();
    let mut cols: Vec<DVector<f64>> = Vec::with_capacity(dim - 1);
    for e in 0..dim {
        let mut v = DVector::zeros(dim);
        v[e] = 1.0;
        v.axpy(-c[e], c, 1.0);
        for q in &cols {
            let d = q.dot(&v);
            v.axpy(-d, q, 1.0);
        }
        let nrm = v.norm();
        if nrm > 1e-8 && cols.len() < dim - 1 {
            cols.push(v / nrm);
        }
    }
    DMatrix::from_columns(&cols)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_mesh, DomainSpec};

    #[test]
    fn tangent_basis_is_orthonormal_complement() {
        let mut c = DVector::from_vec(vec![0.3, -1.2, 0.5, 2.0]);
        c /= c.norm();
        let z = tangent_basis(&c);
        assert_eq!(z.ncols(), 3);
        assert!((z.transpose() * &z - DMatrix::<f64>::identity(3, 3)).norm() < 1e-12);
        assert!((z.transpose() * &c).norm() < 1e-12);
    }

    #[test]
    fn descent_stage_never_increases_the_objective() {
        let fs = FemSpace::new(&build_mesh(&DomainSpec::rectangle(2.0, 1.0, 0.3)).unwrap());
        let (m, delta) = (0.3, 1e-3);
        let mut u: Vec<f64> = fs.mesh.vertices.iter().map(|p| 1.0 + p[0] - 0.4 * p[1]).collect();
        normalize(&fs, &mut u);
        let before = value(&fs, &u, m, delta);
        let opts = DecayOptions::default();
        let log = descent_stage(&fs, m, delta, &opts, "test", &mut u).unwrap();
        assert!(log.objective <= before);
        assert!((value(&fs, &u, m, delta) - log.objective).abs() < 1e-12 * before);
        assert!((fs.mass.quad_form(&u) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        let fs = FemSpace::new(&build_mesh(&DomainSpec::square(1.0, 0.5)).unwrap());
        let p = DecayProblem::new(&fs).unwrap();
        assert!(p.minimize(-1.0, &DecayOptions::default(), &[]).is_err());
        assert!(p.minimize(1.0, &DecayOptions::default(), &[vec![1.0; 3]]).is_err());
        let empty = DecayOptions { schedule: vec![], ..DecayOptions::default() };
        assert!(p.minimize(1.0, &empty, &[]).is_err());
    }
}
