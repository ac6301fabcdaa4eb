use serde::{Deserialize, Serialize};

use super::{check_m, material_distribution, vanishing_set, VanishingSet, DEFAULT_VANISH_TOL};
use crate::error::{Error, Result};
use crate::fem::{pcg, FemSpace};

/// Relative δ values; each is multiplied by `1/|Ω|`, the size of the
/// admissible constant field.
pub const DEFAULT_SCHEDULE: [f64; 6] = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6];

const MAX_NEWTON: usize = 400;

/// `[uᵀKu + (1/m)(∫_∂Ω |u| dσ)²] / (∫_Ω u dx)²`.
pub fn heat_objective(space: &FemSpace, u: &[f64], m: f64) -> f64 {
    let l = space.integral(u);
    let a = space.boundary_abs_integral(u);
    (space.energy(u) + a * a / m) / (l * l)
}

/// Same quotient with `|u|` replaced by `√(u² + δ²)` on the boundary.
pub fn regularized_heat_objective(space: &FemSpace, u: &[f64], m: f64, delta: f64) -> f64 {
    let l = space.integral(u);
    let a = smooth_abs_integral(space, u, delta);
    (space.energy(u) + a * a / m) / (l * l)
}

fn smooth_abs_integral(space: &FemSpace, u: &[f64], delta: f64) -> f64 {
    space
        .b
        .iter()
        .zip(u)
        .filter(|(b, _)| **b > 0.0)
        .map(|(b, u)| b * (u * u + delta * delta).sqrt())
        .sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageLog {
    pub delta: f64,
    pub iterations: usize,
    pub objective: f64,
    /// Newton decrement `-gᵀd` at the last step.
    pub decrement: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatMinimizerResult {
    pub m: f64,
    /// Minimizer with `∫_Ω u dx = 1`.
    pub u: Vec<f64>,
    pub objective: f64,
    pub regularized_objective: f64,
    /// `(vertex, value)` at boundary vertices.
    pub trace: Vec<(usize, f64)>,
    pub vanishing: VanishingSet,
    /// Optimal insulation density at boundary vertices, when defined.
    pub density: Option<Vec<(usize, f64)>>,
    /// Absolute δ values used.
    pub schedule: Vec<f64>,
    pub log: Vec<StageLog>,
}

impl HeatMinimizerResult {
    pub fn min_trace(&self) -> f64 {
        self.trace.iter().map(|p| p.1).fold(f64::INFINITY, f64::min)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "schema": "insulab-v1",
            "kind": "heat-minimizer",
            "m": self.m,
            "objective": self.objective,
            "regularized_objective": self.regularized_objective,
            "delta_schedule": self.schedule,
            "boundary_trace": self.trace.iter().map(|(i, v)| serde_json::json!([i, v])).collect::<Vec<_>>(),
            "vanishing_edges": self.vanishing.edges,
            "vanishing_measure": self.vanishing.measure,
            "density": self.density.as_ref().map(|d| d.iter().map(|(i, v)| serde_json::json!([i, v])).collect::<Vec<_>>()),
            "log": self.log,
        })
    }
}

pub(crate) fn check_schedule(schedule: &[f64]) -> Result<()> {
    if schedule.is_empty() {
        return Err(Error::Precondition("δ schedule is empty".into()));
    }
    if schedule.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
        return Err(Error::Precondition("δ schedule entries must be positive".into()));
    }
    if schedule.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Precondition("δ schedule must be strictly decreasing".into()));
    }
    Ok(())
}

/// Minimizes the heat-content quotient starting from the constant field.
pub fn minimize_heat_content(space: &FemSpace, m: f64, schedule: &[f64]) -> Result<HeatMinimizerResult> {
    let init = vec![1.0 / space.area; space.n()];
    minimize_heat_content_from(space, m, schedule, &init)
}

/// Newton's method with backtracking on the regularized quotient restricted to
/// `∫ u dx = 1`, continued along the δ schedule with warm starts.
pub fn minimize_heat_content_from(
    space: &FemSpace,
    m: f64,
    schedule: &[f64],
    init: &[f64],
) -> Result<HeatMinimizerResult> {
    check_m(m)?;
    check_schedule(schedule)?;
    if init.len() != space.n() {
        return Err(Error::Precondition("initial field has the wrong length".into()));
    }
    let total = space.integral(init);
    if !(total.abs() > 0.0) {
        return Err(Error::Precondition("initial field must have nonzero integral".into()));
    }
    let mut u: Vec<f64> = init.iter().map(|v| v / total).collect();
    let unit = 1.0 / space.area;
    let deltas: Vec<f64> = schedule.iter().map(|d| d * unit).collect();
    let mut log = Vec::new();
    for &delta in &deltas {
        log.push(newton_stage(space, m, delta, &mut u)?);
    }
    let delta = *deltas.last().unwrap();
    let vanishing = vanishing_set(space, &u, DEFAULT_VANISH_TOL);
    Ok(HeatMinimizerResult {
        m,
        objective: heat_objective(space, &u, m),
        regularized_objective: regularized_heat_objective(space, &u, m, delta),
        trace: space.trace(&u),
        density: material_distribution(space, &u, m).ok(),
        vanishing,
        schedule: deltas,
        log,
        u,
    })
}

/// Constrained objective `uᵀKu + (1/m) φ²` with `φ = Σ b √(u² + δ²)`.
fn value(space: &FemSpace, u: &[f64], m: f64, delta: f64) -> f64 {
    let a = smooth_abs_integral(space, u, delta);
    space.energy(u) + a * a / m
}

fn newton_stage(space: &FemSpace, m: f64, delta: f64, u: &mut Vec<f64>) -> Result<StageLog> {
    let n = space.n();
    let kdiag = space.stiffness.diagonal();
    let bidx: Vec<usize> = (0..n).filter(|&i| space.b[i] > 0.0).collect();
    let mut t = value(space, u, m, delta);
    let mut history = vec![t];
    let mut decrement = f64::INFINITY;
    for it in 0..MAX_NEWTON {
        let mut ku = space.stiffness.mul(u);
        let phi = smooth_abs_integral(space, u, delta);
        let mut curv = vec![0.0; n];
        let mut c = vec![0.0; n];
        let mut g: Vec<f64> = ku.iter().map(|v| 2.0 * v).collect();
        for &i in &bidx {
            let s = (u[i] * u[i] + delta * delta).sqrt();
            c[i] = space.b[i] * u[i] / s;
            curv[i] = space.b[i] * delta * delta / (s * s * s);
            g[i] += 2.0 * phi / m * c[i];
        }
        ku.clear();
        let coef = 2.0 / m;
        let apply = |x: &[f64], out: &mut [f64]| {
            space.stiffness.mul_into(x, out);
            let cx: f64 = bidx.iter().map(|&i| c[i] * x[i]).sum();
            out.iter_mut().for_each(|o| *o *= 2.0);
            for &i in &bidx {
                out[i] += coef * (phi * curv[i] * x[i] + c[i] * cx);
            }
        };
        let mut diag: Vec<f64> = kdiag.iter().map(|k| 2.0 * k).collect();
        for &i in &bidx {
            diag[i] += coef * (phi * curv[i] + c[i] * c[i]);
        }
        let neg_g: Vec<f64> = g.iter().map(|v| -v).collect();
        let max_cg = 20 * n + 200;
        let (y1, _) = pcg(apply, &diag, &neg_g, None, 1e-11, max_cg, false)?;
        let (y2, _) = pcg(apply, &diag, &space.ell, None, 1e-11, max_cg, false)?;
        let nu = -space.integral(&y1) / space.integral(&y2);
        let d: Vec<f64> = y1.iter().zip(&y2).map(|(a, b)| a + nu * b).collect();
        let slope: f64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
        decrement = -slope;
        if decrement <= 1e-15 * t {
            return Ok(StageLog { delta, iterations: it, objective: t, decrement });
        }
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = u.iter().zip(&d).map(|(a, b)| a + alpha * b).collect();
            let tt = value(space, &trial, m, delta);
            if tt <= t + 1e-4 * alpha * slope {
                accepted = Some((trial, tt));
                break;
            }
            alpha *= 0.5;
        }
        let Some((mut next, tn)) = accepted else {
            if decrement <= 1e-10 * t {
                return Ok(StageLog { delta, iterations: it, objective: t, decrement });
            }
            return Err(Error::NotConverged {
                what: "heat-content Newton line search",
                iterations: it,
                residual: decrement / t,
                history,
            });
        };
        let l = space.integral(&next);
        next.iter_mut().for_each(|v| *v /= l);
        let change = (t - tn).abs() / t;
        *u = next;
        t = value(space, u, m, delta);
        history.push(t);
        if change < 1e-14 && alpha == 1.0 && decrement < 1e-12 * t {
            return Ok(StageLog { delta, iterations: it + 1, objective: t, decrement });
        }
    }
    Err(Error::NotConverged {
        what: "heat-content Newton iteration",
        iterations: MAX_NEWTON,
        residual: decrement / t,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_mesh, refine_times, DomainSpec};
    use crate::heat_content::{linear_candidate, solve_u0};

    #[test]
    fn disk_minimizer_is_the_linear_candidate() {
        let fs = FemSpace::new(&refine_times(&build_mesh(&DomainSpec::disk(1.0, 0.4)).unwrap(), 1));
        let r = minimize_heat_content(&fs, 1.0, &DEFAULT_SCHEDULE).unwrap();
        let u0 = solve_u0(&fs).unwrap();
        let mut cand = linear_candidate(&fs, &u0, 1.0).unwrap();
        let l = fs.integral(&cand);
        cand.iter_mut().for_each(|v| *v /= l);
        let diff: Vec<f64> = r.u.iter().zip(&cand).map(|(a, b)| a - b).collect();
        assert!(fs.l2_norm(&diff) < 1e-6, "{}", fs.l2_norm(&diff));
        assert!((fs.integral(&r.u) - 1.0).abs() < 1e-10);
        assert!(r.vanishing.edges.is_empty());
    }

    #[test]
    fn rejects_bad_input() {
        let fs = FemSpace::new(&build_mesh(&DomainSpec::square(1.0, 0.5)).unwrap());
        assert!(minimize_heat_content(&fs, 0.0, &DEFAULT_SCHEDULE).is_err());
        assert!(minimize_heat_content(&fs, 1.0, &[]).is_err());
        assert!(minimize_heat_content(&fs, 1.0, &[1e-2, 1e-1]).is_err());
    }
}
