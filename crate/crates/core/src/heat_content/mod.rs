//! Maximal heat content: the quotient
//! `[∫|∇u|² + (1/m)(∫_∂Ω |u| dσ)²] / (∫_Ω u dx)²`,
//! its torsion-type reference solution and the breaking threshold `m1`.

mod minimize;
mod torsion;

pub use minimize::{
    heat_objective, minimize_heat_content, minimize_heat_content_from, regularized_heat_objective,
    HeatMinimizerResult, StageLog, DEFAULT_SCHEDULE,
};
pub use torsion::{torsion_predictor, TorsionPrediction};
pub(crate) use minimize::check_schedule;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{neumann_poisson, FemSpace};
use crate::geometry::refine;

/// Zero-mean solution of `-Δu = 1`, `∂u/∂ν = -|Ω|/P` on every boundary
/// component.
pub fn solve_u0(space: &FemSpace) -> Result<Vec<f64>> {
    let g = -space.area / space.perimeter;
    neumann_poisson(space, 1.0, &vec![g; space.b_components.len()])
}

/// Boundary mean of `u0` minus its smallest boundary vertex value.
pub fn delta_omega(space: &FemSpace, u0: &[f64]) -> f64 {
    space.boundary_integral(u0) / space.perimeter - space.boundary_min(u0)
}

/// `u0 + m|Ω|/P² - (1/P) ∫_∂Ω u0 dσ`; positive multiples of it minimize the
/// quotient whenever its boundary trace is nonnegative.
pub fn linear_candidate(space: &FemSpace, u0: &[f64], m: f64) -> Result<Vec<f64>> {
    check_m(m)?;
    let shift = m * space.area / space.perimeter.powi(2) - space.boundary_integral(u0) / space.perimeter;
    Ok(u0.iter().map(|v| v + shift).collect())
}

pub(crate) fn check_m(m: f64) -> Result<()> {
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::Precondition(format!("m must be positive and finite, got {m}")));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct M1Level {
    pub m1: f64,
    pub delta_omega: f64,
    pub perimeter: f64,
    pub area: f64,
    pub boundary_mean_u0: f64,
    pub boundary_min_u0: f64,
    /// Longest mesh edge.
    pub h: f64,
    pub n_vertices: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct M1Report {
    pub m1: f64,
    pub delta_omega: f64,
    pub perimeter: f64,
    pub area: f64,
    pub boundary_mean_u0: f64,
    pub boundary_min_u0: f64,
    /// Longest mesh edge.
    pub h: f64,
    /// Target edge length the mesh was generated with.
    pub target_h: f64,
    pub refined: M1Level,
    /// `m1_fine + (m1_fine - m1_coarse) / 3`, assuming O(h²) convergence.
    pub m1_extrapolated: f64,
    /// `1e-3 · P²/|Ω| · h²` with `h` the generation target; values below it
    /// are indistinguishable from zero.
    pub noise_floor: f64,
}

impl M1Report {
    pub fn below_noise_floor(&self) -> bool {
        self.m1_extrapolated.abs().max(self.refined.m1.abs()) <= self.noise_floor
    }
}

pub fn m1_level(space: &FemSpace) -> Result<M1Level> {
    let u0 = solve_u0(space)?;
    let delta = delta_omega(space, &u0);
    Ok(M1Level {
        m1: delta * space.perimeter.powi(2) / space.area,
        delta_omega: delta,
        perimeter: space.perimeter,
        area: space.area,
        boundary_mean_u0: space.boundary_integral(&u0) / space.perimeter,
        boundary_min_u0: space.boundary_min(&u0),
        h: space.mesh.max_edge_length(),
        n_vertices: space.n(),
    })
}

/// `m1 = δ_Ω P²/|Ω|` on the mesh and on its uniform refinement.
pub fn threshold_m1(space: &FemSpace) -> Result<M1Report> {
    let coarse = m1_level(space)?;
    let refined = m1_level(&FemSpace::new(&refine(&space.mesh)))?;
    Ok(M1Report {
        m1: coarse.m1,
        delta_omega: coarse.delta_omega,
        perimeter: coarse.perimeter,
        area: coarse.area,
        boundary_mean_u0: coarse.boundary_mean_u0,
        boundary_min_u0: coarse.boundary_min_u0,
        h: coarse.h,
        target_h: space.mesh.domain.h,
        m1_extrapolated: refined.m1 + (refined.m1 - coarse.m1) / 3.0,
        noise_floor: 1e-3 * coarse.perimeter.powi(2) / coarse.area * space.mesh.domain.h.powi(2),
        refined,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub passed: bool,
    pub trials: usize,
    /// Smallest `T_m(v) - T_m(u)` over the trials, relative to `T_m(u)`.
    pub worst_margin: f64,
}

/// Compares `T_m(u)` with `T_m(v)` for pseudo-random competitors `v` having
/// the same integral. Half of them are small perturbations of `u`, the rest
/// unrelated random fields.
pub fn certify_minimizer(space: &FemSpace, u: &[f64], m: f64, trials: usize, seed: u64) -> Result<Certificate> {
    check_m(m)?;
    let scale = u.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let bmin = space.boundary_min(u);
    if bmin < -1e-10 * scale {
        return Err(Error::Precondition(format!(
            "certificate inapplicable: boundary trace has negative value {bmin:e}"
        )));
    }
    let total = space.integral(u);
    if total.abs() <= 1e-14 * scale * space.area {
        return Err(Error::Precondition("certificate inapplicable: ∫u dx = 0".into()));
    }
    let base = heat_objective(space, u, m);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    for trial in 0..trials {
        let mut z: Vec<f64> = (0..space.n()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let v: Vec<f64> = if trial % 2 == 0 {
            let mean = space.integral(&z) / space.area;
            let amp = scale * 10f64.powf(rng.gen_range(-4.0..0.0));
            z.iter_mut().for_each(|t| *t = amp * (*t - mean));
            u.iter().zip(&z).map(|(a, b)| a + b).collect()
        } else {
            let c = total / space.integral(&z);
            if !c.is_finite() {
                continue;
            }
            z.iter().map(|t| c * t).collect()
        };
        let margin = (heat_objective(space, &v, m) - base) / base;
        worst = worst.min(margin);
    }
    if trials == 0 {
        worst = 0.0;
    }
    Ok(Certificate { passed: worst >= -1e-12, trials, worst_margin: worst })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VanishingSet {
    /// Indices into `mesh.boundary_edges`.
    pub edges: Vec<usize>,
    pub measure: f64,
}

/// Boundary edges on which `|u| < tol_rel · max_∂Ω |u|` at both endpoints.
pub fn vanishing_set(space: &FemSpace, u: &[f64], tol_rel: f64) -> VanishingSet {
    let cutoff = tol_rel * space.boundary_max_abs(u);
    let mut edges = Vec::new();
    let mut measure = 0.0;
    for (k, e) in space.mesh.boundary_edges.iter().enumerate() {
        if e.v.iter().all(|&i| u[i].abs() < cutoff || u[i] == 0.0 && cutoff == 0.0) {
            edges.push(k);
            measure += space.mesh.edge_length(e);
        }
    }
    VanishingSet { edges, measure }
}

pub const DEFAULT_VANISH_TOL: f64 = 1e-3;

/// Optimal insulation density `m|u| / ∫_∂Ω |u| dσ` at the boundary vertices.
pub fn material_distribution(space: &FemSpace, u: &[f64], m: f64) -> Result<Vec<(usize, f64)>> {
    check_m(m)?;
    let total = space.boundary_abs_integral(u);
    if !(total > 0.0) {
        return Err(Error::Precondition(
            "insulation density undefined: boundary trace vanishes identically".into(),
        ));
    }
    Ok(space.trace(u).into_iter().map(|(i, v)| (i, m * v.abs() / total)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_mesh, refine_times, DomainSpec};

    fn space(spec: DomainSpec, levels: usize) -> FemSpace {
        FemSpace::new(&refine_times(&build_mesh(&spec).unwrap(), levels))
    }

    #[test]
    fn candidate_boundary_minimum_is_affine() {
        let fs = space(DomainSpec::ellipse(2.0, 1.0, 0.4), 1);
        let u0 = solve_u0(&fs).unwrap();
        let d = delta_omega(&fs, &u0);
        for m in [0.1, 1.0, 7.0] {
            let u = linear_candidate(&fs, &u0, m).unwrap();
            let want = -d + m * fs.area / fs.perimeter.powi(2);
            assert!((fs.boundary_min(&u) - want).abs() < 1e-10);
        }
        assert!(linear_candidate(&fs, &u0, 0.0).is_err());
    }

    #[test]
    fn candidate_solves_the_linear_system() {
        let fs = space(DomainSpec::rectangle(2.0, 1.0, 0.3), 1);
        let u0 = solve_u0(&fs).unwrap();
        let m = 3.0;
        let u = linear_candidate(&fs, &u0, m).unwrap();
        let mut r = fs.stiffness.mul(&u);
        let bu = fs.boundary_integral(&u);
        for i in 0..fs.n() {
            r[i] += bu / m * fs.b[i] - fs.ell[i];
        }
        assert!(r.iter().all(|v| v.abs() < 1e-9), "{:e}", r.iter().fold(0.0f64, |a, v| a.max(v.abs())));
    }

    #[test]
    fn certificate_self_margin_and_rejection() {
        let fs = space(DomainSpec::disk(1.0, 0.4), 1);
        let u0 = solve_u0(&fs).unwrap();
        let u = linear_candidate(&fs, &u0, 1.0).unwrap();
        let c = certify_minimizer(&fs, &u, 1.0, 40, 7).unwrap();
        assert!(c.passed && c.worst_margin >= -1e-12);
        assert_eq!(certify_minimizer(&fs, &u, 1.0, 0, 7).unwrap().worst_margin, 0.0);
        let neg: Vec<f64> = u.iter().map(|v| v - 10.0).collect();
        assert!(matches!(certify_minimizer(&fs, &neg, 1.0, 5, 0), Err(Error::Precondition(_))));
    }

    #[test]
    fn vanishing_and_density_basics() {
        let fs = space(DomainSpec::disk(1.0, 0.4), 0);
        let zero = vec![0.0; fs.n()];
        let v = vanishing_set(&fs, &zero, DEFAULT_VANISH_TOL);
        assert_eq!(v.edges.len(), fs.mesh.boundary_edges.len());
        assert!((v.measure - fs.perimeter).abs() < 1e-12);
        assert!(material_distribution(&fs, &zero, 1.0).is_err());
        let one = vec![1.0; fs.n()];
        assert!(vanishing_set(&fs, &one, DEFAULT_VANISH_TOL).edges.is_empty());
        let h = material_distribution(&fs, &one, 2.5).unwrap();
        let total: f64 = h.iter().map(|(i, d)| fs.b[*i] * d).sum();
        assert!((total - 2.5).abs() < 1e-12);
    }
}
