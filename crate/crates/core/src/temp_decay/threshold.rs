use serde::{Deserialize, Serialize};

use super::minimize::{decay_quotient, DecayMinimizerResult, DecayOptions, DecayProblem};
use super::eig_neumann2;
use crate::error::{Error, Result};
use crate::fem::FemSpace;
use crate::geometry::refine;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BracketStep {
    pub m: f64,
    pub lambda_m: f64,
    /// `λ_m - κ1`
    pub gap: f64,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct M0Report {
    pub m0: f64,
    pub kappa1: f64,
    pub mu2: f64,
    pub lambda_d: f64,
    /// `|κ1/μ2 - 1| ≤ 1%`
    pub kappa1_equals_mu2: bool,
    pub tol: f64,
    pub lo: f64,
    pub hi: f64,
    pub history: Vec<BracketStep>,
    pub area: f64,
    pub perimeter: f64,
    pub h: f64,
    pub n_vertices: usize,
    /// Same computation on the uniformly refined mesh.
    pub refined: Option<Box<M0Report>>,
}

impl M0Report {
    pub fn to_json(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("report serializes");
        v.as_object_mut()
            .expect("report is an object")
            .insert("schema".into(), "insulab-v1".into());
        v
    }
}

/// Root of `m ↦ λ_m - κ1` by geometric bisection.
pub fn threshold_m0(space: &FemSpace, tol: f64) -> Result<M0Report> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::Precondition(format!("bisection tolerance must lie in (0, 1), got {tol}")));
    }
    let problem = DecayProblem::new(space)?;
    let mu2 = eig_neumann2(space)?.eigenvalue;
    let kappa1 = problem.kappa1.eigenvalue;
    let opts = DecayOptions::default();
    let gap = |m: f64| -> Result<(f64, f64)> {
        let lambda = problem.minimize(m, &opts, &[])?.lambda_m;
        Ok((lambda, lambda - kappa1))
    };
    let unit = space.perimeter.powi(2) / (kappa1 * space.area);
    let mut history = Vec::new();
    let mut hi = 10.0 * unit;
    let (l_hi, g_hi) = gap(hi)?;
    history.push(BracketStep { m: hi, lambda_m: l_hi, gap: g_hi, lo: f64::NAN, hi });
    if g_hi >= 0.0 {
        return Err(Error::Bracket(format!("λ_m = {l_hi} ≥ κ1 = {kappa1} at the upper end m = {hi}")));
    }
    let mut lo = 0.01 * unit;
    let mut shrinks = 0;
    loop {
        let (l, g) = gap(lo)?;
        history.push(BracketStep { m: lo, lambda_m: l, gap: g, lo, hi });
        if g > 0.0 {
            break;
        }
        shrinks += 1;
        if shrinks > 6 {
            return Err(Error::Bracket(format!(
                "λ_m = {l} ≤ κ1 = {kappa1} at the lower end m = {lo}; upper end λ_m = {l_hi}"
            )));
        }
        hi = lo;
        lo /= 10.0;
    }
    while hi - lo >= tol * lo {
        let mid = (lo * hi).sqrt();
        let (l, g) = gap(mid)?;
        if g > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        history.push(BracketStep { m: mid, lambda_m: l, gap: g, lo, hi });
    }
    Ok(M0Report {
        m0: (lo * hi).sqrt(),
        kappa1,
        mu2,
        lambda_d: problem.dirichlet.eigenvalue,
        kappa1_equals_mu2: (kappa1 / mu2 - 1.0).abs() <= 0.01,
        tol,
        lo,
        hi,
        history,
        area: space.area,
        perimeter: space.perimeter,
        h: space.mesh.max_edge_length(),
        n_vertices: space.n(),
        refined: None,
    })
}

/// [`threshold_m0`] on the mesh and on its uniform refinement.
pub fn threshold_m0_with_refinement(space: &FemSpace, tol: f64) -> Result<M0Report> {
    let mut coarse = threshold_m0(space, tol)?;
    let fine = threshold_m0(&FemSpace::new(&refine(&space.mesh)), tol)?;
    coarse.refined = Some(Box::new(fine));
    Ok(coarse)
}

pub const SCAN_CSV_HEADER: &str = "m,lambda_m,vanish_measure,min_trace";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub m: f64,
    pub lambda_m: f64,
    pub vanish_measure: f64,
    pub min_trace: f64,
}

impl ScanRow {
    pub fn csv_line(&self) -> String {
        format!("{},{},{},{}", self.m, self.lambda_m, self.vanish_measure, self.min_trace)
    }
}

impl From<&DecayMinimizerResult> for ScanRow {
    fn from(r: &DecayMinimizerResult) -> Self {
        Self { m: r.m, lambda_m: r.lambda_m, vanish_measure: r.vanishing.measure, min_trace: r.min_trace() }
    }
}

pub(crate) fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Precondition("m grid is empty".into()));
    }
    if grid.iter().any(|m| !(*m > 0.0 && m.is_finite())) {
        return Err(Error::Precondition("m grid entries must be positive and finite".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Precondition("m grid must be strictly increasing".into()));
    }
    Ok(())
}

/// Minimizers along an increasing grid of `m`.
pub fn breaking_scan(space: &FemSpace, grid: &[f64]) -> Result<Vec<DecayMinimizerResult>> {
    check_grid(grid)?;
    let problem = DecayProblem::new(space)?;
    let opts = DecayOptions::default();
    let mut results = grid
        .iter()
        .map(|&m| problem.minimize(m, &opts, &[]))
        .collect::<Result<Vec<_>>>()?;
    repair_monotone(&problem, &mut results, &opts)?;
    Ok(results)
}

/// Restarts a grid point from its left neighbour's minimizer whenever `λ_m`
/// went up. `Q_m(u)` is nonincreasing in `m` for fixed `u`, so the repaired
/// column is nonincreasing. Returns the number of restarted points.
pub fn repair_monotone(problem: &DecayProblem, results: &mut [DecayMinimizerResult], opts: &DecayOptions) -> Result<usize> {
    if results.windows(2).any(|w| w[1].m <= w[0].m) {
        return Err(Error::Precondition("m grid must be strictly increasing".into()));
    }
    let mut restarted = 0;
    for i in 1..results.len() {
        let prev = &results[i - 1];
        if results[i].lambda_m <= prev.lambda_m {
            continue;
        }
        restarted += 1;
        let m = results[i].m;
        let warm = prev.u.clone();
        let inherited = decay_quotient(problem.space, &warm, m);
        let mut r = problem.minimize(m, opts, std::slice::from_ref(&warm))?;
        if r.lambda_m > inherited {
            let mut u = warm;
            let s = problem.space.mass.quad_form(&u).sqrt();
            u.iter_mut().for_each(|v| *v /= s);
            r.lambda_m = decay_quotient(problem.space, &u, m);
            r.trace = problem.space.trace(&u);
            r.vanishing = crate::heat_content::vanishing_set(problem.space, &u, crate::heat_content::DEFAULT_VANISH_TOL);
            r.method = "inherited".into();
            r.u = u;
        }
        results[i] = r;
    }
    Ok(restarted)
}
