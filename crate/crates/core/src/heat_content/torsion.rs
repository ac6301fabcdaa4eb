use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::fem::{solve_spd, FemSpace};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorsionPrediction {
    /// `|∂u/∂ν|` per boundary edge, from the gradient on the adjacent triangle.
    pub edge_flux: Vec<f64>,
    pub max_flux: f64,
    /// Boundary edges whose flux is at least `(1 - tol_loc) · max_flux`.
    pub argmax_edges: Vec<usize>,
    /// Arclength midpoint of every contiguous run of argmax edges.
    pub peaks: Vec<[f64; 2]>,
}

/// Solves `-Δu = 1`, `u = 0` on ∂Ω and locates where `|∂u/∂ν|` is largest.
pub fn torsion_predictor(space: &FemSpace, tol_loc: f64) -> Result<TorsionPrediction> {
    let mesh = &space.mesh;
    let free: Vec<usize> = (0..space.n()).filter(|&i| !space.on_boundary[i]).collect();
    let k = space.stiffness.restrict(&free);
    let rhs: Vec<f64> = free.iter().map(|&i| space.ell[i]).collect();
    let ui = solve_spd(&k, &rhs, 1e-12)?;
    let mut u = vec![0.0; space.n()];
    for (j, &i) in free.iter().enumerate() {
        u[i] = ui[j];
    }

    let mut owner: HashMap<(usize, usize), usize> = HashMap::new();
    for (t, tri) in mesh.triangles.iter().enumerate() {
        for a in 0..3 {
            owner.insert((tri[a], tri[(a + 1) % 3]), t);
        }
    }
    let edge_flux: Vec<f64> = mesh
        .boundary_edges
        .iter()
        .map(|e| {
            let t = owner[&(e.v[0], e.v[1])];
            let grad = triangle_gradient(space, t, &u);
            let (p, q) = (mesh.vertices[e.v[0]], mesh.vertices[e.v[1]]);
            let (tx, ty) = (q[0] - p[0], q[1] - p[1]);
            let len = tx.hypot(ty);
            ((grad[0] * ty - grad[1] * tx) / len).abs()
        })
        .collect();
    let max_flux = edge_flux.iter().copied().fold(0.0, f64::max);
    let cutoff = (1.0 - tol_loc) * max_flux;
    let selected: Vec<bool> = edge_flux.iter().map(|f| *f >= cutoff).collect();
    let argmax_edges = (0..edge_flux.len()).filter(|&k| selected[k]).collect();

    let mut peaks = Vec::new();
    for (_, chain) in mesh.boundary_loops()? {
        let n = chain.len();
        if chain.iter().all(|&k| selected[k]) {
            continue;
        }
        // start just after an unselected edge so runs do not wrap
        let start = (0..n).find(|&j| !selected[chain[j]]).unwrap();
        let mut run: Vec<usize> = Vec::new();
        for step in 1..=n {
            let k = chain[(start + step) % n];
            if selected[k] {
                run.push(k);
            } else if !run.is_empty() {
                peaks.push(run_midpoint(space, &run));
                run.clear();
            }
        }
        if !run.is_empty() {
            peaks.push(run_midpoint(space, &run));
        }
    }
    Ok(TorsionPrediction { edge_flux, max_flux, argmax_edges, peaks })
}

fn triangle_gradient(space: &FemSpace, t: usize, u: &[f64]) -> [f64; 2] {
    let tri = space.mesh.triangles[t];
    let p = tri.map(|i| space.mesh.vertices[i]);
    let area2 = 2.0 * space.mesh.triangle_area(t);
    let mut g = [0.0; 2];
    for i in 0..3 {
        let (a, b) = (p[(i + 1) % 3], p[(i + 2) % 3]);
        // ∇φ_i is the inward normal of the opposite edge over twice the area
        g[0] += u[tri[i]] * (a[1] - b[1]) / area2;
        g[1] += u[tri[i]] * (b[0] - a[0]) / area2;
    }
    g
}

/// Point at half the arclength of a chain of consecutive boundary edges.
fn run_midpoint(space: &FemSpace, run: &[usize]) -> [f64; 2] {
    let mesh = &space.mesh;
    let total: f64 = run.iter().map(|&k| mesh.edge_length(&mesh.boundary_edges[k])).sum();
    let mut walked = 0.0;
    for &k in run {
        let e = &mesh.boundary_edges[k];
        let l = mesh.edge_length(e);
        if walked + l >= 0.5 * total {
            let s = (0.5 * total - walked) / l;
            let (p, q) = (mesh.vertices[e.v[0]], mesh.vertices[e.v[1]]);
            return [p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])];
        }
        walked += l;
    }
    mesh.vertices[mesh.boundary_edges[*run.last().unwrap()].v[1]]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_mesh, refine_times, DomainSpec};

    #[test]
    fn disk_flux_is_uniform() {
        let fs = FemSpace::new(&refine_times(&build_mesh(&DomainSpec::disk(1.0, 0.25)).unwrap(), 2));
        let p = torsion_predictor(&fs, 0.05).unwrap();
        assert!((p.max_flux - 0.5).abs() < 0.03, "{}", p.max_flux);
        let min = p.edge_flux.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(min > 0.9 * p.max_flux);
    }

    #[test]
    fn gradient_of_linear_field_is_exact() {
        let fs = FemSpace::new(&build_mesh(&DomainSpec::square(1.0, 0.5)).unwrap());
        let u: Vec<f64> = fs.mesh.vertices.iter().map(|p| 3.0 * p[0] - 2.0 * p[1]).collect();
        for t in 0..fs.mesh.triangles.len() {
            let g = triangle_gradient(&fs, t, &u);
            assert!((g[0] - 3.0).abs() < 1e-12 && (g[1] + 2.0).abs() < 1e-12);
        }
    }
}
