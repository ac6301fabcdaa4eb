//! P1 finite elements on triangle meshes.

mod cg;
mod eigen;
mod sparse;

pub use cg::{neumann_poisson, pcg, solve_spd, CgReport, DEFAULT_CG_TOL};
pub use eigen::{eig_smallest, eig_smallest_updated, eig_smallest_with, EigOptions, SpectralResult};
pub use sparse::SparseOperator;

use crate::geometry::{measures, TriMesh};

/// Exact P1 stiffness matrix.
pub fn assemble_stiffness(mesh: &TriMesh) -> SparseOperator {
    let mut triplets = Vec::with_capacity(9 * mesh.triangles.len());
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let area = mesh.triangle_area(t);
        let p = tri.map(|i| mesh.vertices[i]);
        // edge opposite vertex i
        let e: [[f64; 2]; 3] = std::array::from_fn(|i| {
            let (a, b) = (p[(i + 1) % 3], p[(i + 2) % 3]);
            [b[0] - a[0], b[1] - a[1]]
        });
        for i in 0..3 {
            for j in 0..3 {
                let v = (e[i][0] * e[j][0] + e[i][1] * e[j][1]) / (4.0 * area);
                triplets.push((tri[i], tri[j], v));
            }
        }
    }
    SparseOperator::from_triplets(mesh.n_vertices(), triplets)
}

/// Consistent P1 mass matrix.
pub fn assemble_mass(mesh: &TriMesh) -> SparseOperator {
    let mut triplets = Vec::with_capacity(9 * mesh.triangles.len());
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let area = mesh.triangle_area(t);
        for i in 0..3 {
            for j in 0..3 {
                let w = if i == j { 2.0 } else { 1.0 };
                triplets.push((tri[i], tri[j], w * area / 12.0));
            }
        }
    }
    SparseOperator::from_triplets(mesh.n_vertices(), triplets)
}

/// Boundary load vector restricted to one boundary component, or to all of
/// them when `component` is `None`.
pub fn boundary_vector(mesh: &TriMesh, component: Option<usize>) -> Vec<f64> {
    let mut b = vec![0.0; mesh.n_vertices()];
    for e in &mesh.boundary_edges {
        if component.is_some_and(|c| c != e.component) {
            continue;
        }
        let half = 0.5 * mesh.edge_length(e);
        b[e.v[0]] += half;
        b[e.v[1]] += half;
    }
    b
}

/// `b_i = ∫ φ_i dσ` over the boundary and the 1D boundary mass matrix.
pub fn assemble_boundary(mesh: &TriMesh) -> (Vec<f64>, SparseOperator) {
    let mut triplets = Vec::with_capacity(4 * mesh.boundary_edges.len());
    for e in &mesh.boundary_edges {
        let l = mesh.edge_length(e);
        let [a, c] = e.v;
        triplets.push((a, a, l / 3.0));
        triplets.push((c, c, l / 3.0));
        triplets.push((a, c, l / 6.0));
        triplets.push((c, a, l / 6.0));
    }
    (
        boundary_vector(mesh, None),
        SparseOperator::from_triplets(mesh.n_vertices(), triplets),
    )
}

/// All assembled operators of one mesh, shared by the solvers.
#[derive(Clone, Debug)]
pub struct FemSpace {
    pub mesh: TriMesh,
    pub stiffness: SparseOperator,
    pub mass: SparseOperator,
    pub boundary_mass: SparseOperator,
    /// `∫ φ_i dσ`
    pub b: Vec<f64>,
    /// `∫ φ_i dσ` per boundary component
    pub b_components: Vec<Vec<f64>>,
    /// `∫ φ_i dx`
    pub ell: Vec<f64>,
    pub area: f64,
    pub perimeter: f64,
    pub on_boundary: Vec<bool>,
}

impl FemSpace {
    pub fn new(mesh: &TriMesh) -> Self {
        let stiffness = assemble_stiffness(mesh);
        let mass = assemble_mass(mesh);
        let (b, boundary_mass) = assemble_boundary(mesh);
        let b_components = (0..mesh.domain.boundary_components())
            .map(|c| boundary_vector(mesh, Some(c)))
            .collect();
        let ell = mass.mul(&vec![1.0; mesh.n_vertices()]);
        let ms = measures(mesh);
        Self {
            mesh: mesh.clone(),
            stiffness,
            mass,
            boundary_mass,
            b,
            b_components,
            ell,
            area: ms.area,
            perimeter: ms.perimeter,
            on_boundary: mesh.boundary_mask(),
        }
    }

    pub fn n(&self) -> usize {
        self.ell.len()
    }

    /// `∫_Ω u dx`
    pub fn integral(&self, u: &[f64]) -> f64 {
        dot(&self.ell, u)
    }

    /// `∫_∂Ω u dσ`
    pub fn boundary_integral(&self, u: &[f64]) -> f64 {
        dot(&self.b, u)
    }

    /// `∫_∂Ω |u| dσ` with the same edge quadrature as `b`.
    pub fn boundary_abs_integral(&self, u: &[f64]) -> f64 {
        self.b.iter().zip(u).map(|(b, u)| b * u.abs()).sum()
    }

    pub fn l2_norm(&self, u: &[f64]) -> f64 {
        self.mass.quad_form(u).max(0.0).sqrt()
    }

    pub fn energy(&self, u: &[f64]) -> f64 {
        self.stiffness.quad_form(u)
    }

    /// Boundary vertex values `(vertex, value)` in increasing vertex order.
    pub fn trace(&self, u: &[f64]) -> Vec<(usize, f64)> {
        self.on_boundary
            .iter()
            .enumerate()
            .filter_map(|(i, &on)| on.then_some((i, u[i])))
            .collect()
    }

    pub fn boundary_min(&self, u: &[f64]) -> f64 {
        self.trace(u).iter().map(|p| p.1).fold(f64::INFINITY, f64::min)
    }

    pub fn boundary_max_abs(&self, u: &[f64]) -> f64 {
        self.trace(u).iter().map(|p| p.1.abs()).fold(0.0, f64::max)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_mesh, refine_times, BoundaryEdge, DomainSpec};

    fn right_triangle() -> TriMesh {
        TriMesh {
            vertices: vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            triangles: vec![[0, 1, 2]],
            boundary_edges: vec![
                BoundaryEdge { v: [0, 1], component: 0 },
                BoundaryEdge { v: [1, 2], component: 0 },
                BoundaryEdge { v: [2, 0], component: 0 },
            ],
            domain: DomainSpec::polygon(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], 1.0),
        }
    }

    #[test]
    fn single_triangle_matrices() {
        let m = right_triangle();
        let k = assemble_stiffness(&m);
        let x: Vec<f64> = m.vertices.iter().map(|p| p[0]).collect();
        assert!((k.quad_form(&x) - 0.5).abs() < 1e-15);
        let mass = assemble_mass(&m);
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 2.0 } else { 1.0 } * 0.5 / 12.0;
                assert!((mass.get(i, j) - want).abs() < 1e-16);
            }
        }
        let (b, bm) = assemble_boundary(&m);
        let l = 2f64.sqrt();
        assert!((b[1] - (0.5 + l / 2.0)).abs() < 1e-15);
        assert!((bm.get(1, 2) - l / 6.0).abs() < 1e-15);
    }

    #[test]
    fn global_identities() {
        for spec in [
            DomainSpec::disk(1.0, 0.4),
            DomainSpec::annulus(1.0, 2.0, 0.4),
            DomainSpec::square(1.0, 0.3),
            DomainSpec::ellipse(2.0, 1.0, 0.4),
        ] {
            let mesh = refine_times(&build_mesh(&spec).unwrap(), 1);
            let fs = FemSpace::new(&mesh);
            let one = vec![1.0; fs.n()];
            let k1 = fs.stiffness.mul(&one);
            assert!(norm(&k1) < 1e-12, "{spec:?}");
            assert!((fs.mass.quad_form(&one) - fs.area).abs() < 1e-12 * fs.area);
            assert!((fs.boundary_integral(&one) - fs.perimeter).abs() < 1e-12 * fs.perimeter);
            assert!((fs.boundary_mass.quad_form(&one) - fs.perimeter).abs() < 1e-12 * fs.perimeter);
            let parts: f64 = fs.b_components.iter().map(|bc| bc.iter().sum::<f64>()).sum();
            assert!((parts - fs.perimeter).abs() < 1e-12 * fs.perimeter);
            assert!(fs.stiffness.asymmetry() < 1e-13);
            assert!(fs.mass.asymmetry() < 1e-13);
        }
    }

    #[test]
    fn stiffness_energy_of_x_squared() {
        let mut last = f64::INFINITY;
        for levels in 1..4 {
            let mesh = refine_times(&build_mesh(&DomainSpec::square(1.0, 0.25)).unwrap(), levels);
            let k = assemble_stiffness(&mesh);
            let u: Vec<f64> = mesh.vertices.iter().map(|p| p[0] * p[0]).collect();
            let err = (k.quad_form(&u) - 4.0 / 3.0).abs();
            assert!(err < last / 3.0);
            last = err;
        }
        assert!(last < 1e-3);
    }
}
