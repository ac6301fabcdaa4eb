use std::collections::HashMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::domain::{DomainKind, DomainSpec};
use crate::error::{Error, Result};

/// Boundary edge oriented so that the domain lies to its left.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryEdge {
    pub v: [usize; 2],
    pub component: usize,
}

/// Conforming triangulation of a planar domain.
///
/// Triangles are counterclockwise. Component 0 is the outer boundary; the
/// annulus hole is component 1.
#[derive(Clone, Debug, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary_edges: Vec<BoundaryEdge>,
    pub domain: DomainSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Measures {
    pub area: f64,
    pub perimeter: f64,
    pub component_perimeters: Vec<f64>,
}

fn dist(p: [f64; 2], q: [f64; 2]) -> f64 {
    (p[0] - q[0]).hypot(p[1] - q[1])
}

fn tri_area(p: [f64; 2], q: [f64; 2], r: [f64; 2]) -> f64 {
    0.5 * ((q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]))
}

impl TriMesh {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        tri_area(self.vertices[a], self.vertices[b], self.vertices[c])
    }

    pub fn edge_length(&self, e: &BoundaryEdge) -> f64 {
        dist(self.vertices[e.v[0]], self.vertices[e.v[1]])
    }

    /// Unique undirected edges `(min, max)` in first-seen order.
    pub fn edges(&self) -> Vec<[usize; 2]> {
        let mut seen = HashMap::new();
        let mut out = Vec::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                let key = [a.min(b), a.max(b)];
                if seen.insert(key, ()).is_none() {
                    out.push(key);
                }
            }
        }
        out
    }

    pub fn max_edge_length(&self) -> f64 {
        self.edges()
            .iter()
            .map(|e| dist(self.vertices[e[0]], self.vertices[e[1]]))
            .fold(0.0, f64::max)
    }

    pub fn boundary_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.vertices.len()];
        for e in &self.boundary_edges {
            mask[e.v[0]] = true;
            mask[e.v[1]] = true;
        }
        mask
    }

    /// Boundary vertex indices in increasing order.
    pub fn boundary_vertices(&self) -> Vec<usize> {
        self.boundary_mask()
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
            .collect()
    }

    pub fn diameter_bound(&self) -> f64 {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in &self.vertices {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        (hi[0] - lo[0]).hypot(hi[1] - lo[1])
    }

    /// Closed boundary loops as ordered lists of boundary-edge indices,
    /// together with their component id.
    pub fn boundary_loops(&self) -> Result<Vec<(usize, Vec<usize>)>> {
        let mut outgoing: HashMap<usize, usize> = HashMap::new();
        for (k, e) in self.boundary_edges.iter().enumerate() {
            if outgoing.insert(e.v[0], k).is_some() {
                return Err(Error::InvalidMesh(format!(
                    "vertex {} starts two boundary edges",
                    e.v[0]
                )));
            }
        }
        let mut used = vec![false; self.boundary_edges.len()];
        let mut loops = Vec::new();
        for start in 0..self.boundary_edges.len() {
            if used[start] {
                continue;
            }
            let comp = self.boundary_edges[start].component;
            let mut chain = Vec::new();
            let mut k = start;
            loop {
                if used[k] {
                    return Err(Error::InvalidMesh("boundary edges do not form simple loops".into()));
                }
                used[k] = true;
                chain.push(k);
                let e = self.boundary_edges[k];
                if e.component != comp {
                    return Err(Error::InvalidMesh("boundary loop mixes components".into()));
                }
                k = *outgoing.get(&e.v[1]).ok_or_else(|| {
                    Error::InvalidMesh(format!("boundary loop open at vertex {}", e.v[1]))
                })?;
                if k == start {
                    break;
                }
            }
            loops.push((comp, chain));
        }
        Ok(loops)
    }

    /// Checks orientation, conformity, boundary loops and vertex uniqueness.
    pub fn validate(&self) -> Result<()> {
        let nv = self.vertices.len();
        if self.vertices.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::InvalidMesh("non-finite vertex coordinate".into()));
        }
        for (t, tri) in self.triangles.iter().enumerate() {
            if tri.iter().any(|&i| i >= nv) {
                return Err(Error::InvalidMesh(format!("triangle {t} has an out-of-range vertex")));
            }
            if self.triangle_area(t) <= 0.0 {
                return Err(Error::InvalidMesh(format!(
                    "triangle {t} has non-positive signed area {}",
                    self.triangle_area(t)
                )));
            }
        }
        let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
        for tri in &self.triangles {
            for k in 0..3 {
                *directed.entry((tri[k], tri[(k + 1) % 3])).or_default() += 1;
            }
        }
        if let Some(((a, b), _)) = directed.iter().find(|(_, &c)| c > 1) {
            return Err(Error::InvalidMesh(format!("directed edge ({a}, {b}) used twice")));
        }
        let mut expected_boundary: Vec<(usize, usize)> = directed
            .keys()
            .filter(|(a, b)| !directed.contains_key(&(*b, *a)))
            .copied()
            .collect();
        expected_boundary.sort_unstable();
        let mut declared: Vec<(usize, usize)> = self.boundary_edges.iter().map(|e| (e.v[0], e.v[1])).collect();
        declared.sort_unstable();
        if declared != expected_boundary {
            return Err(Error::InvalidMesh(format!(
                "declared boundary edges ({}) differ from edges with a single triangle ({})",
                declared.len(),
                expected_boundary.len()
            )));
        }
        let loops = self.boundary_loops()?;
        let n_comp = self.domain.boundary_components();
        if loops.len() != n_comp {
            return Err(Error::InvalidMesh(format!(
                "expected {n_comp} boundary loop(s), found {}",
                loops.len()
            )));
        }
        let mut comps: Vec<usize> = loops.iter().map(|l| l.0).collect();
        comps.sort_unstable();
        if comps != (0..n_comp).collect::<Vec<_>>() {
            return Err(Error::InvalidMesh("boundary components must be numbered 0..n".into()));
        }
        let tol = 1e-12 * self.diameter_bound();
        let mut order: Vec<usize> = (0..nv).collect();
        order.sort_by(|&i, &j| self.vertices[i][0].total_cmp(&self.vertices[j][0]));
        for (a, &i) in order.iter().enumerate() {
            for &j in &order[a + 1..] {
                if self.vertices[j][0] - self.vertices[i][0] > tol {
                    break;
                }
                if dist(self.vertices[i], self.vertices[j]) <= tol {
                    return Err(Error::InvalidMesh(format!("vertices {i} and {j} coincide")));
                }
            }
        }
        Ok(())
    }

    /// Applies `p -> R(angle) p + shift`. The domain spec is left untouched;
    /// the result is meant for measuring invariance, not for refinement.
    pub fn transformed(&self, angle: f64, shift: [f64; 2]) -> TriMesh {
        let (s, c) = angle.sin_cos();
        let mut out = self.clone();
        for p in &mut out.vertices {
            *p = [c * p[0] - s * p[1] + shift[0], s * p[0] + c * p[1] + shift[1]];
        }
        if let DomainKind::Polygon { vertices } = &mut out.domain.kind {
            for p in vertices.iter_mut() {
                *p = [c * p[0] - s * p[1] + shift[0], s * p[0] + c * p[1] + shift[1]];
            }
        }
        out
    }
}

/// Area, total perimeter and per-component perimeters.
pub fn measures(mesh: &TriMesh) -> Measures {
    let area = (0..mesh.triangles.len()).map(|t| mesh.triangle_area(t)).sum();
    let mut component_perimeters = vec![0.0; mesh.domain.boundary_components()];
    for e in &mesh.boundary_edges {
        if e.component >= component_perimeters.len() {
            component_perimeters.resize(e.component + 1, 0.0);
        }
        component_perimeters[e.component] += mesh.edge_length(e);
    }
    Measures {
        area,
        perimeter: mesh.boundary_edges.iter().map(|e| mesh.edge_length(e)).sum(),
        component_perimeters,
    }
}

/// Builds a conforming mesh for `spec`; curved boundaries are inscribed
/// polygons with vertices on the true curve.
pub fn build_mesh(spec: &DomainSpec) -> Result<TriMesh> {
    spec.validate()?;
    let mesh = match &spec.kind {
        DomainKind::Disk { radius } => {
            let rings = (radius / spec.h).ceil().max(1.0) as usize;
            disk_rings(spec.clone(), rings, |p| [p[0] * radius, p[1] * radius])
        }
        DomainKind::Ellipse { a, b } => {
            let rings = (a.max(*b) / spec.h).ceil().max(1.0) as usize;
            disk_rings(spec.clone(), rings, |p| [p[0] * a, p[1] * b])
        }
        DomainKind::Annulus { inner, outer } => annulus_rings(spec.clone(), *inner, *outer),
        DomainKind::Polygon { vertices } => {
            let mut mesh = ear_clip(spec.clone(), vertices)?;
            while mesh.max_edge_length() > 1.5 * spec.h {
                mesh = refine(&mesh);
            }
            mesh
        }
    };
    mesh.validate()?;
    Ok(mesh)
}

/// Triangulates the band between two closed rings whose vertices are
/// listed counterclockwise, `inner` at the smaller radius. Each step adds
/// the shorter of the two candidate diagonals.
fn stitch(inner: &[usize], outer: &[usize], vertices: &[[f64; 2]], tris: &mut Vec<[usize; 3]>) {
    let (ni, no) = (inner.len(), outer.len());
    let (mut i, mut j) = (0, 0);
    while i < ni || j < no {
        let advance_outer = if i == ni {
            true
        } else if j == no {
            false
        } else {
            let d_outer = dist(vertices[inner[i % ni]], vertices[outer[(j + 1) % no]]);
            let d_inner = dist(vertices[inner[(i + 1) % ni]], vertices[outer[j % no]]);
            d_outer <= d_inner
        };
        if advance_outer {
            tris.push([inner[i % ni], outer[j % no], outer[(j + 1) % no]]);
            j += 1;
        } else {
            tris.push([inner[i % ni], outer[j % no], inner[(i + 1) % ni]]);
            i += 1;
        }
    }
}

/// Unit-disk ring mesh (6k vertices on ring k) pushed through `map`.
fn disk_rings(spec: DomainSpec, rings: usize, map: impl Fn([f64; 2]) -> [f64; 2]) -> TriMesh {
    let mut vertices = vec![[0.0, 0.0]];
    let mut ring_ids: Vec<Vec<usize>> = Vec::with_capacity(rings);
    for k in 1..=rings {
        let r = k as f64 / rings as f64;
        let n = 6 * k;
        let mut ring = Vec::with_capacity(n);
        for j in 0..n {
            let th = 2.0 * PI * j as f64 / n as f64;
            let p = if k == rings {
                [th.cos(), th.sin()]
            } else {
                [r * th.cos(), r * th.sin()]
            };
            ring.push(vertices.len());
            vertices.push(map(p));
        }
        ring_ids.push(ring);
    }
    let mut triangles = Vec::new();
    let first = &ring_ids[0];
    for j in 0..first.len() {
        triangles.push([0, first[j], first[(j + 1) % first.len()]]);
    }
    for k in 1..rings {
        stitch(&ring_ids[k - 1], &ring_ids[k], &vertices, &mut triangles);
    }
    let outer = &ring_ids[rings - 1];
    let boundary_edges = (0..outer.len())
        .map(|j| BoundaryEdge {
            v: [outer[j], outer[(j + 1) % outer.len()]],
            component: 0,
        })
        .collect();
    TriMesh { vertices, triangles, boundary_edges, domain: spec }
}

fn annulus_rings(spec: DomainSpec, inner: f64, outer: f64) -> TriMesh {
    let h = spec.h;
    let layers = ((outer - inner) / h).ceil().max(1.0) as usize;
    let mut vertices = Vec::new();
    let mut ring_ids: Vec<Vec<usize>> = Vec::new();
    for k in 0..=layers {
        let r = if k == layers {
            outer
        } else {
            inner + (outer - inner) * k as f64 / layers as f64
        };
        let n = ((2.0 * PI * r / h).ceil() as usize).max(6);
        let mut ring = Vec::with_capacity(n);
        for j in 0..n {
            let th = 2.0 * PI * j as f64 / n as f64;
            ring.push(vertices.len());
            vertices.push([r * th.cos(), r * th.sin()]);
        }
        ring_ids.push(ring);
    }
    let mut triangles = Vec::new();
    for k in 1..=layers {
        stitch(&ring_ids[k - 1], &ring_ids[k], &vertices, &mut triangles);
    }
    let mut boundary_edges = Vec::new();
    let out = &ring_ids[layers];
    for j in 0..out.len() {
        boundary_edges.push(BoundaryEdge {
            v: [out[j], out[(j + 1) % out.len()]],
            component: 0,
        });
    }
    let inn = &ring_ids[0];
    for j in 0..inn.len() {
        boundary_edges.push(BoundaryEdge {
            v: [inn[(j + 1) % inn.len()], inn[j]],
            component: 1,
        });
    }
    TriMesh { vertices, triangles, boundary_edges, domain: spec }
}

fn min_angle(p: [f64; 2], q: [f64; 2], r: [f64; 2]) -> f64 {
    let (a, b, c) = (dist(q, r), dist(p, r), dist(p, q));
    let cos_at = |opp: f64, s1: f64, s2: f64| ((s1 * s1 + s2 * s2 - opp * opp) / (2.0 * s1 * s2)).clamp(-1.0, 1.0);
    cos_at(a, b, c).acos().min(cos_at(b, a, c).acos()).min(cos_at(c, a, b).acos())
}

fn point_in_triangle(p: [f64; 2], a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> bool {
    tri_area(a, b, p) >= 0.0 && tri_area(b, c, p) >= 0.0 && tri_area(c, a, p) >= 0.0
}

/// Ear clipping that always removes the best-shaped available ear.
fn ear_clip(spec: DomainSpec, poly: &[[f64; 2]]) -> Result<TriMesh> {
    let mut remaining: Vec<usize> = (0..poly.len()).collect();
    let mut triangles = Vec::with_capacity(poly.len() - 2);
    while remaining.len() > 3 {
        let n = remaining.len();
        let mut best: Option<(usize, f64)> = None;
        for k in 0..n {
            let (ip, ic, inx) = (remaining[(k + n - 1) % n], remaining[k], remaining[(k + 1) % n]);
            let (a, b, c) = (poly[ip], poly[ic], poly[inx]);
            if tri_area(a, b, c) <= 0.0 {
                continue;
            }
            let blocked = remaining
                .iter()
                .filter(|&&v| v != ip && v != ic && v != inx)
                .any(|&v| point_in_triangle(poly[v], a, b, c));
            if blocked {
                continue;
            }
            let q = min_angle(a, b, c);
            if best.is_none_or(|(_, bq)| q > bq) {
                best = Some((k, q));
            }
        }
        let (k, _) = best.ok_or_else(|| Error::InvalidDomain("ear clipping found no valid ear".into()))?;
        triangles.push([remaining[(k + n - 1) % n], remaining[k], remaining[(k + 1) % n]]);
        remaining.remove(k);
    }
    triangles.push([remaining[0], remaining[1], remaining[2]]);
    let n = poly.len();
    let boundary_edges = (0..n)
        .map(|i| BoundaryEdge { v: [i, (i + 1) % n], component: 0 })
        .collect();
    Ok(TriMesh {
        vertices: poly.to_vec(),
        triangles,
        boundary_edges,
        domain: spec,
    })
}

/// Splits every triangle into four through its edge midpoints. Midpoints
/// of curved boundary edges are projected onto the true curve.
pub fn refine(mesh: &TriMesh) -> TriMesh {
    let mut boundary_comp: HashMap<[usize; 2], usize> = HashMap::new();
    for e in &mesh.boundary_edges {
        boundary_comp.insert([e.v[0].min(e.v[1]), e.v[0].max(e.v[1])], e.component);
    }
    let mut vertices = mesh.vertices.clone();
    let mut midpoint: HashMap<[usize; 2], usize> = HashMap::new();
    let mut mid = |a: usize, b: usize, vertices: &mut Vec<[f64; 2]>| -> usize {
        let key = [a.min(b), a.max(b)];
        *midpoint.entry(key).or_insert_with(|| {
            let (p, q) = (vertices[a], vertices[b]);
            let mut m = [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])];
            if let Some(&comp) = boundary_comp.get(&key) {
                m = mesh.domain.project_to_boundary(comp, m);
            }
            vertices.push(m);
            vertices.len() - 1
        })
    };
    let mut triangles = Vec::with_capacity(4 * mesh.triangles.len());
    for &[a, b, c] in &mesh.triangles {
        let ab = mid(a, b, &mut vertices);
        let bc = mid(b, c, &mut vertices);
        let ca = mid(c, a, &mut vertices);
        triangles.push([a, ab, ca]);
        triangles.push([ab, b, bc]);
        triangles.push([ca, bc, c]);
        triangles.push([ab, bc, ca]);
    }
    let mut boundary_edges = Vec::with_capacity(2 * mesh.boundary_edges.len());
    for e in &mesh.boundary_edges {
        let m = mid(e.v[0], e.v[1], &mut vertices);
        boundary_edges.push(BoundaryEdge { v: [e.v[0], m], component: e.component });
        boundary_edges.push(BoundaryEdge { v: [m, e.v[1]], component: e.component });
    }
    TriMesh {
        vertices,
        triangles,
        boundary_edges,
        domain: mesh.domain.clone(),
    }
}

/// `levels` successive midpoint refinements.
pub fn refine_times(mesh: &TriMesh, levels: usize) -> TriMesh {
    let mut m = mesh.clone();
    for _ in 0..levels {
        m = refine(&m);
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn euler_with_exterior_face(m: &TriMesh) -> i64 {
        m.vertices.len() as i64 - m.edges().len() as i64 + m.triangles.len() as i64 + 1
    }

    #[test]
    fn disk_boundary_on_circle() {
        let m = build_mesh(&DomainSpec::disk(1.0, 0.5)).unwrap();
        for p in &m.vertices {
            assert!(p[0].hypot(p[1]) <= 1.0 + 1e-12);
        }
        for v in m.boundary_vertices() {
            let p = m.vertices[v];
            assert!((p[0].hypot(p[1]) - 1.0).abs() < 1e-12);
        }
        assert!(m.max_edge_length() <= 1.5 * 0.5);
    }

    #[test]
    fn unit_square_has_exact_perimeter() {
        let m = build_mesh(&DomainSpec::square(1.0, 0.25)).unwrap();
        let ms = measures(&m);
        assert_eq!(m.boundary_loops().unwrap().len(), 1);
        assert!((ms.perimeter - 4.0).abs() < 1e-14);
        assert!((ms.area - 1.0).abs() < 1e-14);
        assert!(m.max_edge_length() <= 1.5 * 0.25);
    }

    #[test]
    fn annulus_has_two_loops() {
        let m = build_mesh(&DomainSpec::annulus(1.0, 2.0, 0.2)).unwrap();
        let loops = m.boundary_loops().unwrap();
        assert_eq!(loops.len(), 2);
        let ms = measures(&m);
        assert!((ms.component_perimeters[0] - 4.0 * PI).abs() < 0.01 * 4.0 * PI);
        assert!((ms.component_perimeters[1] - 2.0 * PI).abs() < 0.01 * 2.0 * PI);
        assert!((ms.perimeter - 6.0 * PI).abs() < 0.01 * 6.0 * PI);
        assert!(m.max_edge_length() <= 1.5 * 0.2);
    }

    #[test]
    fn refinement_counts_and_invariants() {
        for spec in [
            DomainSpec::disk(1.0, 0.5),
            DomainSpec::annulus(1.0, 2.0, 0.4),
            DomainSpec::ellipse(2.0, 1.0, 0.5),
            DomainSpec::rectangle(2.0, 1.0, 0.5),
        ] {
            let m = build_mesh(&spec).unwrap();
            let r = refine(&m);
            r.validate().unwrap();
            assert_eq!(r.triangles.len(), 4 * m.triangles.len());
            assert_eq!(r.vertices.len(), m.vertices.len() + m.edges().len());
            assert_eq!(euler_with_exterior_face(&m), 2 - spec.holes() as i64);
            assert_eq!(euler_with_exterior_face(&r), 2 - spec.holes() as i64);
            assert!(measures(&r).area >= measures(&m).area - 1e-14);
        }
    }

    #[test]
    fn disk_perimeter_increases_toward_two_pi() {
        let mut m = build_mesh(&DomainSpec::disk(1.0, 0.5)).unwrap();
        let mut last = measures(&m).perimeter;
        for _ in 0..4 {
            m = refine(&m);
            let p = measures(&m).perimeter;
            assert!(p > last && p < 2.0 * PI);
            last = p;
        }
        let ms = measures(&m);
        assert!((ms.perimeter - 2.0 * PI).abs() < 0.005 * 2.0 * PI);
        assert!((ms.area - PI).abs() < 0.005 * PI);
    }

    #[test]
    fn square_perimeter_unchanged_by_refinement() {
        let m = refine_times(&build_mesh(&DomainSpec::square(1.0, 0.5)).unwrap(), 2);
        assert!((measures(&m).perimeter - 4.0).abs() < 1e-13);
    }

    #[test]
    fn nonconvex_polygon_meshes() {
        let l_shape = vec![
            [0.0, 0.0],
            [2.0, 0.0],
            [2.0, 1.0],
            [1.0, 1.0],
            [1.0, 2.0],
            [0.0, 2.0],
        ];
        let m = build_mesh(&DomainSpec::polygon(l_shape, 0.3)).unwrap();
        assert!((measures(&m).area - 3.0).abs() < 1e-13);
        assert!((measures(&m).perimeter - 8.0).abs() < 1e-13);
    }

    #[test]
    fn validate_catches_broken_meshes() {
        let good = build_mesh(&DomainSpec::square(1.0, 0.5)).unwrap();
        let mut flipped = good.clone();
        flipped.triangles[0].swap(0, 1);
        assert!(flipped.validate().is_err());
        let mut missing = good.clone();
        missing.boundary_edges.pop();
        assert!(missing.validate().is_err());
        let mut dup = good;
        dup.vertices[1] = dup.vertices[0];
        assert!(dup.validate().is_err());
    }
}
