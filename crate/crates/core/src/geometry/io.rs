//! Plain-text mesh format.
//!
//! ```text
//! insulab-mesh v1
//! domain <kind:params> <h>
//! <vertex count>
//! x y                 (one line per vertex)
//! <triangle count>
//! i j k               (0-based, counterclockwise)
//! <boundary edge count>
//! i j comp            (domain on the left of i -> j)
//! ```
//!
//! Coordinates are written with the shortest representation that parses
//! back to the same `f64`, so write/read round-trips bit for bit.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use super::domain::{parse_domain_kind, DomainSpec};
use super::mesh::{BoundaryEdge, TriMesh};
use crate::error::{Error, Result};

pub const MESH_HEADER: &str = "insulab-mesh v1";

pub fn mesh_to_string(mesh: &TriMesh) -> String {
    let mut s = String::new();
    writeln!(s, "{MESH_HEADER}").unwrap();
    writeln!(s, "domain {} {}", mesh.domain.kind, mesh.domain.h).unwrap();
    writeln!(s, "{}", mesh.vertices.len()).unwrap();
    for p in &mesh.vertices {
        writeln!(s, "{} {}", p[0], p[1]).unwrap();
    }
    writeln!(s, "{}", mesh.triangles.len()).unwrap();
    for t in &mesh.triangles {
        writeln!(s, "{} {} {}", t[0], t[1], t[2]).unwrap();
    }
    writeln!(s, "{}", mesh.boundary_edges.len()).unwrap();
    for e in &mesh.boundary_edges {
        writeln!(s, "{} {} {}", e.v[0], e.v[1], e.component).unwrap();
    }
    s
}

pub fn write_mesh<W: Write>(mesh: &TriMesh, mut w: W) -> Result<()> {
    w.write_all(mesh_to_string(mesh).as_bytes())?;
    Ok(())
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    line: usize,
}

impl<R: BufRead> Lines<R> {
    fn next_line(&mut self) -> Result<String> {
        loop {
            self.line += 1;
            match self.inner.next() {
                None => return Err(self.err("unexpected end of file")),
                Some(l) => {
                    let l = l?;
                    if !l.trim().is_empty() {
                        return Ok(l);
                    }
                }
            }
        }
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse { line: self.line, msg: msg.into() }
    }

    fn fields<T: std::str::FromStr>(&mut self, n: usize) -> Result<Vec<T>> {
        let l = self.next_line()?;
        let parts: Vec<&str> = l.split_whitespace().collect();
        if parts.len() != n {
            return Err(self.err(format!("expected {n} fields, got {}", parts.len())));
        }
        parts
            .iter()
            .map(|p| p.parse::<T>().map_err(|_| self.err(format!("cannot parse {p:?}"))))
            .collect()
    }

    fn count(&mut self) -> Result<usize> {
        Ok(self.fields::<usize>(1)?[0])
    }
}

/// Parses a mesh and checks all mesh invariants.
pub fn read_mesh<R: BufRead>(r: R) -> Result<TriMesh> {
    let mut lines = Lines { inner: r.lines(), line: 0 };
    let header = lines.next_line()?;
    if header.trim() != MESH_HEADER {
        return Err(lines.err(format!("expected header {MESH_HEADER:?}, got {header:?}")));
    }
    let dom = lines.next_line()?;
    let parts: Vec<&str> = dom.split_whitespace().collect();
    if parts.len() != 3 || parts[0] != "domain" {
        return Err(lines.err("expected `domain <kind:params> <h>`"));
    }
    let kind = parse_domain_kind(parts[1]).map_err(|e| lines.err(e.to_string()))?;
    let h: f64 = parts[2].parse().map_err(|_| lines.err("cannot parse h"))?;
    let nv = lines.count()?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let f = lines.fields::<f64>(2)?;
        vertices.push([f[0], f[1]]);
    }
    let nt = lines.count()?;
    let mut triangles = Vec::with_capacity(nt);
    for _ in 0..nt {
        let f = lines.fields::<usize>(3)?;
        triangles.push([f[0], f[1], f[2]]);
    }
    let nb = lines.count()?;
    let mut boundary_edges = Vec::with_capacity(nb);
    for _ in 0..nb {
        let f = lines.fields::<usize>(3)?;
        boundary_edges.push(BoundaryEdge { v: [f[0], f[1]], component: f[2] });
    }
    let mesh = TriMesh {
        vertices,
        triangles,
        boundary_edges,
        domain: DomainSpec { kind, h },
    };
    mesh.validate()?;
    Ok(mesh)
}

pub fn mesh_from_str(s: &str) -> Result<TriMesh> {
    read_mesh(s.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_mesh, refine};

    #[test]
    fn round_trip_is_bit_exact() {
        for spec in [DomainSpec::disk(1.0, 0.4), DomainSpec::annulus(1.0, 2.0, 0.5)] {
            let m = refine(&build_mesh(&spec).unwrap());
            let back = mesh_from_str(&mesh_to_string(&m)).unwrap();
            assert_eq!(back, m);
            for (p, q) in back.vertices.iter().zip(&m.vertices) {
                assert_eq!(p[0].to_bits(), q[0].to_bits());
                assert_eq!(p[1].to_bits(), q[1].to_bits());
            }
        }
    }

    #[test]
    fn rejects_bad_header_and_truncation() {
        assert!(matches!(mesh_from_str("mesh v0\n"), Err(Error::Parse { line: 1, .. })));
        let m = build_mesh(&DomainSpec::square(1.0, 1.0)).unwrap();
        let s = mesh_to_string(&m);
        let cut = &s[..s.len() - 8];
        assert!(mesh_from_str(cut).is_err());
    }
}
