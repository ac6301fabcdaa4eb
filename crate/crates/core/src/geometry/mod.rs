//! Domains, structured triangulations, midpoint refinement and measures.

mod domain;
mod io;
mod mesh;

pub use domain::{parse_domain_kind, DomainKind, DomainSpec};
pub use io::{mesh_from_str, mesh_to_string, read_mesh, write_mesh, MESH_HEADER};
pub use mesh::{build_mesh, measures, refine, refine_times, BoundaryEdge, Measures, TriMesh};
