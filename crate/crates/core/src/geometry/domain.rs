use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape of a planar domain. Curved domains are centered at the origin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainKind {
    Disk { radius: f64 },
    Annulus { inner: f64, outer: f64 },
    /// Simple counterclockwise polygon.
    Polygon { vertices: Vec<[f64; 2]> },
    /// Axis-aligned ellipse with semi-axes `a` (along x) and `b` (along y).
    Ellipse { a: f64, b: f64 },
}

/// A domain together with the target edge length of its discretization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub kind: DomainKind,
    pub h: f64,
}

impl DomainSpec {
    pub fn disk(radius: f64, h: f64) -> Self {
        Self { kind: DomainKind::Disk { radius }, h }
    }

    pub fn annulus(inner: f64, outer: f64, h: f64) -> Self {
        Self { kind: DomainKind::Annulus { inner, outer }, h }
    }

    pub fn polygon(vertices: Vec<[f64; 2]>, h: f64) -> Self {
        Self { kind: DomainKind::Polygon { vertices }, h }
    }

    pub fn ellipse(a: f64, b: f64, h: f64) -> Self {
        Self { kind: DomainKind::Ellipse { a, b }, h }
    }

    /// Axis-aligned rectangle `[0, width] x [0, height]`.
    pub fn rectangle(width: f64, height: f64, h: f64) -> Self {
        Self::polygon(
            vec![[0.0, 0.0], [width, 0.0], [width, height], [0.0, height]],
            h,
        )
    }

    pub fn square(side: f64, h: f64) -> Self {
        Self::rectangle(side, side, h)
    }

    /// Number of boundary components of the continuous domain.
    pub fn boundary_components(&self) -> usize {
        match self.kind {
            DomainKind::Annulus { .. } => 2,
            _ => 1,
        }
    }

    pub fn holes(&self) -> usize {
        self.boundary_components() - 1
    }

    /// Dilation by `t > 0` about the origin; the target edge length scales too.
    pub fn scaled(&self, t: f64) -> Self {
        let kind = match &self.kind {
            DomainKind::Disk { radius } => DomainKind::Disk { radius: radius * t },
            DomainKind::Annulus { inner, outer } => DomainKind::Annulus {
                inner: inner * t,
                outer: outer * t,
            },
            DomainKind::Polygon { vertices } => DomainKind::Polygon {
                vertices: vertices.iter().map(|p| [p[0] * t, p[1] * t]).collect(),
            },
            DomainKind::Ellipse { a, b } => DomainKind::Ellipse { a: a * t, b: b * t },
        };
        Self { kind, h: self.h * t }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidDomain(msg));
        if !(self.h.is_finite() && self.h > 0.0) {
            return bad(format!("target edge length must be positive, got {}", self.h));
        }
        match &self.kind {
            DomainKind::Disk { radius } => {
                if !(radius.is_finite() && *radius > 0.0) {
                    return bad(format!("disk radius must be positive, got {radius}"));
                }
            }
            DomainKind::Annulus { inner, outer } => {
                if !(inner.is_finite() && outer.is_finite() && *inner > 0.0 && inner < outer) {
                    return bad(format!(
                        "annulus radii must satisfy 0 < inner < outer, got ({inner}, {outer})"
                    ));
                }
            }
            DomainKind::Ellipse { a, b } => {
                if !(a.is_finite() && b.is_finite() && *a > 0.0 && *b > 0.0) {
                    return bad(format!("ellipse semi-axes must be positive, got ({a}, {b})"));
                }
            }
            DomainKind::Polygon { vertices } => validate_polygon(vertices)?,
        }
        Ok(())
    }

    /// Moves a point lying near boundary component `component` onto the true
    /// curve. Polygon edges are exact, so points are returned unchanged.
    pub fn project_to_boundary(&self, component: usize, p: [f64; 2]) -> [f64; 2] {
        match &self.kind {
            DomainKind::Disk { radius } => scale_to_radius(p, *radius),
            DomainKind::Annulus { inner, outer } => {
                scale_to_radius(p, if component == 0 { *outer } else { *inner })
            }
            DomainKind::Ellipse { a, b } => {
                let q = [p[0] / a, p[1] / b];
                let r = q[0].hypot(q[1]);
                [a * q[0] / r, b * q[1] / r]
            }
            DomainKind::Polygon { .. } => p,
        }
    }
}

fn scale_to_radius(p: [f64; 2], radius: f64) -> [f64; 2] {
    let r = p[0].hypot(p[1]);
    [p[0] * radius / r, p[1] * radius / r]
}

pub(crate) fn polygon_signed_area(vertices: &[[f64; 2]]) -> f64 {
    let n = vertices.len();
    (0..n)
        .map(|i| {
            let p = vertices[i];
            let q = vertices[(i + 1) % n];
            p[0] * q[1] - q[0] * p[1]
        })
        .sum::<f64>()
        * 0.5
}

fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn on_segment(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> bool {
    p[0] >= a[0].min(b[0]) && p[0] <= a[0].max(b[0]) && p[1] >= a[1].min(b[1]) && p[1] <= a[1].max(b[1])
}

fn segments_intersect(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(c, d, a))
        || (d2 == 0.0 && on_segment(c, d, b))
        || (d3 == 0.0 && on_segment(a, b, c))
        || (d4 == 0.0 && on_segment(a, b, d))
}

fn validate_polygon(vertices: &[[f64; 2]]) -> Result<()> {
    let n = vertices.len();
    if n < 3 {
        return Err(Error::InvalidDomain(format!("polygon needs at least 3 vertices, got {n}")));
    }
    if vertices.iter().flatten().any(|c| !c.is_finite()) {
        return Err(Error::InvalidDomain("polygon has non-finite coordinates".into()));
    }
    let area = polygon_signed_area(vertices);
    if area == 0.0 {
        return Err(Error::InvalidDomain("polygon has zero area".into()));
    }
    if area < 0.0 {
        return Err(Error::InvalidDomain(format!(
            "polygon is clockwise (signed area {area}); vertices must be counterclockwise"
        )));
    }
    for i in 0..n {
        if vertices[i] == vertices[(i + 1) % n] {
            return Err(Error::InvalidDomain(format!("polygon vertices {i} and {} coincide", (i + 1) % n)));
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                continue;
            }
            let (a, b) = (vertices[i], vertices[(i + 1) % n]);
            let (c, d) = (vertices[j], vertices[(j + 1) % n]);
            if segments_intersect(a, b, c, d) {
                return Err(Error::InvalidDomain(format!(
                    "polygon is self-intersecting: edge {i} meets edge {j}"
                )));
            }
        }
    }
    Ok(())
}

fn parse_numbers(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidDomain(format!("cannot parse number {t:?}")))
        })
        .collect()
}

/// Shape part of a domain string such as `disk:1`, `annulus:1,2`,
/// `square:1`, `rect:2,1`, `ellipse:2,1` or `polygon:x0,y0,x1,y1,...`.
pub fn parse_domain_kind(s: &str) -> Result<DomainKind> {
    let (kind, params) = s
        .split_once(':')
        .ok_or_else(|| Error::InvalidDomain(format!("expected kind:params, got {s:?}")))?;
    let p = parse_numbers(params)?;
    let arity = |k: usize| -> Result<()> {
        if p.len() == k {
            Ok(())
        } else {
            Err(Error::InvalidDomain(format!("{kind} takes {k} parameter(s), got {}", p.len())))
        }
    };
    let kind = match kind {
        "disk" => {
            arity(1)?;
            DomainKind::Disk { radius: p[0] }
        }
        "annulus" => {
            arity(2)?;
            DomainKind::Annulus { inner: p[0], outer: p[1] }
        }
        "ellipse" => {
            arity(2)?;
            DomainKind::Ellipse { a: p[0], b: p[1] }
        }
        "square" => {
            arity(1)?;
            DomainSpec::square(p[0], 1.0).kind
        }
        "rect" | "rectangle" => {
            arity(2)?;
            DomainSpec::rectangle(p[0], p[1], 1.0).kind
        }
        "polygon" => {
            if p.len() < 6 || p.len() % 2 != 0 {
                return Err(Error::InvalidDomain(
                    "polygon takes an even number (>= 6) of coordinates".into(),
                ));
            }
            DomainKind::Polygon {
                vertices: p.chunks(2).map(|c| [c[0], c[1]]).collect(),
            }
        }
        other => return Err(Error::InvalidDomain(format!("unknown domain kind {other:?}"))),
    };
    Ok(kind)
}

impl fmt::Display for DomainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DomainKind::Disk { radius } => write!(f, "disk:{radius}"),
            DomainKind::Annulus { inner, outer } => write!(f, "annulus:{inner},{outer}"),
            DomainKind::Ellipse { a, b } => write!(f, "ellipse:{a},{b}"),
            DomainKind::Polygon { vertices } => {
                write!(f, "polygon:")?;
                for (i, v) in vertices.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{},{}", v[0], v[1])?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for DomainKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_domain_kind(s)
    }
}
