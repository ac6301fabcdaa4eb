use insulab::geometry::{build_mesh, refine_times, DomainKind, DomainSpec, TriMesh};
use serde::Serialize;

use crate::CliError;

/// Everything a command's output depends on. Serialized into every report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub domain: String,
    pub h: f64,
    pub refine: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m_grid: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    pub seed: u64,
}

impl RunConfig {
    pub fn mesh(&self) -> Result<TriMesh, CliError> {
        let kind: DomainKind = self.domain.parse().map_err(|e| CliError::Usage(format!("{e}")))?;
        let spec = DomainSpec { kind, h: self.h };
        spec.validate().map_err(|e| CliError::Usage(format!("{e}")))?;
        Ok(refine_times(&build_mesh(&spec)?, self.refine))
    }

    pub fn check(&self) -> Result<(), CliError> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(CliError::Usage(format!("--h must be positive, got {}", self.h)));
        }
        if let Some(tol) = self.tol {
            if !(tol > 0.0 && tol < 1.0) {
                return Err(CliError::Usage(format!("--tol must lie in (0, 1), got {tol}")));
            }
        }
        if let Some(m) = self.m {
            if !(m > 0.0 && m.is_finite()) {
                return Err(CliError::Usage(format!("--m must be positive, got {m}")));
            }
        }
        Ok(())
    }
}

/// `a:b:n`, `n` equally spaced values from `a` to `b` inclusive.
pub fn parse_grid(s: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = s.split(':').collect();
    let [a, b, n] = parts[..] else {
        return Err(CliError::Usage(format!("--m-grid expects a:b:n, got {s:?}")));
    };
    let num = |t: &str| {
        t.trim()
            .parse::<f64>()
            .map_err(|_| CliError::Usage(format!("--m-grid: {t:?} is not a number")))
    };
    let (a, b) = (num(a)?, num(b)?);
    let n: usize = n
        .trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("--m-grid: {n:?} is not a point count")))?;
    if n == 0 {
        return Err(CliError::Usage("--m-grid is empty".into()));
    }
    if !(a > 0.0 && b.is_finite()) || (n > 1 && !(b > a)) || (n == 1 && a != b) {
        return Err(CliError::Usage(format!(
            "--m-grid needs 0 < a < b (or a = b for one point), got {a}:{b}:{n}"
        )));
    }
    if n == 1 {
        return Ok(vec![a]);
    }
    Ok((0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_grid("1:2:3").unwrap(), vec![1.0, 1.5, 2.0]);
        assert_eq!(parse_grid("0.5:0.5:1").unwrap(), vec![0.5]);
        for bad in ["1:2:0", "1:2", "2:1:4", "0:1:3", "a:1:2", "1:2:x", "-1:1:3"] {
            assert!(parse_grid(bad).is_err(), "{bad}");
        }
    }
}
