//! Bessel functions of the first kind for integer and half-integer orders.

use std::f64::consts::PI;

use crate::error::{Error, Result};

pub const MAX_ARG: f64 = 60.0;
pub const MAX_ORDER: f64 = 20.0;
const SERIES_LIMIT: f64 = 8.0;

/// Order of a Bessel function: an integer or a half-integer.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BesselOrder(f64);

impl BesselOrder {
    pub fn new(s: f64) -> Result<Self> {
        let twice = 2.0 * s;
        if !s.is_finite() || twice.round() != twice || s.abs() > MAX_ORDER {
            return Err(Error::OutOfRange(format!(
                "Bessel order {s} must be an integer or half-integer with |s| <= {MAX_ORDER}"
            )));
        }
        Ok(Self(s))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    fn is_integer(self) -> bool {
        self.0.fract() == 0.0
    }
}

/// Γ(x) for positive integer or half-integer `x`.
pub fn gamma_half_integer(x: f64) -> f64 {
    let mut g = if x.fract() == 0.0 { 1.0 } else { PI.sqrt() };
    let mut t = if x.fract() == 0.0 { 1.0 } else { 0.5 };
    while t < x - 0.25 {
        g *= t;
        t += 1.0;
    }
    g
}

fn series(s: f64, z: f64) -> f64 {
    let half = 0.5 * z;
    let q = half * half;
    let mut term = half.powf(s) / gamma_half_integer(s + 1.0);
    let mut sum = term;
    for k in 1..200 {
        let kf = k as f64;
        term *= -q / (kf * (kf + s));
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

/// Miller's backward recurrence, normalized by `J_0 + 2 Σ J_2k = 1`.
fn miller(n: usize, z: f64) -> f64 {
    let start = 2 * ((n.max(z as usize) + 40) / 2);
    let (mut next, mut cur) = (0.0f64, 1e-300f64);
    let mut norm = 0.0;
    let mut wanted = 0.0;
    for k in (1..=start).rev() {
        let prev = 2.0 * k as f64 / z * cur - next;
        next = cur;
        cur = prev;
        // `cur` now holds J_{k-1}
        if k - 1 == n {
            wanted = cur;
        }
        if k - 1 > 0 && (k - 1) % 2 == 0 {
            norm += 2.0 * cur;
        }
        if cur.abs() > 1e250 {
            cur *= 1e-250;
            next *= 1e-250;
            norm *= 1e-250;
            wanted *= 1e-250;
        }
    }
    norm += cur;
    wanted / norm
}

/// Upward recurrence from the closed forms of `J_{-1/2}` and `J_{1/2}`.
fn half_integer_upward(s: f64, z: f64) -> f64 {
    let c = (2.0 / (PI * z)).sqrt();
    let (mut prev, mut cur) = (c * z.cos(), c * z.sin());
    let mut order = 0.5;
    if s == -0.5 {
        return prev;
    }
    while order < s - 0.25 {
        let next = 2.0 * order / z * cur - prev;
        prev = cur;
        cur = next;
        order += 1.0;
    }
    cur
}

/// `J_s(z)` for `0 <= z <= 60`.
pub fn bessel_j(s: f64, z: f64) -> Result<f64> {
    let order = BesselOrder::new(s)?;
    if !(0.0..=MAX_ARG).contains(&z) {
        return Err(Error::OutOfRange(format!("Bessel argument {z} outside [0, {MAX_ARG}]")));
    }
    if order.is_integer() && s < 0.0 {
        let n = -s;
        let sign = if n % 2.0 == 0.0 { 1.0 } else { -1.0 };
        return Ok(sign * bessel_j(n, z)?);
    }
    if s < -0.5 {
        return Err(Error::OutOfRange(format!("half-integer order {s} below -1/2 is not supported")));
    }
    if z == 0.0 {
        return match s {
            s if s == 0.0 => Ok(1.0),
            s if s > 0.0 => Ok(0.0),
            _ => Err(Error::OutOfRange("J_{-1/2} is singular at 0".into())),
        };
    }
    if z <= SERIES_LIMIT {
        return Ok(series(s, z));
    }
    if order.is_integer() {
        Ok(miller(s as usize, z))
    } else {
        Ok(half_integer_upward(s, z))
    }
}

/// `J_s'(z) = -J_{s+1}(z) + s J_s(z) / z`, checked against
/// `J_s'(z) = J_{s-1}(z) - s J_s(z) / z`.
pub fn bessel_j_deriv(s: f64, z: f64) -> Result<f64> {
    BesselOrder::new(s)?;
    if z == 0.0 {
        return match s {
            s if s == 0.0 => Ok(0.0),
            s if s == 1.0 => Ok(0.5),
            s if s > 1.0 => Ok(0.0),
            _ => Err(Error::OutOfRange(format!("J_{s}' is unbounded at 0"))),
        };
    }
    let js = bessel_j(s, z)?;
    let up = -bessel_j(s + 1.0, z)? + s * js / z;
    let down = bessel_j(s - 1.0, z)? - s * js / z;
    let scale = 1.0f64.max(up.abs()).max((s * js / z).abs());
    if (up - down).abs() > 1e-11 * scale {
        return Err(Error::NotConverged {
            what: "Bessel derivative cross-check",
            iterations: 0,
            residual: (up - down).abs(),
            history: vec![up, down],
        });
    }
    Ok(up)
}

/// `|J_{s-1}(z) + J_{s+1}(z) - 2s J_s(z) / z|`.
pub fn recurrence_residual(s: f64, z: f64) -> Result<f64> {
    if !(z > 0.0) {
        return Err(Error::OutOfRange(format!("recurrence needs z > 0, got {z}")));
    }
    Ok((bessel_j(s - 1.0, z)? + bessel_j(s + 1.0, z)? - 2.0 * s * bessel_j(s, z)? / z).abs())
}

/// Bisection to full precision on a bracket where `f` changes sign.
pub fn bisect(f: impl Fn(f64) -> Result<f64>, mut lo: f64, mut hi: f64) -> Result<f64> {
    let mut flo = f(lo)?;
    let fhi = f(hi)?;
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::Bracket(format!("no sign change on [{lo}, {hi}]: f = {flo:e}, {fhi:e}")));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid)?;
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// First root of `f` found by scanning `[a, b]` with the given step and
/// refining the first sign change by bisection.
pub fn first_root(f: impl Fn(f64) -> Result<f64>, a: f64, b: f64, step: f64) -> Result<f64> {
    let mut t = a;
    let mut ft = f(t)?;
    while t < b {
        let next = (t + step).min(b);
        let fn_ = f(next)?;
        if fn_ == 0.0 || fn_.signum() != ft.signum() {
            return bisect(&f, t, next);
        }
        t = next;
        ft = fn_;
    }
    Err(Error::Bracket(format!("no sign change found in [{a}, {b}]")))
}

/// First positive zero `j_{s,1}` of `J_s`.
pub fn first_zero(s: f64) -> Result<f64> {
    first_root(|t| bessel_j(s, t), 0.1, 20.0, 0.05)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `J_n(z) = (1/π) ∫_0^π cos(nτ - z sin τ) dτ`, trapezoid rule (spectrally
    /// accurate for this periodic integrand).
    fn integral_oracle(n: i32, z: f64) -> f64 {
        let m = 4000;
        let h = PI / m as f64;
        let f = |t: f64| (n as f64 * t - z * t.sin()).cos();
        let mut s = 0.5 * (f(0.0) + f(PI));
        for k in 1..m {
            s += f(k as f64 * h);
        }
        s * h / PI
    }

    #[test]
    fn integer_orders_match_integral_representation() {
        for n in 0..6 {
            for &z in &[0.3, 1.0, 2.5, 7.9, 8.1, 12.0, 25.0, 40.0, 59.5] {
                let got = bessel_j(n as f64, z).unwrap();
                let want = integral_oracle(n, z);
                assert!((got - want).abs() < 1e-12, "J_{n}({z}) = {got} vs {want}");
            }
        }
    }

    #[test]
    fn half_integer_orders_match_spherical_forms() {
        for &z in &[0.2, 1.0, 5.0, 8.5, 20.0, 55.0] {
            let c = (2.0 / (PI * z)).sqrt();
            let (s, co) = (z.sin(), z.cos());
            let j32 = c * (s / z - co);
            let j52 = c * ((3.0 / (z * z) - 1.0) * s - 3.0 * co / z);
            assert!((bessel_j(0.5, z).unwrap() - c * s).abs() < 1e-13);
            assert!((bessel_j(1.5, z).unwrap() - j32).abs() < 1e-12, "{z}");
            assert!((bessel_j(2.5, z).unwrap() - j52).abs() < 1e-12, "{z}");
        }
    }

    #[test]
    fn values_at_zero() {
        assert_eq!(bessel_j(0.0, 0.0).unwrap(), 1.0);
        assert_eq!(bessel_j(1.5, 0.0).unwrap(), 0.0);
        assert_eq!(bessel_j(3.0, 0.0).unwrap(), 0.0);
        assert_eq!(bessel_j_deriv(1.0, 0.0).unwrap(), 0.5);
        assert!(bessel_j_deriv(0.5, 0.0).is_err());
    }

    #[test]
    fn rejects_unsupported_input() {
        assert!(bessel_j(0.3, 1.0).is_err());
        assert!(bessel_j(1.0, 61.0).is_err());
        assert!(bessel_j(1.0, -0.1).is_err());
    }

    #[test]
    fn derivative_paths_agree() {
        let d0 = bessel_j_deriv(0.0, 1.0).unwrap();
        assert!((d0 + bessel_j(1.0, 1.0).unwrap()).abs() < 1e-12);
        let r = bessel_j(0.0, 1.0).unwrap() + bessel_j(2.0, 1.0).unwrap() - 2.0 * bessel_j(1.0, 1.0).unwrap();
        assert!(r.abs() < 1e-12);
    }

    #[test]
    fn known_roots() {
        let j01 = first_zero(0.0).unwrap();
        assert!((j01 - 2.404825557695773).abs() < 1e-12);
        assert!(bessel_j(0.0, 2.404826).unwrap().abs() < 1e-6);
        let p = first_root(|t| bessel_j_deriv(1.0, t), 0.1, 20.0, 0.05).unwrap();
        assert!((p - 1.8411837813406593).abs() < 1e-12);
        let j_half = first_zero(0.5).unwrap();
        assert!((j_half - PI).abs() < 1e-12);
    }

    #[test]
    fn gamma_values() {
        assert_eq!(gamma_half_integer(1.0), 1.0);
        assert_eq!(gamma_half_integer(4.0), 6.0);
        assert!((gamma_half_integer(0.5) - PI.sqrt()).abs() < 1e-15);
        assert!((gamma_half_integer(2.5) - 0.75 * PI.sqrt()).abs() < 1e-15);
    }
}
