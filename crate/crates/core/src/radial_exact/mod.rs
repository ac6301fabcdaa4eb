//! Closed-form radial solutions on balls and annuli.

mod bessel;

pub use bessel::{
    bessel_j, bessel_j_deriv, bisect, first_root, first_zero, gamma_half_integer, recurrence_residual, BesselOrder,
};

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_dim(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::Precondition(format!("dimension must be at least 2, got {n}")));
    }
    if n > 30 {
        return Err(Error::OutOfRange(format!("dimension {n} exceeds the supported Bessel orders")));
    }
    Ok(())
}

/// Volume of the unit ball in `R^n`.
pub fn unit_ball_volume(n: usize) -> f64 {
    PI.powf(n as f64 / 2.0) / gamma_half_integer(n as f64 / 2.0 + 1.0)
}

/// `t J_{n/2-1}(t) - (n-1) J_{n/2}(t)`, proportional to the derivative of
/// `t^{1-n/2} J_{n/2}(t)`.
pub fn radial_neumann_function(n: usize, t: f64) -> Result<f64> {
    let s = n as f64 / 2.0;
    Ok(t * bessel_j(s - 1.0, t)? - (n as f64 - 1.0) * bessel_j(s, t)?)
}

/// First positive zero of the derivative of `t ↦ t^{1-n/2} J_{n/2}(t)`.
pub fn first_deriv_zero(n: usize) -> Result<f64> {
    check_dim(n)?;
    first_root(|t| radial_neumann_function(n, t), 0.1, 20.0, 0.05)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallThresholds {
    pub n: usize,
    pub radius: f64,
    pub volume: f64,
    pub perimeter: f64,
    /// First positive zero of `d/dt [t^{1-n/2} J_{n/2}(t)]`.
    pub p: f64,
    pub mu2: f64,
    pub lambda_d: f64,
    pub m0: f64,
}

impl BallThresholds {
    /// `m0 μ2 |Ω| / P²`, equal to `(n-1)/n`.
    pub fn normalized_product(&self) -> f64 {
        self.m0 * self.mu2 * self.volume / (self.perimeter * self.perimeter)
    }
}

pub fn ball_thresholds(n: usize, radius: f64) -> Result<BallThresholds> {
    check_dim(n)?;
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::Precondition(format!("radius must be positive, got {radius}")));
    }
    let nf = n as f64;
    let omega = unit_ball_volume(n);
    let volume = omega * radius.powi(n as i32);
    let perimeter = nf * omega * radius.powi(n as i32 - 1);
    let p = first_deriv_zero(n)?;
    let j = first_zero(nf / 2.0 - 1.0)?;
    let mu2 = (p / radius).powi(2);
    let lambda_d = (j / radius).powi(2);
    let m0 = (nf - 1.0) / nf * perimeter * perimeter / (volume * mu2);
    Ok(BallThresholds { n, radius, volume, perimeter, p, mu2, lambda_d, m0 })
}

/// `r^{1-n/2} J_{n/2-1}(√λ r)`.
pub fn radial_profile(n: usize, lambda: f64, r: f64) -> Result<f64> {
    check_dim(n)?;
    let s = n as f64 / 2.0;
    Ok(r.powf(1.0 - s) * bessel_j(s - 1.0, lambda.sqrt() * r)?)
}

/// First radial derivative of [`radial_profile`]:
/// `-√λ r^{1-n/2} J_{n/2}(√λ r)`.
pub fn radial_derivative(n: usize, lambda: f64, r: f64) -> Result<f64> {
    check_dim(n)?;
    let s = n as f64 / 2.0;
    let k = lambda.sqrt();
    Ok(-k * r.powf(1.0 - s) * bessel_j(s, k * r)?)
}

/// Second radial derivative of [`radial_profile`] at `r`:
/// `-√λ r^{-n/2} [√λ r J_{n/2-1}(√λ r) - (n-1) J_{n/2}(√λ r)]`.
pub fn second_normal_derivative(n: usize, lambda: f64, r: f64) -> Result<f64> {
    check_dim(n)?;
    let k = lambda.sqrt();
    Ok(-k * r.powf(-(n as f64) / 2.0) * radial_neumann_function(n, k * r)?)
}

/// `(mλ - 2π) ∫_∂Ω u dσ + m ∫_∂Ω ∂²u/∂ν² dσ` for the radial profile on the
/// disk of radius `radius`.
pub fn identity_2bel_check(radius: f64, m: f64, lambda: f64) -> Result<f64> {
    let len = 2.0 * PI * radius;
    let u = radial_profile(2, lambda, radius)?;
    let urr = second_normal_derivative(2, lambda, radius)?;
    Ok((m * lambda - 2.0 * PI) * len * u + m * len * urr)
}

/// Optimal decay rate on the ball for `m >= m0`, where the minimizer is
/// radial: the root in `(0, μ2]` of `√λ J_{n/2}(√λ R) = (P/m) J_{n/2-1}(√λ R)`.
pub fn lambda_m_disk(n: usize, radius: f64, m: f64) -> Result<f64> {
    let ball = ball_thresholds(n, radius)?;
    if !(m >= ball.m0) || !m.is_finite() {
        return Err(Error::OutOfRange(format!(
            "m = {m} is below the radial threshold m0 = {}",
            ball.m0
        )));
    }
    let s = n as f64 / 2.0;
    let c = ball.perimeter * radius / m;
    let f = |lam: f64| -> Result<f64> {
        let x = lam.sqrt() * radius;
        Ok(x * bessel_j(s, x)? - c * bessel_j(s - 1.0, x)?)
    };
    let hi = ball.mu2;
    if f(hi)? <= 0.0 {
        return Ok(hi);
    }
    let mut lo = 1e-12 * hi;
    while f(lo)? >= 0.0 {
        lo *= 1e-3;
        if lo < 1e-280 {
            return Err(Error::Bracket(format!("no sign change below μ2 for m = {m}")));
        }
    }
    bisect(f, lo, hi)
}

/// Radial solution of `-Δu = 1` on the annulus `r_in < r < r_out` with
/// outward flux `-|Ω|/P` on both circles and zero mean:
/// `u = -r²/4 + a ln r + b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnulusU0 {
    pub r_in: f64,
    pub r_out: f64,
    pub a: f64,
    pub b: f64,
}

impl AnnulusU0 {
    pub fn new(r_in: f64, r_out: f64) -> Result<Self> {
        if !(r_in > 0.0 && r_out > r_in && r_out.is_finite()) {
            return Err(Error::Precondition(format!(
                "annulus radii must satisfy 0 < r_in < r_out, got {r_in}, {r_out}"
            )));
        }
        let a = r_in * r_out / 2.0;
        let prim = |r: f64| r * r / 2.0 * r.ln() - r * r / 4.0;
        let quartic = (r_out.powi(4) - r_in.powi(4)) / 16.0;
        let b = (quartic - a * (prim(r_out) - prim(r_in))) / ((r_out * r_out - r_in * r_in) / 2.0);
        Ok(Self { r_in, r_out, a, b })
    }

    pub fn area(&self) -> f64 {
        PI * (self.r_out * self.r_out - self.r_in * self.r_in)
    }

    pub fn perimeter(&self) -> f64 {
        2.0 * PI * (self.r_out + self.r_in)
    }

    pub fn value(&self, r: f64) -> Result<f64> {
        if !(r >= self.r_in && r <= self.r_out) {
            return Err(Error::OutOfRange(format!(
                "radius {r} outside [{}, {}]",
                self.r_in, self.r_out
            )));
        }
        Ok(self.eval(r))
    }

    fn eval(&self, r: f64) -> f64 {
        -r * r / 4.0 + self.a * r.ln() + self.b
    }

    /// Outward normal derivative on the inner and outer circle.
    pub fn fluxes(&self) -> [f64; 2] {
        let du = |r: f64| -r / 2.0 + self.a / r;
        [-du(self.r_in), du(self.r_out)]
    }

    /// `|∫ f dx + ∫ g dσ|` for `f = 1` and the fluxes above.
    pub fn compatibility_residual(&self) -> f64 {
        let [gi, go] = self.fluxes();
        (self.area() + 2.0 * PI * (self.r_in * gi + self.r_out * go)).abs()
    }

    pub fn boundary_mean(&self) -> f64 {
        let (ri, ro) = (self.r_in, self.r_out);
        (ri * self.eval(ri) + ro * self.eval(ro)) / (ri + ro)
    }

    pub fn delta_omega(&self) -> f64 {
        self.boundary_mean() - self.eval(self.r_in).min(self.eval(self.r_out))
    }

    pub fn m1(&self) -> f64 {
        self.delta_omega() * self.perimeter().powi(2) / self.area()
    }
}

/// Value of the zero-mean annulus torsion profile at radius `r`.
pub fn annulus_u0(r_in: f64, r_out: f64, r: f64) -> Result<f64> {
    AnnulusU0::new(r_in, r_out)?.value(r)
}
