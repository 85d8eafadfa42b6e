use statrs::function::gamma::gamma;

use super::bessel::bessel_k;
use super::Kernel;
use crate::error::{Error, Result};

/// Stationary Matérn covariance with smoothness `nu`, range `rho` and variance `sigma2`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaternKernel {
    nu: f64,
    rho: f64,
    sigma2: f64,
}

impl Default for MaternKernel {
    /// `nu = 3/2`, `rho = 0.5`, `sigma2 = 1`.
    fn default() -> Self {
        MaternKernel { nu: 1.5, rho: 0.5, sigma2: 1.0 }
    }
}

pub fn matern_kernel(nu: f64, rho: f64, sigma2: f64) -> Result<MaternKernel> {
    if !(nu > 0.0 && rho > 0.0 && sigma2 > 0.0) || !(nu.is_finite() && rho.is_finite() && sigma2.is_finite()) {
        return Err(Error::invalid(format!(
            "matern parameters must be positive: nu={nu} rho={rho} sigma2={sigma2}"
        )));
    }
    Ok(MaternKernel { nu, rho, sigma2 })
}

impl MaternKernel {
    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    fn scaled_distance(&self, d: f64) -> f64 {
        (2.0 * self.nu).sqrt() * d.abs() / self.rho
    }

    /// Covariance at distance `d`. Half-integer orders use their closed forms.
    pub fn at_distance(&self, d: f64) -> f64 {
        if d == 0.0 {
            return self.sigma2;
        }
        match half_integer_order(self.nu) {
            Some(p) => self.sigma2 * half_integer_profile(p, self.scaled_distance(d)),
            None => self.at_distance_bessel(d),
        }
    }

    /// Covariance at distance `d` through the general Bessel evaluation.
    pub fn at_distance_bessel(&self, d: f64) -> f64 {
        if d == 0.0 {
            return self.sigma2;
        }
        let x = self.scaled_distance(d);
        self.sigma2 * 2f64.powf(1.0 - self.nu) / gamma(self.nu) * x.powf(self.nu) * bessel_k(self.nu, x)
    }
}

impl Kernel for MaternKernel {
    fn eval(&self, s: f64, t: f64) -> f64 {
        self.at_distance(s - t)
    }
}

/// `p` when `nu = p + 1/2` for a small integer `p`.
fn half_integer_order(nu: f64) -> Option<u32> {
    let p = nu - 0.5;
    ((0.0..=20.0).contains(&p) && p.fract() == 0.0).then_some(p as u32)
}

/// Correlation `exp(-x) p!/(2p)! sum_i (p+i)!/(i!(p-i)!) (2x)^(p-i)`.
fn half_integer_profile(p: u32, x: f64) -> f64 {
    let mut sum = 0.0;
    for i in 0..=p {
        let mut c = 1.0;
        for m in (p - i + 1)..=(p + i) {
            c *= m as f64;
        }
        for m in 1..=i {
            c /= m as f64;
        }
        sum += c * (2.0 * x).powi((p - i) as i32);
    }
    let mut ratio = 1.0; // p! / (2p)!
    for m in (p + 1)..=(2 * p) {
        ratio /= m as f64;
    }
    (-x).exp() * ratio * sum
}
