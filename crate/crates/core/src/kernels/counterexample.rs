//! Kernels that coincide on a band yet differ off it.

use nalgebra::DMatrix;

use super::mercer::Eigenfunction;
use super::{FeatureMap, Kernel};
use crate::error::{Error, Result};

const BUMP_J: f64 = 6.0;

/// `1(|u| < 1/6) exp(-1 / (1 - (6u)^2))`.
pub fn bump(u: f64) -> f64 {
    bump_with(u, BUMP_J)
}

pub(crate) fn bump_with(u: f64, j: f64) -> f64 {
    let z = j * u;
    if z.abs() < 1.0 {
        (-1.0 / (1.0 - z * z)).exp()
    } else {
        0.0
    }
}

/// `r(s, t) = sum_ab C_ab phi_a(s) phi_b(t)` with `C = L L^T` kept exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorKernel {
    functions: Vec<Eigenfunction>,
    coef: DMatrix<f64>,
    loading: DMatrix<f64>,
}

impl Kernel for FactorKernel {
    fn eval(&self, s: f64, t: f64) -> f64 {
        let fs: Vec<f64> = self.functions.iter().map(|f| f.eval(s)).collect();
        let ft: Vec<f64> = self.functions.iter().map(|f| f.eval(t)).collect();
        let mut acc = 0.0;
        for (a, &x) in fs.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            for (b, &y) in ft.iter().enumerate() {
                acc += self.coef[(a, b)] * x * y;
            }
        }
        acc
    }

    fn feature_map(&self) -> Option<FeatureMap> {
        Some(FeatureMap { functions: self.functions.clone(), loading: self.loading.clone() })
    }
}

/// Rank-three pair built from three bumps with disjoint supports of length 1/3.
///
/// The first kernel is `sum_i phi_i(s) phi_i(t)`; the second adds
/// `sqrt(lambda) (phi_1(t) phi_3(s) + phi_1(s) phi_3(t))`, which vanishes on
/// `|s - t| <= 1/3`.
pub fn counterexample_bump_pair(lambda: f64) -> Result<(FactorKernel, FactorKernel)> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::invalid(format!("lambda must lie in (0, 1), got {lambda}")));
    }
    let functions: Vec<Eigenfunction> = [1.0 / 6.0, 0.5, 5.0 / 6.0]
        .iter()
        .map(|&center| Eigenfunction::Bump { center, j: BUMP_J })
        .collect();
    let eye = DMatrix::<f64>::identity(3, 3);
    let first = FactorKernel { functions: functions.clone(), coef: eye.clone(), loading: eye };

    let sl = lambda.sqrt();
    let mut coef = DMatrix::<f64>::identity(3, 3);
    coef[(0, 2)] = sl;
    coef[(2, 0)] = sl;
    // Third coordinate of the second process is sqrt(lambda) xi_1 + sqrt(1 - lambda) xi_3.
    let mut loading = DMatrix::<f64>::identity(3, 3);
    loading[(2, 0)] = sl;
    loading[(2, 2)] = (1.0 - lambda).sqrt();
    let second = FactorKernel { functions, coef, loading };
    Ok((first, second))
}

/// Which of the two stationary profiles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EsseenProfile {
    /// `exp(-|u|)`, the Ornstein-Uhlenbeck covariance.
    Exponential,
    /// Equal to the exponential on `|u| < 1`, then its tangent line until it hits zero at `|u| = 2`.
    Truncated,
}

impl EsseenProfile {
    pub fn at_lag(&self, u: f64) -> f64 {
        let a = u.abs();
        match self {
            EsseenProfile::Exponential => (-a).exp(),
            EsseenProfile::Truncated => {
                let v1 = (-1f64).exp();
                let d1 = -v1;
                let end = 1.0 - v1 / d1;
                if a < 1.0 {
                    (-a).exp()
                } else if a < end {
                    v1 + d1 * (a - 1.0)
                } else {
                    0.0
                }
            }
        }
    }
}

/// Stationary kernel `psi(s - t)` on an interval `(lo, hi)`; inputs in `[0, 1]`
/// are mapped affinely onto it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationaryKernel {
    pub profile: EsseenProfile,
    pub lo: f64,
    pub hi: f64,
}

impl StationaryKernel {
    pub fn on_interval(profile: EsseenProfile, lo: f64, hi: f64) -> Self {
        assert!(hi > lo, "empty interval");
        StationaryKernel { profile, lo, hi }
    }

    /// Lag in the native coordinates for unit-interval inputs.
    pub fn lag(&self, s: f64, t: f64) -> f64 {
        (self.hi - self.lo) * (s - t)
    }
}

impl Kernel for StationaryKernel {
    fn eval(&self, s: f64, t: f64) -> f64 {
        self.profile.at_lag(self.lag(s, t))
    }
}

/// Exponential and truncated profiles on `(-pi, pi)`.
pub fn esseen_pair() -> (StationaryKernel, StationaryKernel) {
    use std::f64::consts::PI;
    (
        StationaryKernel::on_interval(EsseenProfile::Exponential, -PI, PI),
        StationaryKernel::on_interval(EsseenProfile::Truncated, -PI, PI),
    )
}
