//! Ground-truth covariance kernels.
//!
//! Finite-rank kernels expose a [`FeatureMap`] so paths can be drawn exactly
//! as `X(t) = sum_j phi_j(t) (L xi)_j` at arbitrary times. Infinite-rank
//! kernels (Matérn) are sampled through their evaluated covariance matrix.

mod bessel;
mod counterexample;
mod matern;
mod mercer;

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

pub use bessel::{bessel_k, bessel_k_half_integer, bessel_k_scaled};
pub use counterexample::{bump, counterexample_bump_pair, esseen_pair, EsseenProfile, FactorKernel, StationaryKernel};
pub use matern::{matern_kernel, MaternKernel};
pub use mercer::{scenario_kernel, Eigenfunction, MercerKernel, Scenario, SCENARIO_B_SHAPES, SCENARIO_EIGENVALUES};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::matrix::SymMatrix;
use crate::scalar::Real;

/// A covariance function evaluable pointwise.
pub trait Kernel: Send + Sync {
    fn eval(&self, s: f64, t: f64) -> f64;

    /// Finite factorisation when the kernel has one.
    fn feature_map(&self) -> Option<FeatureMap> {
        None
    }
}

/// `r(s, t) = phi(s)^T L L^T phi(t)` for finitely many functions `phi`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub functions: Vec<Eigenfunction>,
    /// `m x m'` loading; a path is `phi(t)^T L xi` with `xi ~ N(0, I)`.
    pub loading: DMatrix<f64>,
}

impl FeatureMap {
    pub fn eval_features(&self, t: f64) -> Vec<f64> {
        self.functions.iter().map(|f| f.eval(t)).collect()
    }

    /// Number of independent standard normals per path.
    pub fn latent_dim(&self) -> usize {
        self.loading.ncols()
    }

    /// Concatenation, representing the sum of two independent processes.
    pub fn concat(&self, other: &FeatureMap) -> FeatureMap {
        let (m1, p1) = self.loading.shape();
        let (m2, p2) = other.loading.shape();
        let mut loading = DMatrix::zeros(m1 + m2, p1 + p2);
        loading.view_mut((0, 0), (m1, p1)).copy_from(&self.loading);
        loading.view_mut((m1, p1), (m2, p2)).copy_from(&other.loading);
        let mut functions = self.functions.clone();
        functions.extend(other.functions.iter().cloned());
        FeatureMap { functions, loading }
    }
}

impl<K: Kernel + ?Sized> Kernel for &K {
    fn eval(&self, s: f64, t: f64) -> f64 {
        (**self).eval(s, t)
    }

    fn feature_map(&self) -> Option<FeatureMap> {
        (**self).feature_map()
    }
}

impl<K: Kernel + ?Sized> Kernel for Box<K> {
    fn eval(&self, s: f64, t: f64) -> f64 {
        (**self).eval(s, t)
    }

    fn feature_map(&self) -> Option<FeatureMap> {
        (**self).feature_map()
    }
}

/// Pointwise sum of two kernels.
#[derive(Debug, Clone, PartialEq)]
pub struct SumKernel<A, B> {
    pub a: A,
    pub b: B,
}

pub fn sum_kernel<A: Kernel, B: Kernel>(a: A, b: B) -> SumKernel<A, B> {
    SumKernel { a, b }
}

impl<A: Kernel, B: Kernel> Kernel for SumKernel<A, B> {
    fn eval(&self, s: f64, t: f64) -> f64 {
        self.a.eval(s, t) + self.b.eval(s, t)
    }

    fn feature_map(&self) -> Option<FeatureMap> {
        Some(self.a.feature_map()?.concat(&self.b.feature_map()?))
    }
}

/// The zero kernel.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ZeroKernel;

impl Kernel for ZeroKernel {
    fn eval(&self, _s: f64, _t: f64) -> f64 {
        0.0
    }
}

/// `R(j, l) = r(t_j, t_l)` on the grid.
pub fn evaluate_on_grid<T: Real, K: Kernel + ?Sized>(kernel: &K, grid: &Grid) -> SymMatrix<T> {
    evaluate_on_points(kernel, grid.points())
}

pub fn evaluate_on_points<T: Real, K: Kernel + ?Sized>(kernel: &K, points: &[f64]) -> SymMatrix<T> {
    SymMatrix::from_fn(points.len(), |j, l| T::of(kernel.eval(points[j], points[l])))
}

/// Kernel selected by a configuration string id.
///
/// Accepted ids: `scenarioA:q`, `scenarioB:q`, `matern:nu,rho,sigma2`,
/// `matern+A2` or `matern:nu,rho,sigma2+A2`, `bump3:lambda` (the kernel
/// with the off-band cross term), `bump3` (without it), and `esseen`/`esseen2`.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelSpec {
    Scenario { scenario: Scenario, rank: usize },
    Matern(MaternKernel),
    MaternPlusA2(MaternKernel),
    Bump { lambda: Option<f64> },
    Esseen { modified: bool },
}

impl KernelSpec {
    pub fn build(&self) -> Result<Box<dyn Kernel>> {
        Ok(match self {
            KernelSpec::Scenario { scenario, rank } => Box::new(scenario_kernel(*scenario, *rank)?),
            KernelSpec::Matern(m) => Box::new(m.clone()),
            KernelSpec::MaternPlusA2(m) => {
                Box::new(sum_kernel(m.clone(), scenario_kernel(Scenario::A, 2)?))
            }
            KernelSpec::Bump { lambda } => {
                let (k1, k2) = counterexample_bump_pair(lambda.unwrap_or(0.5))?;
                if lambda.is_some() {
                    Box::new(k2)
                } else {
                    Box::new(k1)
                }
            }
            KernelSpec::Esseen { modified } => {
                let (p1, p2) = esseen_pair();
                Box::new(if *modified { p2 } else { p1 })
            }
        })
    }

    /// Rank of the kernel when finite.
    pub fn rank(&self) -> Option<usize> {
        match self {
            KernelSpec::Scenario { rank, .. } => Some(*rank),
            KernelSpec::Bump { .. } => Some(3),
            _ => None,
        }
    }
}

impl FromStr for KernelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::invalid(format!("unknown kernel id '{s}'"));
        let parse_f = |x: &str| x.trim().parse::<f64>().map_err(|_| bad());
        if let Some(q) = s.strip_prefix("scenarioA:") {
            let rank = q.trim().parse().map_err(|_| bad())?;
            return Ok(KernelSpec::Scenario { scenario: Scenario::A, rank });
        }
        if let Some(q) = s.strip_prefix("scenarioB:") {
            let rank = q.trim().parse().map_err(|_| bad())?;
            return Ok(KernelSpec::Scenario { scenario: Scenario::B, rank });
        }
        if s == "matern+A2" {
            return Ok(KernelSpec::MaternPlusA2(MaternKernel::default()));
        }
        if let Some(rest) = s.strip_prefix("matern:") {
            let (params, plus) = match rest.strip_suffix("+A2") {
                Some(p) => (p, true),
                None => (rest, false),
            };
            let v: Vec<f64> = params.split(',').map(parse_f).collect::<Result<_>>()?;
            if v.len() != 3 {
                return Err(bad());
            }
            let m = matern_kernel(v[0], v[1], v[2])?;
            return Ok(if plus { KernelSpec::MaternPlusA2(m) } else { KernelSpec::Matern(m) });
        }
        if s == "matern" {
            return Ok(KernelSpec::Matern(MaternKernel::default()));
        }
        if s == "bump3" {
            return Ok(KernelSpec::Bump { lambda: None });
        }
        if let Some(l) = s.strip_prefix("bump3:") {
            let lambda = parse_f(l)?;
            if !(lambda > 0.0 && lambda < 1.0) {
                return Err(Error::invalid("bump3 lambda must lie in (0, 1)"));
            }
            return Ok(KernelSpec::Bump { lambda: Some(lambda) });
        }
        match s {
            "esseen" | "esseen1" => Ok(KernelSpec::Esseen { modified: false }),
            "esseen2" => Ok(KernelSpec::Esseen { modified: true }),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelSpec::Scenario { scenario, rank } => write!(f, "scenario{scenario}:{rank}"),
            KernelSpec::Matern(m) => write!(f, "matern:{},{},{}", m.nu(), m.rho(), m.sigma2()),
            KernelSpec::MaternPlusA2(m) => write!(f, "matern:{},{},{}+A2", m.nu(), m.rho(), m.sigma2()),
            KernelSpec::Bump { lambda: Some(l) } => write!(f, "bump3:{l}"),
            KernelSpec::Bump { lambda: None } => write!(f, "bump3"),
            KernelSpec::Esseen { modified: false } => write!(f, "esseen"),
            KernelSpec::Esseen { modified: true } => write!(f, "esseen2"),
        }
    }
}
