use std::f64::consts::PI;
use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{FeatureMap, Kernel};
use crate::error::{Error, Result};

/// Eigenvalues shared by both simulation scenarios.
pub const SCENARIO_EIGENVALUES: [f64; 3] = [1.50, 0.55, 0.20];

/// `(mean, sd)` of the Gaussian-density eigenfunctions of scenario B.
pub const SCENARIO_B_SHAPES: [(f64, f64); 3] = [(0.5, 0.60), (0.2, 0.25), (0.8, 0.20)];

/// Closed-form basis functions used by the finite-rank kernels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Eigenfunction {
    Constant(f64),
    /// `sin(2 pi k t)`.
    Sine { k: u32 },
    /// Unnormalised Gaussian density `N(t; mean, sd^2)`.
    GaussianPdf { mean: f64, sd: f64 },
    /// Bump `exp(-1 / (1 - (J u)^2))` on `|u| < 1/J`, with `u = t - center`.
    Bump { center: f64, j: f64 },
}

impl Eigenfunction {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            Eigenfunction::Constant(c) => c,
            Eigenfunction::Sine { k } => (2.0 * PI * k as f64 * t).sin(),
            Eigenfunction::GaussianPdf { mean, sd } => {
                let z = (t - mean) / sd;
                (-0.5 * z * z).exp() / (sd * (2.0 * PI).sqrt())
            }
            Eigenfunction::Bump { center, j } => super::counterexample::bump_with(t - center, j),
        }
    }
}

/// `r(s, t) = sum_j lambda_j phi_j(s) phi_j(t)` with finitely many terms.
#[derive(Debug, Clone, PartialEq)]
pub struct MercerKernel {
    eigenvalues: Vec<f64>,
    eigenfunctions: Vec<Eigenfunction>,
}

impl MercerKernel {
    /// Eigenvalues must be positive and nonincreasing.
    pub fn new(eigenvalues: Vec<f64>, eigenfunctions: Vec<Eigenfunction>) -> Result<Self> {
        if eigenvalues.is_empty() || eigenvalues.len() != eigenfunctions.len() {
            return Err(Error::invalid("need one eigenvalue per eigenfunction"));
        }
        if eigenvalues.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::invalid("eigenvalues must be positive"));
        }
        if eigenvalues.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::invalid("eigenvalues must be nonincreasing"));
        }
        Ok(MercerKernel { eigenvalues, eigenfunctions })
    }

    pub fn rank(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenfunctions(&self) -> &[Eigenfunction] {
        &self.eigenfunctions
    }
}

impl Kernel for MercerKernel {
    fn eval(&self, s: f64, t: f64) -> f64 {
        self.eigenvalues
            .iter()
            .zip(&self.eigenfunctions)
            .map(|(&l, f)| l * f.eval(s) * f.eval(t))
            .sum()
    }

    fn feature_map(&self) -> Option<FeatureMap> {
        let q = self.rank();
        let loading = DMatrix::from_fn(q, q, |a, b| if a == b { self.eigenvalues[a].sqrt() } else { 0.0 });
        Some(FeatureMap { functions: self.eigenfunctions.clone(), loading })
    }
}

/// Simulation scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scenario {
    /// Constant and sine eigenfunctions.
    A,
    /// Gaussian-density eigenfunctions.
    B,
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::A => "A",
            Scenario::B => "B",
        })
    }
}

/// Scenario kernel truncated at rank `q` in `{1, 2, 3}`.
pub fn scenario_kernel(scenario: Scenario, q: usize) -> Result<MercerKernel> {
    if !(1..=3).contains(&q) {
        return Err(Error::invalid(format!("scenario rank must be 1, 2 or 3, got {q}")));
    }
    let functions: Vec<Eigenfunction> = match scenario {
        Scenario::A => vec![
            Eigenfunction::Constant(1.0),
            Eigenfunction::Sine { k: 1 },
            Eigenfunction::Sine { k: 2 },
        ],
        Scenario::B => SCENARIO_B_SHAPES
            .iter()
            .map(|&(mean, sd)| Eigenfunction::GaussianPdf { mean, sd })
            .collect(),
    };
    MercerKernel::new(SCENARIO_EIGENVALUES[..q].to_vec(), functions[..q].to_vec())
}
