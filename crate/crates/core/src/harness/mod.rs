//! Replicated simulation experiments and their summaries.
//!
//! One replication simulates a sample, builds the patched covariance,
//! completes it and scores the result against the true `R^K`. Each stage
//! draws from its own substream of the master seed, so results do not
//! depend on thread scheduling.

pub mod tables;

use std::time::Instant;

use log::warn;
use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::complete::{estimate_covariance, rank_sweep, solver_mask, RankPolicy, SolveConfig};
use crate::error::{Error, Result};
use crate::grid::{cell_midpoints, Grid};
use crate::kernels::{evaluate_on_grid, evaluate_on_points, Kernel, KernelSpec};
use crate::matrix::{relative_error, SymMatrix};
use crate::patch::{default_delta_prime, patched_binned, patched_regular, PatchedCovariance};
use crate::rng::{substream, Stage};
use crate::simulate::{
    add_noise_with, fragment_irregular_with, fragment_with, theta_resolution, type2_resolution, FragmentLaw,
    FragmentSample, GaussianSampler, GridType, IrregularStreams, StartLaw,
};

pub use tables::{run_table, TableId, TableOverrides, TableResult};

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "FRAGCOV_THREADS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    /// Kernel id such as `scenarioA:2` or `matern:1.5,0.5,1`.
    pub kernel: String,
    pub n: usize,
    /// Working resolution; defaults to `base_resolution`, or for type-2
    /// designs to `round(0.8 mean Q)` (or the `theta` rule when set).
    pub k: Option<usize>,
    /// Grid size of the common and type-1 designs, `K`-double-dot for type 2.
    pub base_resolution: usize,
    pub theta: Option<f64>,
    pub delta1: f64,
    pub delta2: f64,
    pub grid_type: GridType,
    /// Common grids are perturbed regular grids; midpoints when false.
    pub perturbed: bool,
    /// Fragment placement on common grids. Irregular designs ignore it.
    pub start_law: StartLaw,
    pub noise_sd: f64,
    /// Effective bandwidth; `delta - 0.1` for fixed lengths, `delta1` otherwise.
    pub delta_prime: Option<f64>,
    pub rank_policy: RankPolicy,
    pub replications: usize,
    pub seed: u64,
    pub solver: SolveConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            kernel: "scenarioA:1".into(),
            n: 200,
            k: None,
            base_resolution: 50,
            theta: None,
            delta1: 0.5,
            delta2: 0.5,
            grid_type: GridType::Common,
            perturbed: true,
            start_law: StartLaw::Centred,
            noise_sd: 0.0,
            delta_prime: None,
            rank_policy: RankPolicy::Fixed(1),
            replications: 100,
            seed: 1,
            solver: SolveConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<KernelSpec> {
        let spec: KernelSpec = self.kernel.parse()?;
        if self.replications == 0 {
            return Err(Error::invalid("replications must be at least 1"));
        }
        if self.n == 0 {
            return Err(Error::invalid("n must be positive"));
        }
        FragmentLaw::new(self.delta1, self.delta2)?;
        if self.noise_sd < 0.0 {
            return Err(Error::invalid("noise sd must be nonnegative"));
        }
        Ok(spec)
    }

    pub fn law(&self) -> Result<FragmentLaw> {
        Ok(FragmentLaw::new(self.delta1, self.delta2)?.with_start(self.start_law))
    }

    pub fn effective_delta(&self) -> f64 {
        self.delta_prime.unwrap_or_else(|| default_delta_prime(self.delta1, self.delta2))
    }

    /// Column label of the rank policy.
    pub fn rank_label(&self) -> String {
        match self.rank_policy {
            RankPolicy::Fixed(q) => q.to_string(),
            RankPolicy::Elbow(e) => format!("elbow({e})"),
            RankPolicy::Penalty(t) => format!("penalty({t})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

fn midpoint_median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n.is_multiple_of(2) {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    } else {
        sorted[n / 2]
    }
}

/// Median as the midpoint of the middle pair; quartiles as medians of the
/// lower and upper halves, which leave out the middle element for odd counts.
pub fn quartiles(values: &[f64]) -> Option<Quartiles> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 1 {
        return Some(Quartiles { q1: v[0], median: v[0], q3: v[0] });
    }
    Some(Quartiles { q1: midpoint_median(&v[..n / 2]), median: midpoint_median(&v), q3: midpoint_median(&v[n.div_ceil(2)..]) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub replication: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replication {
    pub relative_error: f64,
    pub k: usize,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    /// One entry per replication; `None` where it failed.
    pub replications: Vec<Option<Replication>>,
    pub failures: Vec<Failure>,
    pub summary: Option<Quartiles>,
    pub wall_time_secs: f64,
}

impl ExperimentResult {
    pub fn errors(&self) -> Vec<f64> {
        self.replications.iter().flatten().map(|r| r.relative_error).collect()
    }

    /// Working resolution, or its range when it varied.
    pub fn k_label(&self) -> String {
        let ks: Vec<usize> = self.replications.iter().flatten().map(|r| r.k).collect();
        match (ks.iter().min(), ks.iter().max()) {
            (Some(a), Some(b)) if a == b => a.to_string(),
            (Some(a), Some(b)) => format!("{a}-{b}"),
            _ => "NA".into(),
        }
    }
}

/// Worker pool honouring `FRAGCOV_THREADS`.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v.trim().parse().map_err(|_| Error::invalid(format!("{THREADS_ENV} must be a positive integer")))?;
        if n == 0 {
            return Err(Error::invalid(format!("{THREADS_ENV} must be a positive integer")));
        }
        b = b.num_threads(n);
    }
    b.build().map_err(|e| Error::invalid(e.to_string()))
}

/// Simulated sample, its patched covariance and the truth it should recover.
pub struct Instance {
    pub truth: SymMatrix<f64>,
    pub patched: PatchedCovariance<f64>,
}

/// Builds replication `rep` of a cell up to the patched covariance.
/// Fragmented (and possibly noisy) sample of replication `rep`.
pub fn simulate_sample(cfg: &ExperimentConfig, kernel: &dyn Kernel, rep: u64) -> Result<FragmentSample> {
    let law = cfg.law()?;
    let seed = cfg.seed;
    let sample = match cfg.grid_type {
        GridType::Common => {
            let k = cfg.k.unwrap_or(cfg.base_resolution);
            let grid = if cfg.perturbed { Grid::perturbed(k, &mut substream(seed, rep, Stage::Grid)) } else { Grid::regular(k) };
            let truth: SymMatrix<f64> = evaluate_on_grid(kernel, &grid);
            let values = GaussianSampler::new(&truth)?.sample(cfg.n, &mut substream(seed, rep, Stage::Paths));
            fragment_with(&values, &grid, &law, &mut substream(seed, rep, Stage::Intervals))?
        }
        irregular => {
            let streams = IrregularStreams::for_replication(seed, rep);
            fragment_irregular_with(kernel, cfg.n, &law, irregular, cfg.base_resolution, streams)?
        }
    };
    add_noise_with(&sample, cfg.noise_sd, &mut substream(seed, rep, Stage::Noise))
}

pub fn simulate_instance(cfg: &ExperimentConfig, kernel: &dyn Kernel, rep: u64) -> Result<Instance> {
    let sample = simulate_sample(cfg, kernel, rep)?;
    let (truth, mut patched) = match cfg.grid_type {
        GridType::Common => {
            let grid = sample.grid.as_ref().expect("common samples keep their grid");
            (evaluate_on_grid(kernel, grid), patched_regular(&sample)?)
        }
        GridType::Type1 => {
            let grid = sample.grid.as_ref().expect("type-1 samples keep their grid");
            let k = cfg.k.unwrap_or(grid.resolution());
            (evaluate_on_grid(kernel, grid), patched_binned(&sample, k)?)
        }
        GridType::Type2 => {
            let k = match (cfg.k, cfg.theta) {
                (Some(k), _) => k,
                (None, Some(t)) => theta_resolution(&sample, t),
                (None, None) => type2_resolution(&sample),
            };
            (evaluate_on_points(kernel, &cell_midpoints(k)), patched_binned(&sample, k)?)
        }
    };
    debug_assert_eq!(patched.noise_flag, sample.noise_sd > 0.0);
    patched.delta_effective = Some(cfg.effective_delta());
    Ok(Instance { truth, patched })
}

fn solver_for(cfg: &ExperimentConfig, rep: u64) -> SolveConfig {
    SolveConfig {
        rank_policy: cfg.rank_policy,
        seed: substream(cfg.seed, rep, Stage::Solver).next_u64(),
        ..cfg.solver.clone()
    }
}

/// One full replication: simulate, patch, complete, score.
pub fn run_replication(cfg: &ExperimentConfig, kernel: &dyn Kernel, rep: u64) -> Result<Replication> {
    let inst = simulate_instance(cfg, kernel, rep)?;
    let est = estimate_covariance(&inst.patched, &solver_for(cfg, rep))?;
    Ok(Replication { relative_error: relative_error(&est.matrix, &inst.truth)?, k: inst.truth.k(), rank: est.rank.rank })
}

/// Runs every replication of a cell in parallel and summarizes the errors.
pub fn run_cell(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    run_cell_in(cfg, &thread_pool()?)
}

pub fn run_cell_in(cfg: &ExperimentConfig, pool: &rayon::ThreadPool) -> Result<ExperimentResult> {
    let spec = cfg.validate()?;
    let kernel = spec.build()?;
    let start = Instant::now();
    let outcomes: Vec<Result<Replication>> = pool.install(|| {
        (0..cfg.replications as u64).into_par_iter().map(|rep| run_replication(cfg, kernel.as_ref(), rep)).collect()
    });
    let mut replications = Vec::with_capacity(outcomes.len());
    let mut failures = Vec::new();
    for (rep, out) in outcomes.into_iter().enumerate() {
        match out {
            Ok(r) => replications.push(Some(r)),
            Err(e) => {
                warn!("{} replication {rep} failed: {e}", cfg.kernel);
                failures.push(Failure { replication: rep, message: e.to_string() });
                replications.push(None);
            }
        }
    }
    let errors: Vec<f64> = replications.iter().flatten().map(|r| r.relative_error).collect();
    Ok(ExperimentResult {
        config: cfg.clone(),
        summary: quartiles(&errors),
        replications,
        failures,
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

/// Relative error against an empirical reference rather than the truth.
pub fn empirical_relative_error(estimate: &SymMatrix<f64>, reference: &SymMatrix<f64>) -> Result<f64> {
    relative_error(estimate, reference)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScreeRow {
    pub rank: usize,
    pub fit: f64,
    pub normalized_fit: f64,
}

/// Fits of the rank sweep, one row per candidate rank.
pub fn scree_report(target: &PatchedCovariance<f64>, config: &SolveConfig) -> Result<Vec<ScreeRow>> {
    let mask = solver_mask(target, config)?;
    let sweep = rank_sweep(target, &mask, config)?;
    Ok(sweep
        .fits
        .iter()
        .zip(&sweep.normalized_fits)
        .enumerate()
        .map(|(i, (&fit, &normalized_fit))| ScreeRow { rank: i + 1, fit, normalized_fit })
        .collect())
}
