//! Completion of a banded covariance to a full PSD matrix.
//!
//! The estimate is `gamma gamma^T` for a `K x i` factor minimizing the
//! masked misfit to the patched covariance. Ranks are swept upward with warm
//! starts and chosen by a scree rule, a penalty, or fixed in advance.

pub mod lbfgs;
pub mod oracle;

use log::{debug, warn};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::cell_index;
use crate::mask::{band_mask, ceil_tol, BandMask};
use crate::matrix::{sym_eigen_desc, LowRankFactor, SymMatrix};
use crate::patch::{effective_mask, supported_mask, PatchedCovariance};
use crate::rng::{substream, Stage};
use crate::scalar::Real;

pub use lbfgs::{LbfgsOptions, Termination};
pub use oracle::{determinant, exact_band_completion, ExactField};

/// How the rank of the estimate is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RankPolicy {
    Fixed(usize),
    /// Smallest rank whose normalized fit drops below the threshold.
    Elbow(f64),
    /// Minimizer of `f(i) + tau i`.
    Penalty(f64),
}

impl Default for RankPolicy {
    fn default() -> Self {
        RankPolicy::Elbow(0.01)
    }
}

/// What to do with masked entries that no fragment observed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SupportPolicy {
    /// Fail with `MaskExceedsSupport`.
    Strict,
    /// Drop pairs with fewer than `min_count` contributors from the mask.
    Intersect { min_count: usize },
    /// Fit the zero entries as if observed.
    ZeroFill,
}

impl Default for SupportPolicy {
    fn default() -> Self {
        SupportPolicy::Intersect { min_count: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveConfig {
    /// Largest rank in the sweep; `ceil(K delta') - 3` when unset.
    pub max_rank_sweep: Option<usize>,
    /// Gradient-norm stopping threshold; `1e-9 / K^2` when unset.
    pub tolerance: Option<f64>,
    pub max_iter: usize,
    pub restarts: usize,
    /// Warn when the trace of the estimate exceeds that of the target by 10%.
    pub trace_bound: bool,
    pub rank_policy: RankPolicy,
    /// Effective bandwidth; falls back to the target's own.
    pub delta_prime: Option<f64>,
    pub support: SupportPolicy,
    /// Relative scale of restart and warm-start perturbations.
    pub jitter: f64,
    pub seed: u64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            max_rank_sweep: None,
            tolerance: None,
            max_iter: 2000,
            restarts: 1,
            trace_bound: false,
            rank_policy: RankPolicy::default(),
            delta_prime: None,
            support: SupportPolicy::default(),
            jitter: 1e-3,
            seed: 0,
        }
    }
}

impl SolveConfig {
    pub fn fixed_rank(q: usize) -> Self {
        SolveConfig { rank_policy: RankPolicy::Fixed(q), ..Self::default() }
    }

    fn grad_tol(&self, k: usize) -> f64 {
        self.tolerance.unwrap_or(1e-9 / (k * k) as f64)
    }

    fn validate(&self) -> Result<()> {
        if self.max_rank_sweep == Some(0) {
            return Err(Error::invalid("max_rank_sweep must be at least 1"));
        }
        if let Some(t) = self.tolerance {
            if !(t > 0.0) {
                return Err(Error::invalid("tolerance must be positive"));
            }
        }
        if self.restarts == 0 {
            return Err(Error::invalid("restarts must be at least 1"));
        }
        Ok(())
    }
}

fn check_dims<T: Real>(k: usize, target: &PatchedCovariance<T>, mask: &BandMask) -> Result<()> {
    if target.k() != k {
        return Err(Error::DimensionMismatch { expected: target.k(), got: k });
    }
    if mask.k() != k {
        return Err(Error::DimensionMismatch { expected: k, got: mask.k() });
    }
    Ok(())
}

/// Residual `mask o (gamma gamma^T - target)`, objective and gradient.
fn evaluate<T: Real>(gamma: &DMatrix<T>, target: &DMatrix<T>, mask: &[bool], grad: bool) -> (T, Option<DMatrix<T>>) {
    let k = gamma.nrows();
    let gram = gamma * gamma.transpose();
    let mut resid = DMatrix::zeros(k, k);
    let mut sum = T::zero();
    for l in 0..k {
        for j in 0..k {
            if mask[j * k + l] {
                let r = gram[(j, l)] - target[(j, l)];
                resid[(j, l)] = r;
                sum += r * r;
            }
        }
    }
    let k2 = T::of_usize(k * k);
    let g = grad.then(|| resid * gamma * (T::of(4.0) / k2));
    (sum / k2, g)
}

/// `K^-2 sum over the mask of (target - gamma gamma^T)^2`.
pub fn objective<T: Real>(gamma: &LowRankFactor<T>, target: &PatchedCovariance<T>, mask: &BandMask) -> Result<T> {
    check_dims(gamma.k(), target, mask)?;
    Ok(evaluate(gamma.gamma(), target.matrix.as_dmatrix(), mask.as_slice(), false).0)
}

/// `4 K^-2 (mask o (gamma gamma^T - target)) gamma`.
pub fn gradient<T: Real>(gamma: &LowRankFactor<T>, target: &PatchedCovariance<T>, mask: &BandMask) -> Result<DMatrix<T>> {
    check_dims(gamma.k(), target, mask)?;
    Ok(evaluate(gamma.gamma(), target.matrix.as_dmatrix(), mask.as_slice(), true).1.expect("gradient requested"))
}

/// Top-`i` eigenpairs scaled by root eigenvalues, negatives clipped to zero.
pub fn eigen_init<T: Real>(m: &SymMatrix<T>, i: usize) -> LowRankFactor<T> {
    let (vals, vecs) = sym_eigen_desc(m.as_dmatrix());
    let k = m.k();
    let mut gamma = DMatrix::zeros(k, i);
    for c in 0..i.min(k) {
        let s = vals[c].max(T::zero()).sqrt();
        gamma.set_column(c, &(vecs.column(c) * s));
    }
    LowRankFactor::new(gamma)
}

#[derive(Debug, Clone)]
pub struct FixedRankSolution<T: Real> {
    pub factor: LowRankFactor<T>,
    pub fit: T,
    pub iterations: usize,
    pub converged: bool,
}

/// Quasi-Newton descent from `start`.
pub fn descend<T: Real>(
    target: &PatchedCovariance<T>,
    mask: &BandMask,
    start: LowRankFactor<T>,
    config: &SolveConfig,
) -> Result<FixedRankSolution<T>> {
    let (k, i) = (start.k(), start.rank());
    check_dims(k, target, mask)?;
    let t = target.matrix.as_dmatrix();
    let m = mask.as_slice();
    let opts = LbfgsOptions { max_iter: config.max_iter, grad_tol: config.grad_tol(k), ..LbfgsOptions::default() };
    let x0 = DVector::from_column_slice(start.gamma().as_slice());
    let out = lbfgs::minimize(
        x0,
        |x| {
            let g = DMatrix::from_column_slice(k, i, x.as_slice());
            let (v, grad) = evaluate(&g, t, m, true);
            (v, DVector::from_column_slice(grad.expect("gradient requested").as_slice()))
        },
        &opts,
    )
    .map_err(|_| Error::Diverged { rank: i })?;
    if !out.value.is_finite() {
        return Err(Error::Diverged { rank: i });
    }
    debug!("rank {i}: fit {} after {} iterations ({:?})", out.value, out.iterations, out.termination);
    Ok(FixedRankSolution {
        factor: LowRankFactor::new(DMatrix::from_column_slice(k, i, out.x.as_slice())),
        fit: out.value,
        iterations: out.iterations,
        converged: out.termination != Termination::MaxIter,
    })
}

fn jittered<T: Real, R: Rng>(gamma: &DMatrix<T>, scale: f64, rng: &mut R) -> DMatrix<T> {
    gamma.map(|v| v + T::of(scale * rng.sample::<f64, _>(StandardNormal)))
}

fn jitter_scale<T: Real>(target: &PatchedCovariance<T>, config: &SolveConfig) -> f64 {
    let k = target.k();
    let diag = (0..k).map(|j| target.matrix.get(j, j).as_f64().abs()).sum::<f64>() / k.max(1) as f64;
    config.jitter * diag.sqrt().max(1e-3)
}

/// Best rank-`i` fit from the eigen start, `restarts - 1` jittered copies of
/// it and, for `i > 1`, the warm start a rank sweep would use.
pub fn solve_fixed_rank<T: Real>(
    target: &PatchedCovariance<T>,
    mask: &BandMask,
    i: usize,
    config: &SolveConfig,
) -> Result<FixedRankSolution<T>> {
    config.validate()?;
    let k = target.k();
    if i == 0 || i > k {
        return Err(Error::InvalidRank { rank: i, k });
    }
    check_dims(k, target, mask)?;
    let init = eigen_init(&target.matrix, i);
    let scale = jitter_scale(target, config);
    let mut best: Option<FixedRankSolution<T>> = None;
    for r in 0..config.restarts {
        let start = if r == 0 {
            init.clone()
        } else {
            let mut rng = substream(config.seed, r as u64, Stage::Solver);
            LowRankFactor::new(jittered(init.gamma(), scale, &mut rng))
        };
        let sol = descend(target, mask, start, config)?;
        if best.as_ref().is_none_or(|b| sol.fit < b.fit) {
            best = Some(sol);
        }
    }
    // Eigen starts can settle in a spurious minimum at higher ranks; the
    // sweep's warm-start chain usually does not, so try that too.
    if i > 1 {
        let below = rank_sweep(target, mask, &SolveConfig { max_rank_sweep: Some(i - 1), ..config.clone() })?;
        let prev = below.factors.last().expect("sweep of at least one rank");
        let mut rng = substream(config.seed, (i as u64) << 16, Stage::Solver);
        let start = prev.augmented(&residual_column(prev, target, mask, scale, &mut rng));
        let sol = descend(target, mask, start, config)?;
        if best.as_ref().is_none_or(|b| sol.fit < b.fit) {
            best = Some(sol);
        }
    }
    Ok(best.expect("at least one start"))
}

#[derive(Debug, Clone)]
pub struct RankSweepResult<T: Real> {
    /// `f(i)` for `i = 1..=max_rank_sweep`.
    pub fits: Vec<T>,
    pub factors: Vec<LowRankFactor<T>>,
    /// `f(i) K^2 / ||P o R||_F^2`.
    pub normalized_fits: Vec<T>,
}

impl<T: Real> RankSweepResult<T> {
    pub fn max_rank(&self) -> usize {
        self.fits.len()
    }
}

/// Default sweep bound `ceil(K delta') - 3`, at least 1 and at most `K`.
pub fn default_max_rank(k: usize, delta_prime: f64) -> usize {
    let r = ceil_tol(k as f64 * delta_prime) - 3;
    (r.max(1) as usize).min(k)
}

fn sweep_bound(k: usize, mask: &BandMask, config: &SolveConfig) -> usize {
    config
        .max_rank_sweep
        .unwrap_or_else(|| mask.delta().map_or(k, |d| default_max_rank(k, d)))
        .min(k)
}

/// Solves ranks `1..=max_rank_sweep` in order with warm starts.
///
/// Rank `i + 1` starts from the rank-`i` factor plus one column along the
/// leading eigenvector of the masked residual, jittered; a cold eigen start
/// is also tried and the better fit kept. If both end above `f(i)`, the
/// rank-`i` solution padded with a zero column is kept, so the fits never
/// increase.
pub fn rank_sweep<T: Real>(target: &PatchedCovariance<T>, mask: &BandMask, config: &SolveConfig) -> Result<RankSweepResult<T>> {
    config.validate()?;
    let k = target.k();
    check_dims(k, target, mask)?;
    let max = sweep_bound(k, mask, config);
    let t = target.matrix.as_dmatrix();
    let (f0, _) = evaluate(&DMatrix::zeros(k, 0), t, mask.as_slice(), false);
    let scale = jitter_scale(target, config);

    let mut fits: Vec<T> = Vec::with_capacity(max);
    let mut factors: Vec<LowRankFactor<T>> = Vec::with_capacity(max);
    for i in 1..=max {
        let (prev, prev_fit) = match factors.last() {
            Some(f) => (f.clone(), *fits.last().expect("fit per factor")),
            None => (LowRankFactor::zeros(k, 0), f0),
        };
        let mut rng = substream(config.seed, (i as u64) << 16, Stage::Solver);
        let start = if i == 1 {
            eigen_init(&target.matrix, 1)
        } else {
            prev.augmented(&residual_column(&prev, target, mask, scale, &mut rng))
        };
        let mut sol = descend(target, mask, start, config)?;
        if i > 1 {
            let cold = descend(target, mask, eigen_init(&target.matrix, i), config)?;
            if cold.fit < sol.fit {
                sol = cold;
            }
        }
        for r in 1..config.restarts {
            let mut rng = substream(config.seed, ((i as u64) << 16) + r as u64, Stage::Solver);
            let alt = LowRankFactor::new(jittered(eigen_init(&target.matrix, i).gamma(), scale, &mut rng));
            let cand = descend(target, mask, alt, config)?;
            if cand.fit < sol.fit {
                sol = cand;
            }
        }
        if sol.fit > prev_fit {
            sol.factor = prev.augmented(&DVector::zeros(k));
            sol.fit = prev_fit;
        }
        fits.push(sol.fit);
        factors.push(sol.factor);
    }
    let normalized_fits = fits.iter().map(|&f| if f0 > T::zero() { f / f0 } else { T::zero() }).collect();
    Ok(RankSweepResult { fits, factors, normalized_fits })
}

fn residual_column<T: Real, R: Rng>(
    prev: &LowRankFactor<T>,
    target: &PatchedCovariance<T>,
    mask: &BandMask,
    scale: f64,
    rng: &mut R,
) -> DVector<T> {
    let k = prev.k();
    let gram = prev.gram();
    let resid = DMatrix::from_fn(k, k, |j, l| {
        if mask.includes(j, l) {
            *target.matrix.get(j, l) - *gram.get(j, l)
        } else {
            T::zero()
        }
    });
    let (vals, vecs) = sym_eigen_desc(&resid);
    let s = vals[0].max(T::zero()).sqrt();
    DVector::from_fn(k, |j, _| vecs[(j, 0)] * s + T::of(scale * rng.sample::<f64, _>(StandardNormal)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RankChoice {
    pub rank: usize,
    /// The elbow threshold was never met.
    pub warning: bool,
}

/// Applies a rank policy to a sweep.
pub fn select_rank<T: Real>(sweep: &RankSweepResult<T>, policy: RankPolicy) -> Result<RankChoice> {
    let max = sweep.max_rank();
    if max == 0 {
        return Err(Error::invalid("empty rank sweep"));
    }
    Ok(match policy {
        RankPolicy::Fixed(q) => {
            if q == 0 {
                return Err(Error::InvalidRank { rank: q, k: max });
            }
            RankChoice { rank: q, warning: false }
        }
        RankPolicy::Elbow(eps) => match sweep.normalized_fits.iter().position(|f| f.as_f64() < eps) {
            Some(p) => RankChoice { rank: p + 1, warning: false },
            None => {
                warn!("no rank up to {max} reaches normalized fit {eps}");
                RankChoice { rank: max, warning: true }
            }
        },
        RankPolicy::Penalty(tau) => {
            let mut best = (0, f64::INFINITY);
            for (p, f) in sweep.fits.iter().enumerate() {
                let v = f.as_f64() + tau * (p + 1) as f64;
                if v < best.1 {
                    best = (p, v);
                }
            }
            RankChoice { rank: best.0 + 1, warning: false }
        }
    })
}

/// Piecewise-constant kernel on the cells of the regular `K`-partition.
#[derive(Debug, Clone, PartialEq)]
pub struct StepKernel<T: Real> {
    pub matrix: SymMatrix<T>,
}

impl<T: Real> StepKernel<T> {
    pub fn eval(&self, x: f64, y: f64) -> T {
        let k = self.matrix.k();
        *self.matrix.get(cell_index(x, k), cell_index(y, k))
    }

    /// Cell boundaries `0, 1/K, ..., 1`.
    pub fn boundaries(&self) -> Vec<f64> {
        let k = self.matrix.k();
        (0..=k).map(|j| j as f64 / k as f64).collect()
    }
}

#[derive(Debug, Clone)]
pub struct Estimate<T: Real> {
    pub matrix: SymMatrix<T>,
    pub rank: RankChoice,
    pub kernel: StepKernel<T>,
    pub fit: T,
    pub mask: BandMask,
    pub sweep: Option<RankSweepResult<T>>,
    /// The trace of the estimate exceeds that of the target by more than 10%.
    pub trace_warning: bool,
}

/// Solver mask for `target` under the configured bandwidth and support policy.
pub fn solver_mask<T: Real>(target: &PatchedCovariance<T>, config: &SolveConfig) -> Result<BandMask> {
    let dp = config
        .delta_prime
        .or(target.delta_effective)
        .ok_or_else(|| Error::invalid("no effective bandwidth given"))?;
    match config.support {
        SupportPolicy::Strict => effective_mask(target, dp),
        SupportPolicy::Intersect { min_count } => supported_mask(target, dp, min_count),
        SupportPolicy::ZeroFill => band_mask(target.k(), dp, target.noise_flag),
    }
}

/// Full completion: mask, sweep or fixed solve, rank choice.
pub fn estimate_covariance<T: Real>(target: &PatchedCovariance<T>, config: &SolveConfig) -> Result<Estimate<T>> {
    config.validate()?;
    let mask = solver_mask(target, config)?;
    let (factor, fit, rank, sweep) = match config.rank_policy {
        RankPolicy::Fixed(q) => {
            let sol = solve_fixed_rank(target, &mask, q, config)?;
            (sol.factor, sol.fit, RankChoice { rank: q, warning: false }, None)
        }
        policy => {
            let sweep = rank_sweep(target, &mask, config)?;
            let choice = select_rank(&sweep, policy)?;
            let p = choice.rank - 1;
            (sweep.factors[p].clone(), sweep.fits[p], choice, Some(sweep))
        }
    };
    let matrix = factor.gram();
    let trace_warning = matrix.trace().as_f64() > 1.1 * target.matrix.trace().as_f64();
    if trace_warning && config.trace_bound {
        warn!("estimate trace {} exceeds target trace {}", matrix.trace(), target.matrix.trace());
    }
    Ok(Estimate { kernel: StepKernel { matrix: matrix.clone() }, matrix, rank, fit, mask, sweep, trace_warning })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::kernels::{evaluate_on_grid, scenario_kernel, Eigenfunction, MercerKernel, Scenario};
    use crate::matrix::relative_error;
    use crate::rng::seeded;
    use proptest::prelude::*;
    use rand::Rng;

    fn band_target(scenario: Scenario, q: usize, k: usize, delta: f64, seed: u64) -> (SymMatrix<f64>, PatchedCovariance<f64>, BandMask) {
        let grid = Grid::perturbed(k, &mut seeded(seed));
        let truth: SymMatrix<f64> = evaluate_on_grid(&scenario_kernel(scenario, q).unwrap(), &grid);
        let mask = band_mask(k, delta, false).unwrap();
        let target = PatchedCovariance::banded_from(&truth, &mask).unwrap();
        (truth, target, mask)
    }

    fn random_problem(k: usize, i: usize, seed: u64) -> (LowRankFactor<f64>, PatchedCovariance<f64>, BandMask) {
        let mut rng = seeded(seed);
        let mut draw = || rng.sample::<f64, _>(StandardNormal);
        let g = DMatrix::from_fn(k, i, |_, _| draw());
        let a = DMatrix::from_fn(k, k, |_, _| draw());
        let t = SymMatrix::from_dmatrix_symmetrized(&a + a.transpose());
        let mask = band_mask(k, 0.6, seed.is_multiple_of(2)).unwrap_or_else(|_| BandMask::full(k));
        (LowRankFactor::new(g), PatchedCovariance::from_matrix(t, 1, false), mask)
    }

    #[test]
    fn objective_examples() {
        let ones = SymMatrix::from_fn(2, |_, _| 1.0);
        let t = PatchedCovariance::from_matrix(ones, 1, false);
        let zero = LowRankFactor::zeros(2, 1);
        assert_eq!(objective(&zero, &t, &BandMask::full(2)).unwrap(), 1.0);
        let exact = LowRankFactor::new(DMatrix::from_element(2, 1, 1.0));
        assert_eq!(objective(&exact, &t, &BandMask::full(2)).unwrap(), 0.0);
        assert!(gradient(&exact, &t, &BandMask::full(2)).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn scalar_gradient() {
        let t = PatchedCovariance::from_matrix(SymMatrix::from_fn(1, |_, _| 1.0), 1, false);
        let g = LowRankFactor::new(DMatrix::from_element(1, 1, 2.0));
        assert_eq!(gradient(&g, &t, &BandMask::full(1)).unwrap()[(0, 0)], 24.0);
    }

    #[test]
    fn gradient_matches_central_differences() {
        for seed in 0..50u64 {
            let k = 5 + (seed as usize * 7) % 26;
            let i = 1 + (seed as usize) % 5;
            let (g, t, mask) = random_problem(k, i, seed);
            let mut rng = seeded(1000 + seed);
            let e = DMatrix::from_fn(k, i, |_, _| rng.sample::<f64, _>(StandardNormal));
            let h = 1e-6;
            let fp = objective(&LowRankFactor::new(g.gamma() + &e * h), &t, &mask).unwrap();
            let fm = objective(&LowRankFactor::new(g.gamma() - &e * h), &t, &mask).unwrap();
            let fd = (fp - fm) / (2.0 * h);
            let an = gradient(&g, &t, &mask).unwrap().dot(&e);
            assert!((fd - an).abs() <= 1e-5 * an.abs().max(1e-8), "seed {seed}: {fd} vs {an}");
        }
    }

    #[test]
    fn recovers_exact_band() {
        for q in 1..=3 {
            let (truth, target, mask) = band_target(Scenario::A, q, 50, 0.5, q as u64);
            let sol = solve_fixed_rank(&target, &mask, q, &SolveConfig::default()).unwrap();
            assert!(sol.fit < 1e-8, "q={q} fit {}", sol.fit);
            let re = relative_error(&sol.factor.gram(), &truth).unwrap();
            assert!(re < 0.1, "q={q} re {re}");
        }
    }

    #[test]
    fn full_rank_interpolates() {
        let (truth, _, _) = band_target(Scenario::B, 3, 8, 0.5, 3);
        let target = PatchedCovariance::from_matrix(truth.clone(), 1, false);
        let sol = solve_fixed_rank(&target, &BandMask::full(8), 8, &SolveConfig::default()).unwrap();
        assert!(sol.fit < 1e-12);
        assert!(sol.factor.gram().max_abs_diff(&truth) < 1e-5);
    }

    #[test]
    fn underfit_rank_is_worse() {
        let (_, target, mask) = band_target(Scenario::A, 3, 50, 0.5, 5);
        let cfg = SolveConfig::default();
        let f1 = solve_fixed_rank(&target, &mask, 1, &cfg).unwrap().fit;
        let f3 = solve_fixed_rank(&target, &mask, 3, &cfg).unwrap().fit;
        assert!(f1 > f3);
        assert!(matches!(solve_fixed_rank(&target, &mask, 51, &cfg), Err(Error::InvalidRank { .. })));
    }

    #[test]
    fn sweep_scree_on_exact_band() {
        let (_, target, mask) = band_target(Scenario::A, 2, 50, 0.5, 8);
        let cfg = SolveConfig { max_rank_sweep: Some(6), ..SolveConfig::default() };
        let sweep = rank_sweep(&target, &mask, &cfg).unwrap();
        assert_eq!(sweep.max_rank(), 6);
        assert!(sweep.normalized_fits[0] > 0.01 && sweep.normalized_fits[0] <= 1.0);
        assert!(sweep.normalized_fits[1] < 1e-6);
        assert!(sweep.fits[0] > 100.0 * sweep.fits[1]);
        for w in sweep.fits.windows(2) {
            assert!(w[1] <= w[0] + 1e-10);
        }
        assert_eq!(select_rank(&sweep, RankPolicy::Elbow(0.01)).unwrap().rank, 2);
        assert_eq!(select_rank(&sweep, RankPolicy::Penalty(sweep.fits[0] + 1.0)).unwrap().rank, 1);
    }

    #[test]
    fn elbow_edge_cases() {
        let flat = RankSweepResult::<f64> {
            fits: vec![0.5; 4],
            factors: vec![LowRankFactor::zeros(2, 1); 4],
            normalized_fits: vec![1e-3; 4],
        };
        assert_eq!(select_rank(&flat, RankPolicy::Elbow(0.01)).unwrap(), RankChoice { rank: 1, warning: false });
        assert_eq!(select_rank(&flat, RankPolicy::Elbow(1e-9)).unwrap(), RankChoice { rank: 4, warning: true });
        assert_eq!(select_rank(&flat, RankPolicy::Penalty(0.0)).unwrap().rank, 1);
        assert_eq!(select_rank(&flat, RankPolicy::Fixed(3)).unwrap().rank, 3);
    }

    #[test]
    fn estimate_pipeline_and_step_kernel() {
        // Equal weights: the Table 1 eigenvalues leave f(2) under the 0.01 elbow.
        let kern = MercerKernel::new(
            vec![1.0; 3],
            vec![Eigenfunction::Constant(1.0), Eigenfunction::Sine { k: 1 }, Eigenfunction::Sine { k: 2 }],
        )
        .unwrap();
        let grid = Grid::perturbed(50, &mut seeded(12));
        let truth: SymMatrix<f64> = evaluate_on_grid(&kern, &grid);
        let mut target = PatchedCovariance::banded_from(&truth, &band_mask(50, 0.5, false).unwrap()).unwrap();
        target.delta_effective = Some(0.5);
        let est = estimate_covariance(&target, &SolveConfig { support: SupportPolicy::ZeroFill, ..SolveConfig::default() }).unwrap();
        assert_eq!(est.rank.rank, 3);
        assert!(relative_error(&est.matrix, &truth).unwrap() < 0.1);
        let b = est.kernel.boundaries();
        for j in 0..50 {
            for l in 0..50 {
                let (x, y) = ((b[j] + b[j + 1]) / 2.0, (b[l] + b[l + 1]) / 2.0);
                assert_eq!(est.kernel.eval(x, y), *est.matrix.get(j, l));
            }
        }
    }

    #[test]
    fn matches_oracle() {
        let (_, target, mask) = band_target(Scenario::B, 2, 50, 0.5, 21);
        let oracle = exact_band_completion(&target.matrix, &mask, 2).unwrap();
        let sol = solve_fixed_rank(&target, &mask, 2, &SolveConfig::default()).unwrap();
        assert!(relative_error(&sol.factor.gram(), &oracle).unwrap() < 0.1);
    }

    #[test]
    fn default_sweep_bound() {
        assert_eq!(default_max_rank(50, 0.4), 17);
        assert_eq!(default_max_rank(10, 0.2), 1);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn objective_is_rotation_invariant(seed in 0u64..10_000, angle in 0.0f64..6.3) {
            let (g, t, mask) = random_problem(12, 2, seed);
            let q = DMatrix::from_row_slice(2, 2, &[angle.cos(), -angle.sin(), angle.sin(), angle.cos()]);
            let a = objective(&g, &t, &mask).unwrap();
            let b = objective(&LowRankFactor::new(g.gamma() * q), &t, &mask).unwrap();
            prop_assert!(a >= 0.0);
            prop_assert!((a - b).abs() <= 1e-10 * a.max(1.0));
        }

        #[test]
        fn solves_are_psd(seed in 0u64..1000) {
            let (_, t, mask) = random_problem(10, 3, seed);
            let cfg = SolveConfig { max_iter: 200, ..SolveConfig::default() };
            let sol = solve_fixed_rank(&t, &mask, 3, &cfg).unwrap();
            let (vals, _) = sol.factor.gram().eigen_desc();
            let max = vals[0].abs().max(1e-300);
            prop_assert!(vals.iter().all(|&v| v >= -1e-10 * max));
        }
    }
}
