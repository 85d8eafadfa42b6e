//! Gaussian-process sampling, fragmentation and measurement noise.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::kernels::{evaluate_on_grid, evaluate_on_points, Kernel};
use crate::mask::ceil_tol;
use crate::matrix::{sym_eigen_desc, SymMatrix};
use crate::rng::{seeded, substream, Stage};

/// Eigenvalues above `-CLIP_FLOOR * lambda_max` are treated as rounding and clipped to zero.
pub const CLIP_FLOOR: f64 = 1e-8;
/// Eigenvalues below `-PSD_REJECT * lambda_max` reject the matrix.
pub const PSD_REJECT: f64 = 1e-6;

/// Observation regime of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridType {
    /// Every curve shares one grid and keeps the points inside its interval.
    Common,
    /// Per-curve subsets of one shared perturbed grid.
    Type1,
    /// Per-curve uniform times.
    Type2,
}

impl fmt::Display for GridType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GridType::Common => "common",
            GridType::Type1 => "type1",
            GridType::Type2 => "type2",
        })
    }
}

impl FromStr for GridType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "common" => Ok(GridType::Common),
            "type1" | "1" => Ok(GridType::Type1),
            "type2" | "2" => Ok(GridType::Type2),
            other => Err(Error::invalid(format!("unknown grid type '{other}'"))),
        }
    }
}

/// Observation interval `[start, start + delta]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub start: f64,
    pub delta: f64,
}

impl Interval {
    pub fn end(&self) -> f64 {
        self.start + self.delta
    }

    pub fn contains(&self, t: f64) -> bool {
        self.start <= t && t <= self.end()
    }

    /// Smallest interval from `first` whose end is not below `last`.
    pub fn hull(first: f64, last: f64) -> Interval {
        let mut delta = last - first;
        while first + delta < last {
            delta = delta.next_up();
        }
        Interval { start: first, delta }
    }
}

/// One observed fragment.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub id: String,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl Curve {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// A sample of fragments with their intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct FragmentSample {
    pub curves: Vec<Curve>,
    pub intervals: Vec<Interval>,
    pub noise_sd: f64,
    pub grid_type: GridType,
    /// The shared grid, for the common and type-1 regimes.
    pub grid: Option<Grid>,
}

impl FragmentSample {
    pub fn n(&self) -> usize {
        self.curves.len()
    }

    pub fn total_points(&self) -> usize {
        self.curves.iter().map(Curve::len).sum()
    }

    pub fn mean_points(&self) -> f64 {
        self.total_points() as f64 / self.n().max(1) as f64
    }

    pub fn mean_delta(&self) -> f64 {
        self.intervals.iter().map(|i| i.delta).sum::<f64>() / self.intervals.len().max(1) as f64
    }
}

/// Where a fragment of given length starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StartLaw {
    /// Start uniform on `[0, 1 - length]`.
    #[default]
    Uniform,
    /// Centre uniform on `[0, 1]`, interval shifted inward to fit. Edges keep
    /// a fixed share `length / 2` of the curves instead of a vanishing one.
    Centred,
    /// On a shared grid: `ceil(K length)` consecutive grid points, first index
    /// uniform among the admissible ones.
    GridAligned,
}

impl FromStr for StartLaw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(StartLaw::Uniform),
            "centred" | "centered" => Ok(StartLaw::Centred),
            "grid-aligned" => Ok(StartLaw::GridAligned),
            other => Err(Error::invalid(format!("unknown start law `{other}`"))),
        }
    }
}

/// Law of the observation intervals: length uniform on `[delta_min, delta_max]`
/// (fixed when equal), start drawn by [`StartLaw`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FragmentLaw {
    pub delta_min: f64,
    pub delta_max: f64,
    #[serde(default)]
    pub start: StartLaw,
}

impl FragmentLaw {
    pub fn new(delta_min: f64, delta_max: f64) -> Result<Self> {
        if !(delta_min > 0.0 && delta_min <= delta_max && delta_max < 1.0) {
            return Err(Error::invalid(format!(
                "fragment law needs 0 < delta_min <= delta_max < 1, got ({delta_min}, {delta_max})"
            )));
        }
        Ok(FragmentLaw { delta_min, delta_max, start: StartLaw::Uniform })
    }

    pub fn with_start(self, start: StartLaw) -> Self {
        FragmentLaw { start, ..self }
    }

    pub fn fixed(delta: f64) -> Result<Self> {
        FragmentLaw::new(delta, delta)
    }

    pub fn is_fixed(&self) -> bool {
        self.delta_min == self.delta_max
    }

    pub fn draw_length<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.is_fixed() {
            self.delta_min
        } else {
            rng.random_range(self.delta_min..self.delta_max)
        }
    }

    /// Grid-aligned starts are drawn as uniform here; the grid-aware
    /// samplers handle them separately.
    pub fn draw_start<R: Rng + ?Sized>(&self, delta: f64, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        match self.start {
            StartLaw::Uniform | StartLaw::GridAligned => u * (1.0 - delta),
            StartLaw::Centred => (u - delta / 2.0).clamp(0.0, 1.0 - delta),
        }
    }

    /// First index of a window of `q` consecutive points out of `k`.
    pub fn draw_window<R: Rng + ?Sized>(&self, k: usize, q: usize, rng: &mut R) -> usize {
        match self.start {
            StartLaw::Uniform | StartLaw::GridAligned => rng.random_range(0..=k - q),
            StartLaw::Centred => {
                let c = rng.random::<f64>() * k as f64 - q as f64 / 2.0;
                (c.round().max(0.0) as usize).min(k - q)
            }
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Interval {
        let delta = self.draw_length(rng);
        Interval { start: self.draw_start(delta, rng), delta }
    }
}

/// Square-root sampler for `N(0, truth)`.
#[derive(Debug, Clone)]
pub struct GaussianSampler {
    /// `K x r` factor `U diag(sqrt(lambda_+))` over the positive eigenvalues.
    root: DMatrix<f64>,
}

impl GaussianSampler {
    pub fn new(truth: &SymMatrix<f64>) -> Result<Self> {
        Self::from_dense(truth.as_dmatrix())
    }

    fn from_dense(cov: &DMatrix<f64>) -> Result<Self> {
        let k = cov.nrows();
        let (vals, vecs) = sym_eigen_desc(cov);
        let max = vals.iter().fold(0.0f64, |m, &v| m.max(v));
        let min = vals.iter().fold(f64::INFINITY, |m, &v| m.min(v));
        if k > 0 && min < -PSD_REJECT * max || (max == 0.0 && min < 0.0) {
            return Err(Error::NotPsd { min, max });
        }
        let keep: Vec<usize> = (0..k).filter(|&i| vals[i] > CLIP_FLOOR * max && vals[i] > 0.0).collect();
        let mut root = DMatrix::zeros(k, keep.len().max(1));
        for (c, &i) in keep.iter().enumerate() {
            let s = vals[i].sqrt();
            root.set_column(c, &(vecs.column(i) * s));
        }
        Ok(GaussianSampler { root })
    }

    pub fn dim(&self) -> usize {
        self.root.nrows()
    }

    /// `n x K` matrix of i.i.d. rows.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> DMatrix<f64> {
        let r = self.root.ncols();
        let z = DMatrix::from_fn(n, r, |_, _| rng.sample::<f64, _>(StandardNormal));
        z * self.root.transpose()
    }

    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let r = self.root.ncols();
        let z = DVector::from_fn(r, |_, _| StandardNormal.sample(rng));
        &self.root * z
    }
}

/// `n` i.i.d. draws from `N(0, truth)` as the rows of an `n x K` matrix.
pub fn sample_gp(truth: &SymMatrix<f64>, n: usize, seed: u64) -> Result<DMatrix<f64>> {
    Ok(GaussianSampler::new(truth)?.sample(n, &mut seeded(seed)))
}

/// Common-grid fragmentation: each curve keeps the grid points inside its interval.
pub fn fragment(values: &DMatrix<f64>, grid: &Grid, law: &FragmentLaw, seed: u64) -> Result<FragmentSample> {
    fragment_with(values, grid, law, &mut seeded(seed))
}

pub fn fragment_with<R: Rng + ?Sized>(
    values: &DMatrix<f64>,
    grid: &Grid,
    law: &FragmentLaw,
    rng: &mut R,
) -> Result<FragmentSample> {
    if values.ncols() != grid.resolution() {
        return Err(Error::DimensionMismatch { expected: grid.resolution(), got: values.ncols() });
    }
    let pts = grid.points();
    let mut curves = Vec::with_capacity(values.nrows());
    let mut intervals = Vec::with_capacity(values.nrows());
    let k = pts.len();
    for i in 0..values.nrows() {
        let iv = match law.start {
            StartLaw::Uniform | StartLaw::Centred => law.draw(rng),
            StartLaw::GridAligned => {
                let q = points_for(law.draw_length(rng), k, i)?.min(k);
                let a = law.draw_window(k, q, rng);
                Interval::hull(pts[a], pts[a + q - 1])
            }
        };
        let (times, vals): (Vec<f64>, Vec<f64>) = pts
            .iter()
            .enumerate()
            .filter(|(_, &t)| iv.contains(t))
            .map(|(j, &t)| (t, values[(i, j)]))
            .unzip();
        curves.push(Curve { id: (i + 1).to_string(), times, values: vals });
        intervals.push(iv);
    }
    Ok(FragmentSample { curves, intervals, noise_sd: 0.0, grid_type: GridType::Common, grid: Some(grid.clone()) })
}

/// Irregular designs sampled directly from a kernel.
///
/// Type 1: one perturbed grid of `base_resolution` points is drawn and each
/// curve observes `ceil(K delta_i)` consecutive points of it; the recorded
/// interval is the hull of those points. Type 2: `ceil(K delta_i)` times
/// uniform on the curve's interval.
pub fn fragment_irregular<K: Kernel + ?Sized>(
    kernel: &K,
    n: usize,
    law: &FragmentLaw,
    grid_type: GridType,
    base_resolution: usize,
    seed: u64,
) -> Result<FragmentSample> {
    let mut rng = seeded(seed);
    let streams = IrregularStreams::split(&mut rng);
    fragment_irregular_with(kernel, n, law, grid_type, base_resolution, streams)
}

/// Independent generators for the stages of an irregular design.
pub struct IrregularStreams<R> {
    pub grid: R,
    pub intervals: R,
    pub times: R,
    pub paths: R,
}

impl IrregularStreams<crate::rng::StreamRng> {
    fn split<R: Rng + ?Sized>(rng: &mut R) -> Self {
        IrregularStreams {
            grid: seeded(rng.random()),
            intervals: seeded(rng.random()),
            times: seeded(rng.random()),
            paths: seeded(rng.random()),
        }
    }

    /// Stage substreams of one replication.
    pub fn for_replication(master: u64, replication: u64) -> Self {
        IrregularStreams {
            grid: substream(master, replication, Stage::Grid),
            intervals: substream(master, replication, Stage::Intervals),
            times: substream(master, replication, Stage::Times),
            paths: substream(master, replication, Stage::Paths),
        }
    }
}

pub fn fragment_irregular_with<K: Kernel + ?Sized, R: Rng>(
    kernel: &K,
    n: usize,
    law: &FragmentLaw,
    grid_type: GridType,
    base_resolution: usize,
    mut streams: IrregularStreams<R>,
) -> Result<FragmentSample> {
    let kb = base_resolution;
    if kb < 2 {
        return Err(Error::invalid("base resolution must be at least 2"));
    }
    let mut curves = Vec::with_capacity(n);
    let mut intervals = Vec::with_capacity(n);
    let mut shared = None;
    match grid_type {
        GridType::Common => return Err(Error::invalid("use `fragment` for the common-grid regime")),
        GridType::Type1 => {
            let grid = Grid::perturbed(kb, &mut streams.grid);
            let sampler = GaussianSampler::new(&evaluate_on_grid(kernel, &grid))?;
            let pts = grid.points();
            for i in 0..n {
                let delta = law.draw_length(&mut streams.intervals);
                let q = points_for(delta, kb, i)?;
                let a = law.draw_window(kb, q, &mut streams.intervals);
                let path = sampler.sample_one(&mut streams.paths);
                let times = pts[a..a + q].to_vec();
                let values = path.as_slice()[a..a + q].to_vec();
                intervals.push(Interval::hull(times[0], times[q - 1]));
                curves.push(Curve { id: (i + 1).to_string(), times, values });
            }
            shared = Some(grid);
        }
        GridType::Type2 => {
            let features = kernel.feature_map();
            for i in 0..n {
                let iv = law.draw(&mut streams.intervals);
                let q = points_for(iv.delta, kb, i)?;
                let mut times: Vec<f64> =
                    (0..q).map(|_| iv.start + iv.delta * streams.times.random::<f64>()).collect();
                times.sort_by(f64::total_cmp);
                let values = match &features {
                    Some(fm) => {
                        let xi = DVector::from_fn(fm.latent_dim(), |_, _| StandardNormal.sample(&mut streams.paths));
                        let coeffs = &fm.loading * xi;
                        times
                            .iter()
                            .map(|&t| fm.eval_features(t).iter().zip(coeffs.iter()).map(|(a, b)| a * b).sum())
                            .collect()
                    }
                    None => {
                        let cov: SymMatrix<f64> = evaluate_on_points(kernel, &times);
                        GaussianSampler::new(&cov)?.sample_one(&mut streams.paths).as_slice().to_vec()
                    }
                };
                intervals.push(iv);
                curves.push(Curve { id: (i + 1).to_string(), times, values });
            }
        }
    }
    Ok(FragmentSample { curves, intervals, noise_sd: 0.0, grid_type, grid: shared })
}

fn points_for(delta: f64, base: usize, curve: usize) -> Result<usize> {
    let q = ceil_tol(base as f64 * delta).max(0) as usize;
    if q < 2 {
        return Err(Error::FragmentTooSparse { curve: curve + 1, points: q });
    }
    Ok(q.min(base))
}

/// Adds i.i.d. `N(0, noise_sd^2)` errors to every value.
pub fn add_noise(sample: &FragmentSample, noise_sd: f64, seed: u64) -> Result<FragmentSample> {
    add_noise_with(sample, noise_sd, &mut seeded(seed))
}

pub fn add_noise_with<R: Rng + ?Sized>(sample: &FragmentSample, noise_sd: f64, rng: &mut R) -> Result<FragmentSample> {
    if !(noise_sd >= 0.0) || !noise_sd.is_finite() {
        return Err(Error::invalid(format!("noise sd must be nonnegative, got {noise_sd}")));
    }
    let mut out = sample.clone();
    out.noise_sd = noise_sd;
    if noise_sd == 0.0 {
        return Ok(out);
    }
    for c in &mut out.curves {
        for v in &mut c.values {
            let e: f64 = StandardNormal.sample(rng);
            *v += noise_sd * e;
        }
    }
    Ok(out)
}

/// Bin resolution `round(4/(5n) * sum_i Q_i)` used for type-2 designs.
pub fn type2_resolution(sample: &FragmentSample) -> usize {
    let k = (0.8 * sample.mean_points()).round() as usize;
    k.max(2)
}

/// `theta * ceil(mean Q / mean delta)`, rounded.
pub fn theta_resolution(sample: &FragmentSample, theta: f64) -> usize {
    let base = ceil_tol(sample.mean_points() / sample.mean_delta()) as f64;
    ((theta * base).round() as usize).max(2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{scenario_kernel, Scenario};

    #[test]
    fn zero_truth_gives_zero_paths() {
        let x = sample_gp(&SymMatrix::zeros(5), 7, 1).unwrap();
        assert_eq!(x.shape(), (7, 5));
        assert!(x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_truth_law_of_large_numbers() {
        let k = 4;
        let n = 10_000;
        let truth = SymMatrix::from_fn(k, |j, l| if j == l { 1.0 } else { 0.0 });
        let x = sample_gp(&truth, n, 42).unwrap();
        let cov = x.transpose() * &x / n as f64;
        for j in 0..k {
            for l in 0..k {
                let want = if j == l { 1.0 } else { 0.0 };
                assert!((cov[(j, l)] - want).abs() < 0.1);
            }
        }
    }

    #[test]
    fn rank_one_constant_paths() {
        let grid = Grid::perturbed(50, &mut seeded(3));
        let truth = evaluate_on_grid(&scenario_kernel(Scenario::A, 1).unwrap(), &grid);
        let x = sample_gp(&truth, 20, 9).unwrap();
        for i in 0..20 {
            let row = x.row(i);
            assert!(row.iter().all(|&v| (v - row[0]).abs() < 1e-10));
        }
    }

    #[test]
    fn rejects_indefinite() {
        let bad = SymMatrix::from_fn(2, |j, l| if j == l { 1.0 } else { 2.0 });
        assert!(matches!(sample_gp(&bad, 3, 1), Err(Error::NotPsd { .. })));
    }

    #[test]
    fn common_fragment_counts() {
        let k = 15;
        let grid = Grid::perturbed(k, &mut seeded(8));
        let values = DMatrix::from_fn(500, k, |i, j| (i * k + j) as f64);
        let law = FragmentLaw::fixed(0.5).unwrap();
        let s = fragment(&values, &grid, &law, 4).unwrap();
        for (c, iv) in s.curves.iter().zip(&s.intervals) {
            assert!((6..=9).contains(&c.len()), "{}", c.len());
            assert!(c.times.iter().all(|&t| iv.contains(t)));
            assert!(iv.start >= 0.0 && iv.end() <= 1.0);
            for (&t, &v) in c.times.iter().zip(&c.values) {
                let j = grid.index_of(t).unwrap();
                let i: usize = c.id.parse::<usize>().unwrap() - 1;
                assert_eq!(v, values[(i, j)]);
            }
        }
        assert_eq!(s, fragment(&values, &grid, &law, 4).unwrap());
        assert_ne!(s, fragment(&values, &grid, &law, 5).unwrap());
    }

    #[test]
    fn aligned_windows_cover_edges() {
        let k = 20;
        let grid = Grid::perturbed(k, &mut seeded(3));
        let values = DMatrix::zeros(400, k);
        let law = FragmentLaw::fixed(0.5).unwrap().with_start(StartLaw::GridAligned);
        let s = fragment(&values, &grid, &law, 9).unwrap();
        assert!(s.curves.iter().all(|c| c.len() == 10));
        for (c, iv) in s.curves.iter().zip(&s.intervals) {
            assert!(c.times.iter().all(|&t| iv.contains(t)));
            assert!(iv.start >= 0.0 && iv.end() <= 1.0);
        }
        // 11 window positions, each about 400/11 curves
        let first = s.curves.iter().filter(|c| c.times[0] == grid.points()[0]).count();
        assert!((20..=55).contains(&first), "{first}");
    }

    #[test]
    fn centred_starts_stay_inside_and_hit_edges() {
        let law = FragmentLaw::fixed(0.5).unwrap().with_start(StartLaw::Centred);
        let mut rng = seeded(5);
        let ivs: Vec<Interval> = (0..4000).map(|_| law.draw(&mut rng)).collect();
        assert!(ivs.iter().all(|iv| iv.start >= 0.0 && iv.end() <= 1.0 && iv.delta == 0.5));
        let left = ivs.iter().filter(|iv| iv.start == 0.0).count() as f64 / 4000.0;
        assert!((left - 0.25).abs() < 0.03, "{left}");
        for (k, q) in [(50, 25), (20, 20), (10, 3)] {
            for _ in 0..200 {
                assert!(law.draw_window(k, q, &mut rng) + q <= k);
            }
        }
    }

    #[test]
    fn near_full_interval_keeps_almost_everything() {
        let k = 40;
        let grid = Grid::regular(k);
        let values = DMatrix::zeros(50, k);
        let s = fragment(&values, &grid, &FragmentLaw::fixed(1.0 - 1.0 / k as f64).unwrap(), 1).unwrap();
        assert!(s.curves.iter().all(|c| c.len() >= k - 2));
    }

    #[test]
    fn type1_counts_and_shared_grid() {
        let kern = scenario_kernel(Scenario::A, 2).unwrap();
        let law = FragmentLaw::fixed(0.6).unwrap();
        let s = fragment_irregular(&kern, 40, &law, GridType::Type1, 50, 3).unwrap();
        let mut all: Vec<f64> = s.curves.iter().flat_map(|c| c.times.clone()).collect();
        all.sort_by(f64::total_cmp);
        all.dedup();
        assert!(all.len() <= 50);
        for (c, iv) in s.curves.iter().zip(&s.intervals) {
            assert_eq!(c.len(), 30);
            assert!(c.times.iter().all(|&t| iv.contains(t)));
        }
    }

    #[test]
    fn type2_counts() {
        let kern = scenario_kernel(Scenario::A, 3).unwrap();
        let law = FragmentLaw::new(0.4, 0.6).unwrap();
        let s = fragment_irregular(&kern, 100, &law, GridType::Type2, 50, 5).unwrap();
        for (c, iv) in s.curves.iter().zip(&s.intervals) {
            assert!((20..=30).contains(&c.len()));
            assert!(iv.delta >= 0.4 && iv.delta <= 0.6);
            assert!(c.times.iter().all(|&t| iv.contains(t)));
            assert!(c.times.windows(2).all(|w| w[0] <= w[1]));
        }
        let k = type2_resolution(&s);
        let q: usize = s.curves.iter().map(Curve::len).sum();
        assert_eq!(k, (4.0 * q as f64 / (5.0 * 100.0)).round() as usize);
    }

    #[test]
    fn type2_matern_uses_dense_sampler() {
        let kern = crate::kernels::matern_kernel(1.5, 0.5, 1.0).unwrap();
        let law = FragmentLaw::new(0.4, 0.6).unwrap();
        let s = fragment_irregular(&kern, 5, &law, GridType::Type2, 20, 5).unwrap();
        assert_eq!(s.n(), 5);
    }

    #[test]
    fn too_sparse() {
        let kern = scenario_kernel(Scenario::A, 1).unwrap();
        let law = FragmentLaw::fixed(0.05).unwrap();
        assert!(matches!(
            fragment_irregular(&kern, 3, &law, GridType::Type2, 10, 1),
            Err(Error::FragmentTooSparse { .. })
        ));
    }

    #[test]
    fn noise_behaviour() {
        let kern = scenario_kernel(Scenario::A, 1).unwrap();
        let law = FragmentLaw::fixed(0.5).unwrap();
        let s = fragment_irregular(&kern, 4000, &law, GridType::Type2, 50, 1).unwrap();
        assert_eq!(add_noise(&s, 0.0, 3).unwrap().curves, s.curves);
        let noisy = add_noise(&s, 1.0, 3).unwrap();
        assert_eq!(noisy.noise_sd, 1.0);
        let diffs: Vec<f64> = noisy
            .curves
            .iter()
            .zip(&s.curves)
            .flat_map(|(a, b)| a.values.iter().zip(&b.values).map(|(x, y)| x - y).collect::<Vec<_>>())
            .collect();
        assert!(diffs.len() >= 100_000);
        let m = diffs.iter().sum::<f64>() / diffs.len() as f64;
        let var = diffs.iter().map(|d| (d - m).powi(2)).sum::<f64>() / diffs.len() as f64;
        assert!((var - 1.0).abs() < 0.02, "{var}");
        assert!(add_noise(&s, -1.0, 3).is_err());
    }

    #[test]
    fn law_validation() {
        assert!(FragmentLaw::new(0.6, 0.4).is_err());
        assert!(FragmentLaw::new(0.0, 0.4).is_err());
        assert!(FragmentLaw::new(0.4, 1.0).is_err());
        let law = FragmentLaw::new(0.4, 0.6).unwrap();
        let mut rng = seeded(1);
        for _ in 0..1000 {
            let iv = law.draw(&mut rng);
            assert!(iv.delta >= 0.4 && iv.delta <= 0.6 && iv.start >= 0.0 && iv.end() <= 1.0 + 1e-15);
        }
    }
}
