//! Banded pairwise-complete covariance from fragments.
//!
//! Each entry averages centred cross-products over exactly the observations
//! that see both coordinates, with means taken over the same contributors.
//! Entries no fragment reaches stay zero with count zero.

use crate::error::{Error, Result};
use crate::grid::cell_index;
use crate::mask::{band_mask, BandMask};
use crate::matrix::SymMatrix;
use crate::scalar::Real;
use crate::simulate::FragmentSample;

/// Patched covariance with its availability counts.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchedCovariance<T: Real> {
    /// Entries, zero where the count is zero; counts are attached.
    pub matrix: SymMatrix<T>,
    /// Effective bandwidth chosen for the solver mask, once set.
    pub delta_effective: Option<f64>,
    /// The diagonal is corrupted by measurement noise.
    pub noise_flag: bool,
}

impl<T: Real> PatchedCovariance<T> {
    pub fn k(&self) -> usize {
        self.matrix.k()
    }

    pub fn counts(&self) -> &[usize] {
        self.matrix.counts().expect("patched covariance carries counts")
    }

    pub fn count(&self, j: usize, l: usize) -> usize {
        self.counts()[j * self.k() + l]
    }

    /// Wraps a known matrix as if every entry were observed once per `count`.
    pub fn from_matrix(matrix: SymMatrix<T>, count: usize, noise_flag: bool) -> Self {
        let k = matrix.k();
        let m = if matrix.counts().is_some() {
            matrix
        } else {
            matrix.with_counts(vec![count; k * k]).expect("square counts")
        };
        PatchedCovariance { matrix: m, delta_effective: None, noise_flag }
    }

    /// Copy of `full` kept on `mask` and zero elsewhere, with counts 1 on the mask.
    pub fn banded_from(full: &SymMatrix<T>, mask: &BandMask) -> Result<Self> {
        let m = full.masked(mask)?;
        let counts = mask.as_slice().iter().map(|&b| usize::from(b)).collect();
        Ok(PatchedCovariance {
            matrix: SymMatrix::try_from_dmatrix(m.into_dmatrix())?.with_counts(counts)?,
            delta_effective: None,
            noise_flag: mask.exclude_diagonal(),
        })
    }
}

/// Patched covariance on the sample's common grid.
pub fn patched_regular<T: Real>(sample: &FragmentSample) -> Result<PatchedCovariance<T>> {
    let grid = sample
        .grid
        .as_ref()
        .ok_or_else(|| Error::invalid("patched_regular needs a sample on a common grid"))?;
    let k = grid.resolution();
    let mut binned = Vec::with_capacity(sample.n());
    for c in &sample.curves {
        let mut obs = Vec::with_capacity(c.len());
        for (&t, &v) in c.times.iter().zip(&c.values) {
            let j = grid
                .index_of(t)
                .ok_or_else(|| Error::invalid(format!("curve {} observes {t} off the common grid", c.id)))?;
            obs.push((j, T::of(v)));
        }
        binned.push(obs);
    }
    Ok(assemble(k, &binned, sample.noise_sd > 0.0))
}

/// Patched covariance on the `K x K` bins of the regular partition.
pub fn patched_binned<T: Real>(sample: &FragmentSample, k: usize) -> Result<PatchedCovariance<T>> {
    if k < 1 {
        return Err(Error::invalid("bin resolution must be positive"));
    }
    let binned: Vec<Vec<(usize, T)>> = sample
        .curves
        .iter()
        .map(|c| c.times.iter().zip(&c.values).map(|(&t, &v)| (cell_index(t, k), T::of(v))).collect())
        .collect();
    let out = assemble(k, &binned, sample.noise_sd > 0.0);
    if out.counts().iter().all(|&c| c == 0) {
        return Err(Error::invalid("no observation pair falls in any bin"));
    }
    Ok(out)
}

/// Two-pass accumulation over all ordered within-curve pairs `(a, b)` with
/// `a` in bin `j` and `b` in bin `l`.
fn assemble<T: Real>(k: usize, curves: &[Vec<(usize, T)>], noise_flag: bool) -> PatchedCovariance<T> {
    let kk = k * k;
    let mut count = vec![0usize; kk];
    let mut sum_row = vec![T::zero(); kk];
    let mut sum_col = vec![T::zero(); kk];

    let for_pairs = |obs: &[(usize, T)], f: &mut dyn FnMut(usize, usize, T, T)| {
        for &(j, x) in obs {
            for &(l, y) in obs {
                if j <= l {
                    f(j, l, x, y);
                }
            }
        }
    };

    for obs in curves {
        for_pairs(obs, &mut |j, l, x, y| {
            let idx = j * k + l;
            count[idx] += 1;
            sum_row[idx] += x;
            sum_col[idx] += y;
        });
    }
    let mean = |s: &[T], idx: usize| if count[idx] > 0 { s[idx] / T::of_usize(count[idx]) } else { T::zero() };
    let mean_row: Vec<T> = (0..kk).map(|i| mean(&sum_row, i)).collect();
    let mean_col: Vec<T> = (0..kk).map(|i| mean(&sum_col, i)).collect();

    let mut cross = vec![T::zero(); kk];
    for obs in curves {
        for_pairs(obs, &mut |j, l, x, y| {
            let idx = j * k + l;
            cross[idx] += (x - mean_row[idx]) * (y - mean_col[idx]);
        });
    }

    let mut counts = vec![0usize; kk];
    let matrix = SymMatrix::from_fn(k, |j, l| {
        let idx = j * k + l;
        counts[idx] = count[idx];
        counts[l * k + j] = count[idx];
        if count[idx] > 0 {
            cross[idx] / T::of_usize(count[idx])
        } else {
            T::zero()
        }
    })
    .with_counts(counts)
    .expect("symmetric counts");
    PatchedCovariance { matrix, delta_effective: None, noise_flag }
}

/// Band mask for the solver at effective bandwidth `delta_prime`, without the
/// diagonal when the sample is noisy. Every masked entry must carry data.
pub fn effective_mask<T: Real>(patched: &PatchedCovariance<T>, delta_prime: f64) -> Result<BandMask> {
    let mask = band_mask(patched.k(), delta_prime, patched.noise_flag)?;
    check_support(patched, &mask)?;
    Ok(mask)
}

/// First masked pair (one-based) with no data.
pub fn check_support<T: Real>(patched: &PatchedCovariance<T>, mask: &BandMask) -> Result<()> {
    let k = patched.k();
    for j in 0..k {
        for l in j..k {
            if mask.includes(j, l) && patched.count(j, l) == 0 {
                return Err(Error::MaskExceedsSupport { row: j + 1, col: l + 1 });
            }
        }
    }
    Ok(())
}

/// Band mask at `delta_prime` restricted to pairs with at least `min_count` contributors.
pub fn supported_mask<T: Real>(patched: &PatchedCovariance<T>, delta_prime: f64, min_count: usize) -> Result<BandMask> {
    let mask = band_mask(patched.k(), delta_prime, patched.noise_flag)?;
    Ok(mask.restrict(|j, l| patched.count(j, l) >= min_count))
}

/// Default effective bandwidth: `delta - 0.1` for fixed lengths, the shortest length otherwise.
pub fn default_delta_prime(delta_min: f64, delta_max: f64) -> f64 {
    if delta_min == delta_max {
        // round away representation noise such as 0.8 - 0.1
        ((delta_min - 0.1) * 1e12).round() / 1e12
    } else {
        delta_min
    }
}
