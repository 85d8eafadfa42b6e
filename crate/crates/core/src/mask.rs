//! Symmetric inclusion masks over `K x K` index pairs.

use crate::error::{Error, Result};

/// Slack absorbing representation error in products like `50 * 0.7`.
const FLOOR_SLACK: f64 = 1e-9;

/// `floor(K * delta) - 1`: pairs with `|j - l|` strictly below this are in the band.
pub fn band_width(k: usize, delta: f64) -> i64 {
    (k as f64 * delta + FLOOR_SLACK).floor() as i64 - 1
}

/// `ceil(x)` tolerant to representation error just above an integer.
pub(crate) fn ceil_tol(x: f64) -> i64 {
    (x - FLOOR_SLACK).ceil() as i64
}

/// Symmetric 0/1 mask, stored densely.
#[derive(Debug, Clone, PartialEq)]
pub struct BandMask {
    k: usize,
    include: Vec<bool>,
    delta: Option<f64>,
    exclude_diagonal: bool,
}

/// Standard band `|j - l| < floor(K delta) - 1`, optionally without the diagonal.
pub fn band_mask(k: usize, delta: f64, exclude_diagonal: bool) -> Result<BandMask> {
    if k < 2 {
        return Err(Error::invalid(format!("band mask needs K >= 2, got {k}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(format!("delta must lie in (0, 1), got {delta}")));
    }
    let width = band_width(k, delta);
    if width <= 0 {
        return Err(Error::BandDegenerate { k, delta, width });
    }
    let mut mask = BandMask::from_fn(k, |j, l| {
        let d = j.abs_diff(l) as i64;
        d < width && !(exclude_diagonal && d == 0)
    });
    mask.delta = Some(delta);
    mask.exclude_diagonal = exclude_diagonal;
    Ok(mask)
}

impl BandMask {
    /// Mask from a predicate on zero-based pairs; only `j <= l` is queried.
    pub fn from_fn(k: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut include = vec![false; k * k];
        for j in 0..k {
            for l in j..k {
                let v = f(j, l);
                include[j * k + l] = v;
                include[l * k + j] = v;
            }
        }
        let exclude_diagonal = k > 0 && (0..k).all(|j| !include[j * k + j]);
        BandMask { k, include, delta: None, exclude_diagonal }
    }

    /// Every pair included.
    pub fn full(k: usize) -> Self {
        BandMask::from_fn(k, |_, _| true)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Bandwidth parameter for standard band masks.
    pub fn delta(&self) -> Option<f64> {
        self.delta
    }

    pub fn exclude_diagonal(&self) -> bool {
        self.exclude_diagonal
    }

    /// Zero-based membership test.
    #[inline]
    pub fn includes(&self, j: usize, l: usize) -> bool {
        self.include[j * self.k + l]
    }

    /// Row-major dense view.
    pub fn as_slice(&self) -> &[bool] {
        &self.include
    }

    /// Number of included (ordered) pairs.
    pub fn count(&self) -> usize {
        self.include.iter().filter(|&&b| b).count()
    }

    /// Pairs included here and by `keep`. Band metadata is preserved.
    pub fn restrict(&self, mut keep: impl FnMut(usize, usize) -> bool) -> Self {
        let mut out = BandMask::from_fn(self.k, |j, l| self.includes(j, l) && keep(j, l));
        out.delta = self.delta;
        out.exclude_diagonal = self.exclude_diagonal || out.exclude_diagonal;
        out
    }

    pub fn is_subset_of(&self, other: &BandMask) -> bool {
        self.k == other.k && self.include.iter().zip(&other.include).all(|(&a, &b)| !a || b)
    }
}
