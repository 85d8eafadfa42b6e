//! Dense symmetric matrices, low-rank factors and error metrics.

use nalgebra::{DMatrix, DVector, Scalar};

use crate::error::{Error, Result};
use crate::mask::BandMask;
use crate::scalar::Real;

/// Dense symmetric `K x K` matrix with an optional pair-availability count companion.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix<T: Scalar> {
    entries: DMatrix<T>,
    counts: Option<Vec<usize>>,
}

impl<T: Scalar> SymMatrix<T> {
    /// Builds from the upper triangle of `f` (zero-based), mirrored.
    pub fn from_fn(k: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut upper = Vec::with_capacity(k * (k + 1) / 2);
        for j in 0..k {
            for l in j..k {
                upper.push(f(j, l));
            }
        }
        let row_start = |a: usize| a * k - a * a.saturating_sub(1) / 2;
        let entries = DMatrix::from_fn(k, k, |r, c| {
            let (a, b) = if r <= c { (r, c) } else { (c, r) };
            upper[row_start(a) + (b - a)].clone()
        });
        SymMatrix { entries, counts: None }
    }

    /// Accepts an exactly symmetric square matrix.
    pub fn try_from_dmatrix(m: DMatrix<T>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch { expected: m.nrows(), got: m.ncols() });
        }
        let k = m.nrows();
        for j in 0..k {
            for l in (j + 1)..k {
                if m[(j, l)] != m[(l, j)] {
                    return Err(Error::invalid(format!("matrix not symmetric at ({}, {})", j + 1, l + 1)));
                }
            }
        }
        Ok(SymMatrix { entries: m, counts: None })
    }

    /// Attaches pair counts; they must be symmetric and of matching size.
    pub fn with_counts(mut self, counts: Vec<usize>) -> Result<Self> {
        let k = self.k();
        if counts.len() != k * k {
            return Err(Error::DimensionMismatch { expected: k * k, got: counts.len() });
        }
        for j in 0..k {
            for l in (j + 1)..k {
                if counts[j * k + l] != counts[l * k + j] {
                    return Err(Error::invalid("counts not symmetric"));
                }
            }
        }
        self.counts = Some(counts);
        Ok(self)
    }

    pub fn k(&self) -> usize {
        self.entries.nrows()
    }

    #[inline]
    pub fn get(&self, j: usize, l: usize) -> &T {
        &self.entries[(j, l)]
    }

    pub fn as_dmatrix(&self) -> &DMatrix<T> {
        &self.entries
    }

    pub fn into_dmatrix(self) -> DMatrix<T> {
        self.entries
    }

    /// Row-major pair counts, when recorded.
    pub fn counts(&self) -> Option<&[usize]> {
        self.counts.as_deref()
    }

    pub fn count(&self, j: usize, l: usize) -> Option<usize> {
        self.counts.as_ref().map(|c| c[j * self.k() + l])
    }
}

impl<T: Real> SymMatrix<T> {
    pub fn zeros(k: usize) -> Self {
        SymMatrix { entries: DMatrix::zeros(k, k), counts: None }
    }

    /// Averages `m` with its transpose.
    pub fn from_dmatrix_symmetrized(m: DMatrix<T>) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "square matrix required");
        let half = T::of(0.5);
        let sym = (&m + m.transpose()) * half;
        SymMatrix { entries: sym, counts: None }
    }

    pub fn frobenius_norm(&self) -> T {
        self.entries.norm()
    }

    pub fn trace(&self) -> T {
        self.entries.trace()
    }

    pub fn scaled(&self, c: T) -> Self {
        SymMatrix { entries: &self.entries * c, counts: self.counts.clone() }
    }

    /// Entrywise product with the mask (zero outside).
    pub fn masked(&self, mask: &BandMask) -> Result<Self> {
        check_dim(self.k(), mask.k())?;
        let k = self.k();
        let mut out = self.clone();
        for j in 0..k {
            for l in 0..k {
                if !mask.includes(j, l) {
                    out.entries[(j, l)] = T::zero();
                }
            }
        }
        Ok(out)
    }

    /// Eigenvalues in nonincreasing order with matching eigenvectors as columns.
    pub fn eigen_desc(&self) -> (DVector<T>, DMatrix<T>) {
        sym_eigen_desc(&self.entries)
    }

    /// Singular values in nonincreasing order.
    pub fn singular_values(&self) -> Vec<T> {
        let mut s: Vec<T> = self.entries.clone().singular_values().iter().copied().collect();
        s.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
        s
    }

    /// Number of singular values above `rel_tol * sigma_1`.
    pub fn numerical_rank(&self, rel_tol: T) -> usize {
        let s = self.singular_values();
        match s.first() {
            Some(&top) if top > T::zero() => s.iter().filter(|&&x| x > rel_tol * top).count(),
            _ => 0,
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.entries
            .iter()
            .zip(other.entries.iter())
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()))
    }
}

/// Symmetric eigendecomposition sorted by nonincreasing eigenvalue.
pub fn sym_eigen_desc<T: Real>(m: &DMatrix<T>) -> (DVector<T>, DMatrix<T>) {
    let k = m.nrows();
    if k == 0 {
        return (DVector::zeros(0), DMatrix::zeros(0, 0));
    }
    let eig = m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values = DVector::from_iterator(k, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(k, k);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// `K x i` factor whose Gram matrix `gamma gamma^T` is the candidate covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct LowRankFactor<T: Real> {
    gamma: DMatrix<T>,
}

impl<T: Real> LowRankFactor<T> {
    pub fn new(gamma: DMatrix<T>) -> Self {
        LowRankFactor { gamma }
    }

    pub fn zeros(k: usize, rank: usize) -> Self {
        LowRankFactor { gamma: DMatrix::zeros(k, rank) }
    }

    pub fn k(&self) -> usize {
        self.gamma.nrows()
    }

    pub fn rank(&self) -> usize {
        self.gamma.ncols()
    }

    pub fn gamma(&self) -> &DMatrix<T> {
        &self.gamma
    }

    pub fn into_gamma(self) -> DMatrix<T> {
        self.gamma
    }

    /// `gamma gamma^T`, exactly symmetric.
    pub fn gram(&self) -> SymMatrix<T> {
        SymMatrix::from_dmatrix_symmetrized(&self.gamma * self.gamma.transpose())
    }

    /// Appends a column.
    pub fn augmented(&self, column: &DVector<T>) -> Self {
        let k = self.k();
        let r = self.rank();
        let mut g = self.gamma.clone().resize_horizontally(r + 1, T::zero());
        assert_eq!(column.len(), k);
        g.set_column(r, column);
        LowRankFactor { gamma: g }
    }
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        Err(Error::DimensionMismatch { expected, got })
    } else {
        Ok(())
    }
}

/// `100 * ||estimate - truth||_F / ||truth||_F`.
pub fn relative_error<T: Real>(estimate: &SymMatrix<T>, truth: &SymMatrix<T>) -> Result<T> {
    check_dim(truth.k(), estimate.k())?;
    let denom = truth.frobenius_norm();
    if denom <= T::zero() {
        return Err(Error::UndefinedRelativeError);
    }
    let diff = (estimate.as_dmatrix() - truth.as_dmatrix()).norm();
    Ok(T::of(100.0) * diff / denom)
}

/// `K^-2 * sum over masked pairs of (A - B)^2`.
pub fn masked_frobenius_sq<T: Real>(a: &SymMatrix<T>, b: &SymMatrix<T>, mask: &BandMask) -> Result<T> {
    check_dim(a.k(), b.k())?;
    check_dim(a.k(), mask.k())?;
    Ok(masked_sq_dense(a.as_dmatrix(), b.as_dmatrix(), mask))
}

pub(crate) fn masked_sq_dense<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>, mask: &BandMask) -> T {
    let k = a.nrows();
    let mut acc = T::zero();
    for l in 0..k {
        for j in 0..k {
            if mask.includes(j, l) {
                let d = a[(j, l)] - b[(j, l)];
                acc += d * d;
            }
        }
    }
    let kf = T::of_usize(k);
    acc / (kf * kf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::band_mask;
    use proptest::prelude::*;

    fn sym(k: usize, f: impl Fn(usize, usize) -> f64) -> SymMatrix<f64> {
        SymMatrix::from_fn(k, f)
    }

    #[test]
    fn relative_error_examples() {
        let t = sym(4, |j, l| 1.0 + (j * l) as f64);
        assert_eq!(relative_error(&t, &t).unwrap(), 0.0);
        assert!((relative_error(&SymMatrix::zeros(4), &t).unwrap() - 100.0).abs() < 1e-12);
        assert!((relative_error(&t.scaled(2.0), &t).unwrap() - 100.0).abs() < 1e-12);
        assert!(matches!(
            relative_error(&t, &SymMatrix::zeros(4)),
            Err(Error::UndefinedRelativeError)
        ));
        assert!(matches!(
            relative_error(&SymMatrix::zeros(3), &t),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn masked_frobenius_examples() {
        let a = sym(2, |_, _| 1.0);
        let z = SymMatrix::zeros(2);
        let full = BandMask::full(2);
        assert_eq!(masked_frobenius_sq(&a, &a, &full).unwrap(), 0.0);
        assert!((masked_frobenius_sq(&a, &z, &full).unwrap() - 1.0).abs() < 1e-15);

        let mask = band_mask(10, 0.5, false).unwrap();
        let off = sym(10, |j, l| if j.abs_diff(l) >= 4 { 3.0 } else { 0.0 });
        assert_eq!(masked_frobenius_sq(&off, &SymMatrix::zeros(10), &mask).unwrap(), 0.0);
        assert!(masked_frobenius_sq(&off, &SymMatrix::zeros(3), &mask).is_err());
    }

    #[test]
    fn generic_over_f32() {
        let a: SymMatrix<f32> = SymMatrix::from_fn(3, |j, l| (j + l) as f32);
        let re = relative_error(&a.scaled(1.5), &a).unwrap();
        assert!((re - 50.0).abs() < 1e-4);
    }

    #[test]
    fn eigen_sorted_descending() {
        let m = sym(3, |j, l| if j == l { [1.0, 5.0, 3.0][j] } else { 0.0 });
        let (vals, vecs) = m.eigen_desc();
        assert_eq!(vals.as_slice(), &[5.0, 3.0, 1.0]);
        assert!((vecs[(1, 0)].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gram_is_psd_and_symmetric() {
        let g = DMatrix::from_fn(6, 2, |j, c| ((j + 1) * (c + 2)) as f64 * 0.1 - 0.3);
        let gram = LowRankFactor::new(g).gram();
        assert!(SymMatrix::try_from_dmatrix(gram.as_dmatrix().clone()).is_ok());
        let (vals, _) = gram.eigen_desc();
        assert!(vals.iter().all(|&v| v >= -1e-10 * vals[0]));
        assert_eq!(gram.numerical_rank(1e-10), 2);
    }

    #[test]
    fn counts_must_be_symmetric() {
        let m = SymMatrix::<f64>::zeros(2);
        assert!(m.clone().with_counts(vec![1, 2, 2, 1]).is_ok());
        assert!(m.clone().with_counts(vec![1, 2, 3, 1]).is_err());
        assert!(m.with_counts(vec![1]).is_err());
    }

    proptest! {
        #[test]
        fn masked_sq_symmetric_nonnegative(seed in 0u64..1000, k in 2usize..12) {
            let f = |s: u64, j: usize, l: usize| (((s as usize + 7 * j * l + j + l) % 13) as f64) * 0.37 - 2.0;
            let a = sym(k, |j, l| f(seed, j, l));
            let b = sym(k, |j, l| f(seed + 1, j, l));
            let mask = BandMask::from_fn(k, |j, l| !(j + l + seed as usize).is_multiple_of(3));
            let ab = masked_frobenius_sq(&a, &b, &mask).unwrap();
            let ba = masked_frobenius_sq(&b, &a, &mask).unwrap();
            prop_assert!(ab >= 0.0);
            prop_assert!((ab - ba).abs() < 1e-10);
            let agree = (0..k).all(|j| (0..k).all(|l| !mask.includes(j, l) || a.get(j, l) == b.get(j, l)));
            prop_assert_eq!(ab == 0.0, agree);
        }

        #[test]
        fn relative_error_scale_covariant(c in prop_oneof![-50.0f64..-0.01, 0.01f64..50.0], seed in 0u64..100) {
            let t = sym(5, |j, l| ((seed as usize + j * 3 + l) % 7) as f64 + 1.0);
            let e = sym(5, |j, l| ((seed as usize + j + l * 5) % 11) as f64);
            let r1 = relative_error(&e, &t).unwrap();
            let r2 = relative_error(&e.scaled(c), &t.scaled(c)).unwrap();
            prop_assert!((r1 - r2).abs() < 1e-10 * r1.max(1.0));
        }
    }
}
