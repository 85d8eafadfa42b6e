//! Exact completion of a band by determinant propagation.
//!
//! A rank-`q` matrix has every `(q+1) x (q+1)` minor equal to zero. Walking
//! outward one diagonal at a time, each unknown entry is the only unknown in
//! some such minor, and the minor is affine in it: `a x + b = 0`.
//!
//! Any nonsingular `q x q` cofactor determines the entry. Exact fields take
//! the best-conditioned of a few cofactor layouts. In floating point a single
//! cofactor amplifies rounding at every diagonal, so floats instead project
//! through the whole known block between `j` and `l`, truncated to rank `q`:
//! `x = R[j, I] B_q⁺ R[I, l]` with `B = R[I, I]`, which equals the cofactor
//! solution whenever the matrix has rank `q` exactly. They fall back to
//! cofactors when that block is itself rank deficient.

use std::fmt::Debug;
use std::ops::Neg;

use nalgebra::{DMatrix, DVector};
use num_rational::Ratio;
use num_traits::{Num, ToPrimitive};

use crate::error::{Error, Result};
use crate::mask::BandMask;
use crate::matrix::SymMatrix;

/// Scalars the oracle can run on: floats, or exact rationals.
pub trait ExactField: Clone + Debug + PartialEq + Num + Neg<Output = Self> + Send + Sync + 'static {
    /// Size used to pick pivots and measure submatrices.
    fn magnitude(&self) -> f64;

    /// Whether the cofactor `a` is negligible against `scale`, the product of
    /// its row norms (Hadamard's bound on `|a|`).
    fn is_singular(a: &Self, scale: f64) -> bool;

    /// `uᵀ B⁺ v` with `B` truncated to its top `q` eigenpairs, or `None` to
    /// fall back to a single cofactor. Floats use this; exact fields don't.
    fn projected_entry(_b: &[Vec<Self>], _u: &[Self], _v: &[Self], _q: usize) -> Option<Self> {
        None
    }
}

fn projected_f64(b: &[Vec<f64>], u: &[f64], v: &[f64], q: usize, tol: f64) -> Option<f64> {
    let n = b.len();
    if n < q {
        return None;
    }
    let m = DMatrix::from_fn(n, n, |r, c| 0.5 * (b[r][c] + b[c][r]));
    let eig = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &c| eig.eigenvalues[c].abs().total_cmp(&eig.eigenvalues[a].abs()));
    let top = eig.eigenvalues[order[0]].abs();
    let last = eig.eigenvalues[order[q - 1]].abs();
    if !(last > tol * top) {
        return None;
    }
    let u = DVector::from_column_slice(u);
    let v = DVector::from_column_slice(v);
    let x = order[..q].iter().map(|&i| {
        let e = eig.eigenvectors.column(i);
        e.dot(&u) * e.dot(&v) / eig.eigenvalues[i]
    });
    Some(x.sum())
}

impl ExactField for f64 {
    fn magnitude(&self) -> f64 {
        self.abs()
    }

    fn is_singular(a: &Self, scale: f64) -> bool {
        !(a.abs() >= 1e-12 * scale) || scale == 0.0
    }

    fn projected_entry(b: &[Vec<Self>], u: &[Self], v: &[Self], q: usize) -> Option<Self> {
        projected_f64(b, u, v, q, 1e-12)
    }
}

impl ExactField for f32 {
    fn magnitude(&self) -> f64 {
        f64::from(self.abs())
    }

    fn is_singular(a: &Self, scale: f64) -> bool {
        !(f64::from(a.abs()) >= 1e-5 * scale) || scale == 0.0
    }

    fn projected_entry(b: &[Vec<Self>], u: &[Self], v: &[Self], q: usize) -> Option<Self> {
        let wide = |xs: &[f32]| xs.iter().map(|&x| f64::from(x)).collect::<Vec<_>>();
        let b: Vec<Vec<f64>> = b.iter().map(|r| wide(r)).collect();
        projected_f64(&b, &wide(u), &wide(v), q, 1e-5).map(|x| x as f32)
    }
}

macro_rules! rational_field {
    ($($int:ty),*) => {$(
        impl ExactField for Ratio<$int> {
            fn magnitude(&self) -> f64 {
                self.to_f64().map_or(f64::INFINITY, f64::abs)
            }

            fn is_singular(a: &Self, _scale: f64) -> bool {
                *a.numer() == 0
            }
        }
    )*};
}

rational_field!(i64, i128);

/// Determinant by Gaussian elimination with magnitude pivoting.
pub fn determinant<F: ExactField>(mut m: Vec<Vec<F>>) -> F {
    let n = m.len();
    let mut det = F::one();
    for c in 0..n {
        let p = (c..n)
            .max_by(|&a, &b| m[a][c].magnitude().total_cmp(&m[b][c].magnitude()))
            .expect("nonempty column");
        if m[p][c] == F::zero() {
            return F::zero();
        }
        if p != c {
            m.swap(p, c);
            det = -det;
        }
        let pivot = m[c][c].clone();
        det = det * pivot.clone();
        for r in c + 1..n {
            let factor = m[r][c].clone() / pivot.clone();
            if factor == F::zero() {
                continue;
            }
            for k in c..n {
                let v = m[c][k].clone() * factor.clone();
                m[r][k] = m[r][k].clone() - v;
            }
        }
    }
    det
}

/// Completes a rank-`q` matrix from its entries on a standard band.
///
/// Entries outside `mask` are ignored. Unknown `(j, l)` with `l > j` pairs row
/// `j` with `q` rows from `j+1..=j+s` and column `l` with `q` columns from
/// `l-s..l`, `s = l - j - 1`, picking the best-conditioned cofactor among a
/// few layouts. The band must be wider than `q`.
pub fn exact_band_completion<F: ExactField>(band: &SymMatrix<F>, mask: &BandMask, q: usize) -> Result<SymMatrix<F>> {
    let k = band.k();
    if mask.k() != k {
        return Err(Error::DimensionMismatch { expected: k, got: mask.k() });
    }
    if q == 0 || q > k {
        return Err(Error::InvalidRank { rank: q, k });
    }
    let width = standard_width(mask)?;
    if width <= q {
        return Err(Error::invalid(format!("band of width {width} is too narrow for rank {q}")));
    }

    let mut x: Vec<Vec<F>> = (0..k)
        .map(|j| (0..k).map(|l| if mask.includes(j, l) { band.get(j, l).clone() } else { F::zero() }).collect())
        .collect();

    for d in width..k {
        for j in 0..k - d {
            let l = j + d;
            let s = d - 1;
            let inner: Vec<Vec<F>> = (j + 1..l).map(|r| x[r][j + 1..l].to_vec()).collect();
            let u = x[j][j + 1..l].to_vec();
            let v: Vec<F> = (j + 1..l).map(|r| x[r][l].clone()).collect();
            if let Some(val) = F::projected_entry(&inner, &u, &v, q) {
                x[j][l] = val.clone();
                x[l][j] = val;
                continue;
            }
            let mut best: Option<(f64, F, Vec<Vec<F>>)> = None;
            for ro in layouts(q, s) {
                for co in layouts(q, s) {
                    let rows: Vec<usize> = std::iter::once(j).chain(ro.iter().map(|&o| j + 1 + o)).collect();
                    let cols: Vec<usize> = co.iter().map(|&o| l - s + o).chain(std::iter::once(l)).collect();
                    let mut sub: Vec<Vec<F>> =
                        rows.iter().map(|&r| cols.iter().map(|&c| x[r][c].clone()).collect()).collect();
                    sub[0][q] = F::zero();
                    let minor: Vec<Vec<F>> = sub[1..].iter().map(|row| row[..q].to_vec()).collect();
                    let mut a = determinant(minor);
                    if q % 2 == 1 {
                        a = -a;
                    }
                    let scale: f64 = sub[1..]
                        .iter()
                        .map(|row| row[..q].iter().map(|v| v.magnitude().powi(2)).sum::<f64>().sqrt())
                        .product();
                    if F::is_singular(&a, scale) {
                        continue;
                    }
                    let ratio = a.magnitude() / scale;
                    if best.as_ref().is_none_or(|(r, _, _)| ratio > *r) {
                        best = Some((ratio, a, sub));
                    }
                }
            }
            let Some((_, a, sub)) = best else {
                return Err(Error::SingularMinor { row: j + 1, col: l + 1 });
            };
            let b = determinant(sub);
            let v = -(b / a);
            x[j][l] = v.clone();
            x[l][j] = v;
        }
    }
    Ok(SymMatrix::from_fn(k, |j, l| x[j][l].clone()))
}

/// Candidate sets of `q` distinct offsets in `0..s`, `q <= s`: packed at
/// either end, and spread evenly.
fn layouts(q: usize, s: usize) -> Vec<Vec<usize>> {
    let spread = (0..q).map(|i| if q == 1 { (s - 1) / 2 } else { i * (s - 1) / (q - 1) }).collect();
    let mut out: Vec<Vec<usize>> = vec![(0..q).collect(), (s - q..s).collect(), spread];
    out.dedup();
    out
}

/// Band width `w` of a mask of the form `|j - l| < w` with the diagonal kept.
fn standard_width(mask: &BandMask) -> Result<usize> {
    let k = mask.k();
    let w = (0..k).find(|&d| !mask.includes(0, d)).unwrap_or(k);
    if w == 0 {
        return Err(Error::invalid("oracle needs the diagonal inside the mask"));
    }
    for j in 0..k {
        for l in 0..k {
            if mask.includes(j, l) != (j.abs_diff(l) < w) {
                return Err(Error::invalid("oracle needs a standard band mask"));
            }
        }
    }
    Ok(w)
}
