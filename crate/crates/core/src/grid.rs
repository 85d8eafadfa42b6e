//! Evaluation grids on `[0, 1]`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Strictly increasing evaluation points in `[0, 1]`.
///
/// Grids built by [`Grid::regular`] or [`Grid::perturbed`] place the `j`-th
/// point inside the `j`-th cell `[(j-1)/K, j/K]` of the regular partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    points: Vec<f64>,
}

impl Grid {
    /// Validates an arbitrary strictly increasing point set.
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("grid needs at least one point"));
        }
        for (j, &t) in points.iter().enumerate() {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::invalid(format!("grid point {t} at index {j} outside [0, 1]")));
            }
            if j > 0 && points[j - 1] >= t {
                return Err(Error::invalid(format!("grid not strictly increasing at index {j}")));
            }
        }
        Ok(Grid { points })
    }

    /// Validates a perturbed regular grid: one point per cell of the K-partition.
    pub fn new_perturbed(points: Vec<f64>) -> Result<Self> {
        let grid = Grid::new(points)?;
        if !grid.is_perturbed_regular() {
            return Err(Error::invalid("grid points do not sit one per regular cell"));
        }
        Ok(grid)
    }

    /// Cell midpoints `(j - 1/2) / K`.
    pub fn regular(k: usize) -> Self {
        assert!(k >= 1, "resolution must be positive");
        let kf = k as f64;
        Grid { points: (0..k).map(|j| (j as f64 + 0.5) / kf).collect() }
    }

    /// One uniform draw inside each cell of the regular K-partition.
    pub fn perturbed<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Self {
        assert!(k >= 1, "resolution must be positive");
        let kf = k as f64;
        let mut points: Vec<f64> = (0..k)
            .map(|j| (j as f64 + rng.random::<f64>()) / kf)
            .collect();
        // A draw can land on a shared cell boundary only with probability zero,
        // but rounding can produce ties; nudge to keep strict monotonicity.
        for j in 1..k {
            if points[j] <= points[j - 1] {
                points[j] = f64::min(points[j - 1] + f64::EPSILON, (j as f64 + 1.0) / kf);
            }
        }
        Grid { points }
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Number of points.
    pub fn resolution(&self) -> usize {
        self.points.len()
    }

    pub fn is_perturbed_regular(&self) -> bool {
        let kf = self.points.len() as f64;
        self.points
            .iter()
            .enumerate()
            .all(|(j, &t)| j as f64 / kf <= t && t <= (j as f64 + 1.0) / kf)
    }

    /// Index of the exact grid point `t`, if present.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        self.points.binary_search_by(|p| p.total_cmp(&t)).ok()
    }
}

/// Zero-based cell of the regular K-partition containing `t`; the last cell is closed.
pub fn cell_index(t: f64, k: usize) -> usize {
    let j = (t * k as f64).floor();
    if j < 0.0 {
        0
    } else {
        (j as usize).min(k - 1)
    }
}

/// Midpoints of the K cells; the canonical representative of an irregular design.
pub fn cell_midpoints(k: usize) -> Vec<f64> {
    Grid::regular(k).points
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn perturbed_points_sit_in_their_cells() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for k in [2, 15, 50, 200] {
            let g = Grid::perturbed(k, &mut rng);
            assert_eq!(g.resolution(), k);
            assert!(g.is_perturbed_regular());
            assert!(Grid::new(g.points().to_vec()).is_ok());
        }
    }

    #[test]
    fn rejects_bad_points() {
        assert!(Grid::new(vec![0.2, 0.1]).is_err());
        assert!(Grid::new(vec![0.2, 1.1]).is_err());
        assert!(Grid::new(vec![]).is_err());
        assert!(Grid::new_perturbed(vec![0.6, 0.7]).is_err());
        assert!(Grid::new_perturbed(vec![0.25, 0.75]).is_ok());
    }

    #[test]
    fn cells() {
        assert_eq!(cell_index(0.0, 10), 0);
        assert_eq!(cell_index(0.999, 10), 9);
        assert_eq!(cell_index(1.0, 10), 9);
        assert_eq!(cell_index(0.35, 10), 3);
        let g = Grid::regular(4);
        assert_eq!(g.points(), &[0.125, 0.375, 0.625, 0.875]);
        assert_eq!(g.index_of(0.625), Some(2));
        assert_eq!(g.index_of(0.6), None);
    }
}
