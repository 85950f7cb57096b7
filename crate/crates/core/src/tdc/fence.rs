use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Matrix, SeededRng};

/// Relative width given to a degenerate fence side.
const DEGENERATE_WIDTH: f64 = 1e-3;

/// Axis-aligned search box in the reduced space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fence {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    /// Training rows whose reduced codes span the box.
    pub anchor_indices: Vec<usize>,
}

impl Fence {
    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn side(&self, axis: usize) -> f64 {
        self.hi[axis] - self.lo[axis]
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim() && p.iter().zip(&self.lo).zip(&self.hi).all(|((&x, &lo), &hi)| x >= lo && x <= hi)
    }

    /// Uniform point in the box.
    pub fn sample(&self, rng: &mut SeededRng) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(&lo, &hi)| rng.uniform_in(lo, hi)).collect()
    }
}

/// Bounding box of `d_r` distinct rows of `reduced`, chosen uniformly at random.
///
/// A side of zero width is widened symmetrically to `1e-3` times the data range on that
/// axis (or `1e-3` if the data are constant there).
pub fn build_fence(reduced: &Matrix, d_r: usize, rng: &mut SeededRng) -> Result<Fence> {
    let n = reduced.rows();
    if d_r == 0 || n < d_r {
        return Err(Error::TooFewPoints { needed: d_r.max(1), got: n });
    }
    let dim = reduced.cols();
    let anchors = rng.choose_distinct(n, d_r);
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for &i in &anchors {
        for (j, &v) in reduced.row(i).iter().enumerate() {
            lo[j] = lo[j].min(v);
            hi[j] = hi[j].max(v);
        }
    }
    for j in 0..dim {
        if hi[j] > lo[j] {
            continue;
        }
        let column = reduced.column(j);
        let range = column.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - column.iter().cloned().fold(f64::INFINITY, f64::min);
        let half = 0.5 * DEGENERATE_WIDTH * if range > 0.0 { range } else { 1.0 };
        lo[j] -= half;
        hi[j] += half;
    }
    Ok(Fence { lo, hi, anchor_indices: anchors })
}

/// `multiplier ×` the smallest posterior standard deviation over the training set.
pub fn interpolation_interval(stds: &Matrix, multiplier: f64) -> Result<f64> {
    if stds.as_slice().is_empty() {
        return Err(Error::EmptyData { needed: 1, got: 0 });
    }
    if stds.as_slice().iter().any(|&s| !(s > 0.0)) {
        return Err(Error::NonPositiveStd);
    }
    if !(multiplier > 0.0) {
        return Err(Error::InvalidConfig("interval multiplier must be positive".into()));
    }
    let min = stds.as_slice().iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(multiplier * min)
}
