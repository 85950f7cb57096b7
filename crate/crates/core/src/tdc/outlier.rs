use crate::error::Result;
use crate::numerics::quartiles;

/// `Q3 + k·(Q3 − Q1)` over `pool`. Values strictly above the bound are outliers.
pub fn outlier_fence(pool: &[f64], iqr_k: f64) -> Result<f64> {
    let (q1, q3) = quartiles(pool)?;
    Ok(q3 + iqr_k * (q3 - q1))
}

/// Like [`outlier_fence`], but the spread never drops below `min_relative_spread · |Q3|`.
///
/// A nearly constant pool (an affine decoder sampled at a fixed step) has an IQR made
/// of rounding noise; the floor keeps that noise from being classified.
pub fn outlier_fence_floored(pool: &[f64], iqr_k: f64, min_relative_spread: f64) -> Result<f64> {
    let (q1, q3) = quartiles(pool)?;
    let spread = (q3 - q1).max(min_relative_spread * q3.abs());
    Ok(q3 + iqr_k * spread)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    #[test]
    fn fence_examples() {
        let pool = [1.0, 2.0, 3.0, 4.0, 100.0];
        let bound = outlier_fence(&pool, 1.5).unwrap();
        assert_eq!(bound, 7.0);
        assert_eq!(pool.iter().filter(|&&v| v > bound).count(), 1);

        let flat = [2.5; 10];
        let bound = outlier_fence(&flat, 1.5).unwrap();
        assert_eq!(bound, 2.5);
        assert!(flat.iter().all(|&v| !(v > bound)));

        assert_eq!(outlier_fence(&pool, 0.0).unwrap(), 4.0);
        assert!(matches!(outlier_fence(&[1.0, 2.0, 3.0], 1.5), Err(Error::TooFewValues { .. })));
    }

    #[test]
    fn floor_only_matters_for_flat_pools() {
        let pool = [1.0, 2.0, 3.0, 4.0, 100.0];
        assert_eq!(outlier_fence_floored(&pool, 1.5, 1e-6).unwrap(), 7.0);
        let noisy = [1.0, 1.0 + 1e-15, 1.0 - 1e-15, 1.0, 1.0 + 2e-15];
        let bound = outlier_fence_floored(&noisy, 1.5, 1e-6).unwrap();
        assert!(noisy.iter().all(|&v| v < bound));
    }
}
