//! Principal component projection of encoded latent vectors.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::numerics::{dot, symmetric_eig, Matrix};

/// Eigenvalues below this fraction of the largest one count as zero.
const RANK_TOL: f64 = 1e-12;

/// Fitted projection from `d` latent dimensions onto the top `d_r` principal axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `d_r × d`, orthonormal rows.
    pub components: Matrix,
    pub explained_variance: Vec<f64>,
}

impl PcaModel {
    /// Fits on the rows of `data`, using the population covariance.
    ///
    /// Each component is sign-canonicalized so that its largest-magnitude entry is
    /// nonnegative.
    pub fn fit(data: &Matrix, d_r: usize) -> Result<PcaModel> {
        let (n, d) = data.shape();
        if d_r == 0 || d_r > d {
            return Err(Error::InvalidConfig(format!("d_r must lie in 1..={d}, got {d_r}")));
        }
        if n < d_r {
            return Err(Error::EmptyData { needed: d_r, got: n });
        }
        let mut mean = vec![0.0; d];
        for r in data.iter_rows() {
            for (m, &v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);

        let mut cov = Matrix::zeros(d, d);
        let mut centered = vec![0.0; d];
        for r in data.iter_rows() {
            for ((c, &v), &m) in centered.iter_mut().zip(r).zip(&mean) {
                *c = v - m;
            }
            for i in 0..d {
                let ci = centered[i];
                if ci == 0.0 {
                    continue;
                }
                let row = cov.row_mut(i);
                for j in i..d {
                    row[j] += ci * centered[j];
                }
            }
        }
        for i in 0..d {
            for j in i..d {
                let v = cov[(i, j)] / n as f64;
                cov[(i, j)] = v;
                cov[(j, i)] = v;
            }
        }

        let (values, vectors) = symmetric_eig(&cov)?;
        let top = values.first().copied().unwrap_or(0.0);
        let positive = values.iter().filter(|&&v| v > RANK_TOL * top && v > 0.0).count();
        if positive < d_r {
            return Err(Error::RankDeficient { requested: d_r, positive });
        }

        let mut components = Matrix::zeros(d_r, d);
        for k in 0..d_r {
            let mut col = vectors.column(k);
            let pivot = col.iter().copied().fold(0.0f64, |best, v| if v.abs() > best.abs() { v } else { best });
            if pivot < 0.0 {
                col.iter_mut().for_each(|v| *v = -*v);
            }
            components.row_mut(k).copy_from_slice(&col);
        }
        Ok(PcaModel { mean, components, explained_variance: values[..d_r].to_vec() })
    }

    pub fn latent_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn reduced_dim(&self) -> usize {
        self.components.rows()
    }

    /// `components · (z − mean)`.
    pub fn transform(&self, z: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.latent_dim(), z.len())?;
        let centered: Vec<f64> = z.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        Ok(self.components.iter_rows().map(|c| dot(c, &centered)).collect())
    }

    /// Minimum-norm preimage `componentsᵀ · z′ + mean`.
    pub fn inverse_transform(&self, reduced: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.reduced_dim(), reduced.len())?;
        let mut z = self.components.tmul_vec(reduced)?;
        z.iter_mut().zip(&self.mean).for_each(|(v, m)| *v += m);
        Ok(z)
    }

    pub fn transform_all(&self, data: &Matrix) -> Result<Matrix> {
        let rows = data.iter_rows().map(|r| self.transform(r)).collect::<Result<Vec<_>>>()?;
        let mut out = Matrix::zeros(data.rows(), self.reduced_dim());
        for (i, r) in rows.into_iter().enumerate() {
            out.row_mut(i).copy_from_slice(&r);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{euclidean, norm2, SeededRng};
    use proptest::prelude::*;

    fn gaussian_rows(n: usize, stds: &[f64], rng: &mut SeededRng) -> Matrix {
        let rows: Vec<Vec<f64>> = (0..n).map(|_| stds.iter().map(|s| s * rng.normal()).collect()).collect();
        Matrix::from_rows(&rows).unwrap()
    }

    #[test]
    fn collinear_rank_one() {
        let data = Matrix::from_rows(&[[1.0, 1.0], [2.0, 2.0], [3.0, 3.0]]).unwrap();
        let pca = PcaModel::fit(&data, 1).unwrap();
        let h = 1.0 / 2f64.sqrt();
        assert!((pca.components[(0, 0)] - h).abs() < 1e-12);
        assert!((pca.components[(0, 1)] - h).abs() < 1e-12);
        let total: f64 = 2.0 * (2.0 / 3.0);
        assert!((pca.explained_variance[0] / total - 1.0).abs() < 1e-12);

        let z = pca.transform(&[3.0, 3.0]).unwrap();
        assert!((z[0] - 2f64.sqrt()).abs() < 1e-12);
        let back = pca.inverse_transform(&[2f64.sqrt()]).unwrap();
        assert!(euclidean(&back, &[3.0, 3.0]) < 1e-12);
        assert!(matches!(PcaModel::fit(&data, 2), Err(Error::RankDeficient { positive: 1, .. })));
    }

    #[test]
    fn hand_projection() {
        let h = 1.0 / 2f64.sqrt();
        let pca = PcaModel {
            mean: vec![2.0, 2.0],
            components: Matrix::from_rows(&[[h, h]]).unwrap(),
            explained_variance: vec![1.0],
        };
        assert!((pca.transform(&[3.0, 3.0]).unwrap()[0] - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(pca.transform(&[2.0, 2.0]).unwrap(), vec![0.0]);
        assert_eq!(pca.inverse_transform(&[0.0]).unwrap(), vec![2.0, 2.0]);
        assert!(matches!(pca.transform(&[1.0]), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(pca.inverse_transform(&[1.0, 2.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn anisotropic_axes() {
        let mut rng = SeededRng::new(3);
        let data = gaussian_rows(4000, &[3.0, 1.0], &mut rng);
        let pca = PcaModel::fit(&data, 2).unwrap();
        // angular distance of each component from its axis
        let a0 = pca.components[(0, 0)].abs().clamp(-1.0, 1.0).acos();
        let a1 = pca.components[(1, 1)].abs().clamp(-1.0, 1.0).acos();
        assert!(a0 < 0.05 && a1 < 0.05, "{a0} {a1}");
        assert!(pca.components[(0, 0)] > 0.0 && pca.components[(1, 1)] > 0.0);
    }

    #[test]
    fn full_rank_round_trip_and_isometry() {
        let mut rng = SeededRng::new(9);
        let data = gaussian_rows(50, &[1.0, 2.0, 0.5, 1.5], &mut rng);
        let pca = PcaModel::fit(&data, 4).unwrap();
        for r in data.iter_rows() {
            let z = pca.transform(r).unwrap();
            let back = pca.inverse_transform(&z).unwrap();
            assert!(euclidean(&back, r) < 1e-9);
            let centered: Vec<f64> = r.iter().zip(&pca.mean).map(|(a, b)| a - b).collect();
            assert!((norm2(&z) - norm2(&centered)).abs() < 1e-9);
        }
        let gram = pca.components.matmul(&pca.components.transpose()).unwrap();
        assert!(gram.max_abs_diff(&Matrix::identity(4)) < 1e-7);
    }

    #[test]
    fn reconstruction_error_monotone_and_variance_bounded() {
        let mut rng = SeededRng::new(21);
        let data = gaussian_rows(200, &[3.0, 2.0, 1.5, 1.0, 0.5, 0.2], &mut rng);
        let total_var: f64 = {
            let (_, std) = crate::numerics::mean_and_std(&data).unwrap();
            std.iter().map(|s| s * s).sum()
        };
        let mut last = f64::INFINITY;
        for d_r in 1..=6 {
            let pca = PcaModel::fit(&data, d_r).unwrap();
            let err: f64 = data
                .iter_rows()
                .map(|r| euclidean(r, &pca.inverse_transform(&pca.transform(r).unwrap()).unwrap()))
                .sum();
            assert!(err <= last + 1e-9);
            last = err;
            assert!(pca.explained_variance.iter().sum::<f64>() <= total_var + 1e-7);
            assert!(pca.explained_variance.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn serde_round_trip() {
        let data = Matrix::from_rows(&[[1.0, 0.0], [0.0, 2.0], [-1.0, 1.0]]).unwrap();
        let pca = PcaModel::fit(&data, 2).unwrap();
        let json = serde_json::to_string(&pca).unwrap();
        assert_eq!(serde_json::from_str::<PcaModel>(&json).unwrap(), pca);
    }

    proptest! {
        #[test]
        fn left_inverse_on_reduced_space(seed in 0u64..500, a in -5.0f64..5.0, b in -5.0f64..5.0) {
            let mut rng = SeededRng::new(seed);
            let data = gaussian_rows(30, &[2.0, 1.0, 0.5], &mut rng);
            let pca = PcaModel::fit(&data, 2).unwrap();
            let z = pca.transform(&pca.inverse_transform(&[a, b]).unwrap()).unwrap();
            prop_assert!((z[0] - a).abs() < 1e-9 && (z[1] - b).abs() < 1e-9);
        }
    }
}
