use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Matrix, SeededRng};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Two-dimensional toy data with a density known in closed form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSpec {
    /// Equal-weight mixture of isotropic Gaussians.
    Mixture { means: Vec<Vec<f64>>, std: f64, n: usize, seed: u64 },
    /// Uniform angle, Gaussian radius around `radius`.
    Ring { radius: f64, std: f64, n: usize, seed: u64 },
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec::two_modes(1000, 0)
    }
}

impl DatasetSpec {
    /// Two well separated modes; the origin and the midpoint between the modes sit in
    /// low-density regions.
    pub fn two_modes(n: usize, seed: u64) -> Self {
        DatasetSpec::Mixture { means: vec![vec![4.5, 1.5], vec![1.5, 4.5]], std: 0.2, n, seed }
    }

    pub fn ring(n: usize, seed: u64) -> Self {
        DatasetSpec::Ring { radius: 3.0, std: 0.3, n, seed }
    }

    pub fn dim(&self) -> usize {
        match self {
            DatasetSpec::Mixture { means, .. } => means.first().map_or(0, |m| m.len()),
            DatasetSpec::Ring { .. } => 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (std, n) = match self {
            DatasetSpec::Mixture { means, std, n, .. } => {
                if means.is_empty() || means.iter().any(|m| m.len() != means[0].len() || m.is_empty()) {
                    return Err(Error::InvalidConfig("mixture means must be nonempty and equally sized".into()));
                }
                (*std, *n)
            }
            DatasetSpec::Ring { radius, std, n, .. } => {
                if !(*radius > 0.0) {
                    return Err(Error::InvalidConfig("ring radius must be positive".into()));
                }
                (*std, *n)
            }
        };
        if !(std > 0.0) {
            return Err(Error::InvalidConfig("dataset std must be positive".into()));
        }
        if n == 0 {
            return Err(Error::InvalidConfig("dataset size must be positive".into()));
        }
        Ok(())
    }

    pub fn generate(&self) -> Result<Matrix> {
        self.validate()?;
        match self {
            DatasetSpec::Mixture { means, std, n, seed } => {
                let mut rng = SeededRng::new(*seed);
                let k = means[0].len();
                let mut data = Matrix::zeros(*n, k);
                for i in 0..*n {
                    let m = &means[rng.below(means.len())];
                    for (j, v) in data.row_mut(i).iter_mut().enumerate() {
                        *v = m[j] + std * rng.normal();
                    }
                }
                Ok(data)
            }
            DatasetSpec::Ring { radius, std, n, seed } => {
                let mut rng = SeededRng::new(*seed);
                let mut data = Matrix::zeros(*n, 2);
                for i in 0..*n {
                    let theta = rng.uniform_in(0.0, std::f64::consts::TAU);
                    let r = radius + std * rng.normal();
                    data.row_mut(i).copy_from_slice(&[r * theta.cos(), r * theta.sin()]);
                }
                Ok(data)
            }
        }
    }

    pub fn density(&self) -> MixtureDensity {
        MixtureDensity { spec: self.clone() }
    }
}

/// Analytic data-generating density of a [`DatasetSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureDensity {
    spec: DatasetSpec,
}

impl MixtureDensity {
    pub fn log_density(&self, x: &[f64]) -> f64 {
        match &self.spec {
            DatasetSpec::Mixture { means, std, .. } => {
                let var = std * std;
                let terms: Vec<f64> = means
                    .iter()
                    .map(|m| {
                        let sq: f64 = x.iter().zip(m).map(|(a, b)| (a - b) * (a - b)).sum();
                        -0.5 * sq / var - 0.5 * m.len() as f64 * (LN_2PI + var.ln())
                    })
                    .collect();
                let top = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                top + terms.iter().map(|t| (t - top).exp()).sum::<f64>().ln() - (means.len() as f64).ln()
            }
            DatasetSpec::Ring { radius, std, .. } => {
                // polar density of (r, θ) divided by the Jacobian r
                let r = (x[0] * x[0] + x[1] * x[1]).sqrt().max(1e-300);
                let z = (r - radius) / std;
                -0.5 * z * z - 0.5 * LN_2PI - std.ln() - std::f64::consts::TAU.ln() - r.ln()
            }
        }
    }

    /// Negative log density; lower is better.
    pub fn nll(&self, x: &[f64]) -> f64 {
        -self.log_density(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mixture_generation_is_seeded() {
        let spec = DatasetSpec::two_modes(200, 4);
        let a = spec.generate().unwrap();
        assert_eq!(a, spec.generate().unwrap());
        assert_eq!(a.shape(), (200, 2));
        let (mean, _) = crate::numerics::mean_and_std(&a).unwrap();
        assert!((mean[0] - 3.0).abs() < 0.4 && (mean[1] - 3.0).abs() < 0.4);
    }

    #[test]
    fn mixture_density_matches_single_gaussian() {
        let spec = DatasetSpec::Mixture { means: vec![vec![0.0, 0.0]], std: 1.0, n: 1, seed: 0 };
        let d = spec.density();
        assert!((d.log_density(&[0.0, 0.0]) + LN_2PI).abs() < 1e-12);
        assert!((d.log_density(&[1.0, 1.0]) + LN_2PI + 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_modes_origin_is_unlikely() {
        let d = DatasetSpec::default().density();
        assert!(d.nll(&[0.0, 0.0]) > d.nll(&[3.0, 3.0]));
        assert!(d.nll(&[3.0, 3.0]) > d.nll(&[4.5, 1.5]));
    }

    #[test]
    fn ring_density_integrates_to_one() {
        let d = DatasetSpec::ring(10, 0).density();
        let h = 0.02;
        let mut total = 0.0;
        let mut x = -5.0;
        while x < 5.0 {
            let mut y = -5.0;
            while y < 5.0 {
                total += d.log_density(&[x + h / 2.0, y + h / 2.0]).exp() * h * h;
                y += h;
            }
            x += h;
        }
        assert!((total - 1.0).abs() < 1e-2, "{total}");
    }

    #[test]
    fn invalid_specs() {
        assert!(DatasetSpec::Mixture { means: vec![], std: 1.0, n: 5, seed: 0 }.generate().is_err());
        assert!(DatasetSpec::Ring { radius: 1.0, std: 0.0, n: 5, seed: 0 }.generate().is_err());
    }
}
