use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::analysis::quality_proxy;
use crate::error::{Error, Result};
use crate::models::{MixtureDensity, ModelOracle};
use crate::numerics::{average_ranks, mean, median};
use crate::tdc::HoleRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    /// Hole vectors decoded by the trained model.
    Hole,
    /// The nearest continuous successor of each hole, decoded by the trained model.
    Norm,
    /// Hole vectors decoded by the untrained model.
    Rand,
}

impl Category {
    pub const ALL: [Category; 3] = [Category::Hole, Category::Norm, Category::Rand];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategorySummary {
    pub category: Category,
    pub n: usize,
    pub median: f64,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

impl CategorySummary {
    /// Summary of a nonempty sample.
    pub fn from_samples(category: Category, xs: &[f64]) -> CategorySummary {
        CategorySummary {
            category,
            n: xs.len(),
            median: median(xs).unwrap_or(f64::NAN),
            mean: mean(xs).unwrap_or(f64::NAN),
            min: xs.iter().cloned().fold(f64::INFINITY, f64::min),
            max: xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

/// Two-sided Mann–Whitney rank-sum test of `a` against `b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankSumTest {
    pub a: Category,
    pub b: Category,
    /// U statistic of `a`.
    pub u: f64,
    /// Normal approximation with tie and continuity corrections.
    pub z: f64,
    pub p_value: f64,
    /// `p_value` times the number of comparisons, capped at 1.
    pub p_bonferroni: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VacancyResult {
    pub hole: Vec<f64>,
    pub norm: Vec<f64>,
    pub rand: Vec<f64>,
    /// Holes without a continuous successor, left out of every category.
    pub skipped: usize,
    pub summaries: Vec<CategorySummary>,
    pub tests: Vec<RankSumTest>,
}

impl VacancyResult {
    pub fn samples(&self, c: Category) -> &[f64] {
        match c {
            Category::Hole => &self.hole,
            Category::Norm => &self.norm,
            Category::Rand => &self.rand,
        }
    }

    pub fn summary(&self, c: Category) -> Option<&CategorySummary> {
        self.summaries.iter().find(|s| s.category == c)
    }

    pub fn test(&self, a: Category, b: Category) -> Option<&RankSumTest> {
        self.tests.iter().find(|t| (t.a, t.b) == (a, b))
    }
}

/// Returns `(U_a, z, p)`.
pub fn rank_sum_test(a: &[f64], b: &[f64]) -> Result<(f64, f64, f64)> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::TooFewValues { needed: 1, got: 0 });
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("rank-sum input"));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let n = na + nb;
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = average_ranks(&pooled);
    let rank_sum: f64 = ranks[..a.len()].iter().sum();
    let u = rank_sum - na * (na + 1.0) / 2.0;

    let mut sorted = pooled;
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let j = sorted[i..].iter().take_while(|&&v| v == sorted[i]).count();
        let t = j as f64;
        tie_term += t * t * t - t;
        i += j;
    }
    let var = na * nb / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if var <= 0.0 {
        return Ok((u, 0.0, 1.0));
    }
    let centred = u - na * nb / 2.0;
    let corrected = (centred.abs() - 0.5).max(0.0) * centred.signum();
    let z = corrected / var.sqrt();
    let normal = Normal::standard();
    let p = (2.0 * (1.0 - normal.cdf(z.abs()))).min(1.0);
    Ok((u, z, p))
}

/// Scores each hole three ways with the same quality function: the hole decoded by the
/// trained model (Hole), its continuous successor on the same path decoded by the
/// trained model (Norm), and the same hole vector decoded by the untrained model
/// (Rand). Holes without a successor are skipped and counted.
pub fn vacancy_study(
    trained: &dyn ModelOracle,
    untrained: &dyn ModelOracle,
    holes: &[HoleRecord],
    density: &MixtureDensity,
) -> Result<VacancyResult> {
    if holes.is_empty() {
        return Err(Error::EmptyData { needed: 1, got: 0 });
    }
    if trained.latent_dim() != untrained.latent_dim() {
        return Err(Error::DimensionMismatch { expected: trained.latent_dim(), got: untrained.latent_dim() });
    }
    let score = |model: &dyn ModelOracle, z: &[f64]| -> Result<f64> { Ok(quality_proxy(density, &model.decode(z)?)) };
    let (mut hole, mut norm, mut rand) = (Vec::new(), Vec::new(), Vec::new());
    let mut skipped = 0;
    for h in holes {
        let Some(neighbor) = &h.norm_neighbor else {
            skipped += 1;
            continue;
        };
        hole.push(score(trained, &h.z)?);
        norm.push(score(trained, neighbor)?);
        rand.push(score(untrained, &h.z)?);
    }
    if norm.is_empty() {
        return Err(Error::MissingNeighbor);
    }
    let summaries = vec![
        CategorySummary::from_samples(Category::Hole, &hole),
        CategorySummary::from_samples(Category::Norm, &norm),
        CategorySummary::from_samples(Category::Rand, &rand),
    ];
    let pairs = [(Category::Hole, Category::Norm), (Category::Hole, Category::Rand), (Category::Norm, Category::Rand)];
    let mut result = VacancyResult { hole, norm, rand, skipped, summaries, tests: Vec::new() };
    for (a, b) in pairs {
        let (u, z, p) = rank_sum_test(result.samples(a), result.samples(b))?;
        let p_bonferroni = (p * pairs.len() as f64).min(1.0);
        result.tests.push(RankSumTest { a, b, u, z, p_value: p, p_bonferroni });
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_sum_separated_samples() {
        // U = 0 and no ties: z = (0 − 12.5 + 0.5) / sqrt(25·11/12)
        let (u, z, p) = rank_sum_test(&[1.0, 2.0, 3.0, 4.0, 5.0], &[6.0, 7.0, 8.0, 9.0, 10.0]).unwrap();
        assert_eq!(u, 0.0);
        let expected_z = -12.0 / (25.0f64 * 11.0 / 12.0).sqrt();
        assert!((z - expected_z).abs() < 1e-12);
        assert!((p - 0.01219).abs() < 1e-4, "{p}");
    }

    #[test]
    fn rank_sum_identical_samples() {
        let (_, z, p) = rank_sum_test(&[1.0, 1.0, 1.0], &[1.0, 1.0]).unwrap();
        assert_eq!((z, p), (0.0, 1.0));
        let (u, _, p) = rank_sum_test(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(u, 4.5);
        assert_eq!(p, 1.0);
    }

    #[test]
    fn rank_sum_is_antisymmetric() {
        let a = [0.3, 1.2, 2.2, 2.2, 5.0, 0.1];
        let b = [2.2, 3.1, 4.4, 6.0];
        let (uab, zab, pab) = rank_sum_test(&a, &b).unwrap();
        let (uba, zba, pba) = rank_sum_test(&b, &a).unwrap();
        assert_eq!(uab + uba, 24.0);
        assert!((zab + zba).abs() < 1e-12);
        assert!((pab - pba).abs() < 1e-12);
    }
}
