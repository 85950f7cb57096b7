//! Latent hole indicators.
//!
//! Two scores flag discontinuities along an interpolation path:
//!
//! * the Lipschitz ratio ([`lipschitz_indicator`]): sample-space distance between the
//!   decoded outputs of two neighbouring latent points over their latent distance;
//! * the aggregated-posterior score ([`aggregated_indicator`]): the mean Gaussian
//!   negative log-likelihood of a latent point under the posteriors of `M` training
//!   samples.
//!
//! For a diagonal Gaussian the NLL splits into half the generalized squared interpoint
//! distance plus a covariance-only constant ([`delta_term`]); [`nll_identity_residual`]
//! measures the residual of that identity and [`aggregated_indicator_expanded`]
//! evaluates the aggregated score through it.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::numerics::{euclidean, SeededRng};
use crate::tdc::outlier_fence;
use crate::transport::{SampleDistribution, SinkhornConfig};

const LN_2PI: f64 = 1.837_877_066_409_345_5;
const MIN_LATENT_GAP: f64 = 1e-12;

/// Gaussian with independent dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagGaussian {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl DiagGaussian {
    pub fn new(mean: Vec<f64>, var: Vec<f64>) -> Result<Self> {
        check_dim(mean.len(), var.len())?;
        if var.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::NonPositiveVariance);
        }
        if mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::NonFinite("gaussian mean"));
        }
        Ok(DiagGaussian { mean, var })
    }

    pub fn standard(d: usize) -> Self {
        DiagGaussian { mean: vec![0.0; d], var: vec![1.0; d] }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn std(&self) -> Vec<f64> {
        self.var.iter().map(|v| v.sqrt()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IndicatorKind {
    Lip,
    Agg,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndicatorValue {
    pub value: f64,
    pub kind: IndicatorKind,
    /// For `Lip`, the earlier point of the pair; for `Agg`, the scored point.
    pub index: usize,
}

/// Ratio of sample-space to latent-space distance, attributed to pair index `index`.
pub fn lipschitz_indicator(d_sample: f64, d_latent: f64, index: usize) -> Result<IndicatorValue> {
    if !(d_latent > MIN_LATENT_GAP) {
        return Err(Error::DegenerateLatentGap(d_latent));
    }
    if !(d_sample >= 0.0) || !d_sample.is_finite() {
        return Err(Error::NonFinite("sample distance"));
    }
    Ok(IndicatorValue { value: d_sample / d_latent, kind: IndicatorKind::Lip, index })
}

/// Negative log-likelihood of `x`, summed over independent one-dimensional densities.
pub fn gaussian_nll(x: &[f64], g: &DiagGaussian) -> Result<f64> {
    check_dim(g.dim(), x.len())?;
    Ok(x.iter()
        .zip(&g.mean)
        .zip(&g.var)
        .map(|((&xi, &mu), &v)| 0.5 * (xi - mu) * (xi - mu) / v + 0.5 * (LN_2PI + v.ln()))
        .sum())
}

/// `(x − μ)ᵀ K⁻¹ (x − μ)`.
pub fn generalized_squared_distance(x: &[f64], g: &DiagGaussian) -> Result<f64> {
    check_dim(g.dim(), x.len())?;
    Ok(x.iter().zip(&g.mean).zip(&g.var).map(|((&xi, &mu), &v)| (xi - mu) * (xi - mu) / v).sum())
}

/// `½ [log |K| + d · log 2π]`.
pub fn delta_term(g: &DiagGaussian) -> Result<f64> {
    if g.var.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::NonPositiveVariance);
    }
    let log_det: f64 = g.var.iter().map(|v| v.ln()).sum();
    Ok(0.5 * (log_det + g.dim() as f64 * LN_2PI))
}

/// `|NLL − (½ D_G + δ)|`.
pub fn nll_identity_residual(x: &[f64], g: &DiagGaussian) -> Result<f64> {
    let nll = gaussian_nll(x, g)?;
    let split = 0.5 * generalized_squared_distance(x, g)? + delta_term(g)?;
    Ok((nll - split).abs())
}

/// Mean NLL of `z` under each posterior.
pub fn aggregated_indicator(z: &[f64], posteriors: &[DiagGaussian], index: usize) -> Result<IndicatorValue> {
    if posteriors.is_empty() {
        return Err(Error::EmptyPosteriorSet);
    }
    let mut total = 0.0;
    for g in posteriors {
        total += gaussian_nll(z, g)?;
    }
    Ok(IndicatorValue { value: total / posteriors.len() as f64, kind: IndicatorKind::Agg, index })
}

/// The aggregated score evaluated as the mean of `½ D_G + δ` terms.
pub fn aggregated_indicator_expanded(z: &[f64], posteriors: &[DiagGaussian], index: usize) -> Result<IndicatorValue> {
    if posteriors.is_empty() {
        return Err(Error::EmptyPosteriorSet);
    }
    let mut total = 0.0;
    for g in posteriors {
        total += 0.5 * generalized_squared_distance(z, g)? + delta_term(g)?;
    }
    Ok(IndicatorValue { value: total / posteriors.len() as f64, kind: IndicatorKind::Agg, index })
}

/// Draws a random `(x, g)` pair with `d ≤ max_dim` for identity checks.
pub fn random_nll_case(rng: &mut SeededRng, max_dim: usize) -> (Vec<f64>, DiagGaussian) {
    let d = 1 + rng.below(max_dim);
    let mean: Vec<f64> = (0..d).map(|_| 3.0 * rng.normal()).collect();
    let var: Vec<f64> = (0..d).map(|_| (rng.uniform_in(-3.0, 2.0) * std::f64::consts::LN_10).exp()).collect();
    let x: Vec<f64> = mean.iter().zip(&var).map(|(m, v)| m + 2.0 * v.sqrt() * rng.normal()).collect();
    (x, DiagGaussian { mean, var })
}

/// Largest NLL identity residual over `trials` seeded random cases.
pub fn max_nll_identity_residual(trials: usize, seed: u64) -> Result<f64> {
    let mut rng = SeededRng::new(seed);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let (x, g) = random_nll_case(&mut rng, 32);
        worst = worst.max(nll_identity_residual(&x, &g)?);
    }
    Ok(worst)
}

/// Geometry of the false-negative fixture for the aggregated score.
///
/// Five scored points lie on a straight latent path at unit spacing, followed by one
/// continuous successor that closes the last Lipschitz pair. The decoder is affine
/// (sample gap 2 per step) except for a jump of ten sample gaps between the fourth
/// scored point and its successor. Four unit-variance posteriors sit on the corners of
/// a square; when the square is centred on the middle scored point the aggregated
/// scores are symmetric along the path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpFixture {
    pub with_jump: bool,
    pub symmetric_posteriors: bool,
}

impl Default for JumpFixture {
    fn default() -> Self {
        JumpFixture { with_jump: true, symmetric_posteriors: true }
    }
}

pub const FIXTURE_POINTS: usize = 5;
const FIXTURE_SPACING: f64 = 1.0;
const FIXTURE_SAMPLE_GAP: f64 = 2.0;
const FIXTURE_JUMP: f64 = 10.0 * FIXTURE_SAMPLE_GAP;

#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorComparison {
    pub lip: Vec<f64>,
    pub agg: Vec<f64>,
    pub lip_flags: Vec<usize>,
    pub agg_flags: Vec<usize>,
}

impl JumpFixture {
    pub fn latent_points(&self) -> Vec<Vec<f64>> {
        (0..=FIXTURE_POINTS).map(|t| vec![t as f64 * FIXTURE_SPACING, 0.0]).collect()
    }

    pub fn decoded(&self) -> Vec<f64> {
        (0..=FIXTURE_POINTS)
            .map(|t| {
                let base = t as f64 * FIXTURE_SAMPLE_GAP;
                if self.with_jump && t == FIXTURE_POINTS {
                    base + FIXTURE_JUMP
                } else {
                    base
                }
            })
            .collect()
    }

    pub fn posteriors(&self) -> Vec<DiagGaussian> {
        let centre = if self.symmetric_posteriors { 2.0 } else { 1.5 };
        [(-1.0, 1.0), (-1.0, -1.0), (1.0, 1.0), (1.0, -1.0)]
            .iter()
            .map(|&(dx, dy)| DiagGaussian { mean: vec![centre + dx, dy], var: vec![1.0, 1.0] })
            .collect()
    }

    pub fn evaluate(&self) -> Result<IndicatorComparison> {
        let z = self.latent_points();
        let outputs = self.decoded();
        let posteriors = self.posteriors();
        let sinkhorn = SinkhornConfig::default();
        let mut lip = Vec::with_capacity(FIXTURE_POINTS);
        let mut agg = Vec::with_capacity(FIXTURE_POINTS);
        for i in 0..FIXTURE_POINTS {
            let a = SampleDistribution::point(&[outputs[i]])?;
            let b = SampleDistribution::point(&[outputs[i + 1]])?;
            let d_sample = sinkhorn.distance(&a, &b)?;
            lip.push(lipschitz_indicator(d_sample, euclidean(&z[i], &z[i + 1]), i)?.value);
            agg.push(aggregated_indicator(&z[i], &posteriors, i)?.value);
        }
        let flags = |series: &[f64]| -> Result<Vec<usize>> {
            let bound = outlier_fence(series, 1.5)?;
            Ok(series.iter().enumerate().filter(|(_, &v)| v > bound).map(|(i, _)| i).collect())
        };
        Ok(IndicatorComparison { lip_flags: flags(&lip)?, agg_flags: flags(&agg)?, lip, agg })
    }
}

/// Both indicator series and their outlier flags on the default fixture.
pub fn jump_scenario() -> Result<IndicatorComparison> {
    JumpFixture::default().evaluate()
}

/// Distance used when chaining the aggregated bound through a neighbour.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainMetric {
    /// `sqrt(D_G)`, a metric under each posterior's covariance.
    Mahalanobis,
    /// `D_G` itself; not a metric, kept to show why the root is needed.
    SquaredMahalanobis,
}

impl ChainMetric {
    fn dist(self, a: &[f64], b: &[f64], var: &[f64]) -> f64 {
        let sq: f64 = a.iter().zip(b).zip(var).map(|((x, y), v)| (x - y) * (x - y) / v).sum();
        match self {
            ChainMetric::Mahalanobis => sq.sqrt(),
            ChainMetric::SquaredMahalanobis => sq,
        }
    }

    /// Mean over posteriors of `½ dist(z, μ_t) + δ_t`.
    fn aggregate(self, z: &[f64], posteriors: &[DiagGaussian]) -> f64 {
        posteriors.iter().map(|g| 0.5 * self.dist(z, &g.mean, &g.var) + delta_term(g).unwrap_or(f64::NAN)).sum::<f64>()
            / posteriors.len() as f64
    }

    /// Mean over posteriors of `½ dist(a, b)`: the sample-space distance of the pair.
    fn pair(self, a: &[f64], b: &[f64], posteriors: &[DiagGaussian]) -> f64 {
        posteriors.iter().map(|g| 0.5 * self.dist(a, b, &g.var)).sum::<f64>() / posteriors.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ContainmentReport {
    pub fixtures: usize,
    /// Fixtures whose first point passed the Lipschitz bound.
    pub lip_passes: usize,
    /// Of those, fixtures whose first point nevertheless exceeded the aggregated bound.
    pub violations: usize,
}

/// Randomized check that passing the Lipschitz bound next to a continuous neighbour
/// implies passing the aggregated bound.
///
/// Each fixture draws posteriors, a neighbour `z₊`, a nearby point `z`, and a Lipschitz
/// bound `λ_LIP` around the pair's actual ratio. The aggregated bound is set so the
/// neighbour clears the smaller bound `λ_AGG − λ_LIP · |z − z₊|`.
pub fn containment_check(fixtures: usize, seed: u64, metric: ChainMetric) -> ContainmentReport {
    let mut rng = SeededRng::new(seed);
    let mut report = ContainmentReport { fixtures, ..Default::default() };
    for _ in 0..fixtures {
        let d = 1 + rng.below(8);
        let m = 1 + rng.below(6);
        let posteriors: Vec<DiagGaussian> = (0..m)
            .map(|_| DiagGaussian { mean: rng.normals(d), var: (0..d).map(|_| rng.uniform_in(0.2, 2.0)).collect() })
            .collect();
        let neighbour = rng.normals(d);
        let step_scale = rng.uniform_in(0.01, 0.5);
        let z: Vec<f64> = neighbour.iter().map(|v| v + step_scale * rng.normal()).collect();
        let d_latent = euclidean(&z, &neighbour);
        if d_latent <= MIN_LATENT_GAP {
            continue;
        }
        let ratio = metric.pair(&z, &neighbour, &posteriors) / d_latent;
        let lambda_lip = ratio * rng.uniform_in(0.5, 1.5);
        let lambda_agg = metric.aggregate(&neighbour, &posteriors) + lambda_lip * d_latent + rng.uniform_in(1e-3, 1.0);
        if ratio < lambda_lip {
            report.lip_passes += 1;
            if metric.aggregate(&z, &posteriors) >= lambda_agg {
                report.violations += 1;
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use statrs::distribution::{Continuous, Normal};

    const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;

    #[test]
    fn lipschitz_examples() {
        assert_eq!(lipschitz_indicator(5.0, 2.0, 0).unwrap().value, 2.5);
        assert_eq!(lipschitz_indicator(0.0, 2.0, 0).unwrap().value, 0.0);
        assert!(matches!(lipschitz_indicator(1.0, 0.0, 0), Err(Error::DegenerateLatentGap(_))));
    }

    #[test]
    fn nll_closed_forms() {
        let g = DiagGaussian::standard(1);
        assert!((gaussian_nll(&[0.0], &g).unwrap() - HALF_LN_2PI).abs() < 1e-15);
        let g = DiagGaussian::new(vec![1.0], vec![1.0]).unwrap();
        assert!((gaussian_nll(&[3.0], &g).unwrap() - (2.0 + HALF_LN_2PI)).abs() < 1e-14);
        assert!(gaussian_nll(&[1.0, 2.0], &g).is_err());
    }

    #[test]
    fn nll_matches_density_product() {
        let mut rng = SeededRng::new(17);
        for _ in 0..20 {
            let g = DiagGaussian::new(rng.normals(5), (0..5).map(|_| rng.uniform_in(0.3, 3.0)).collect()).unwrap();
            let x = rng.normals(5);
            let density: f64 = (0..5).map(|j| Normal::new(g.mean[j], g.var[j].sqrt()).unwrap().pdf(x[j])).product();
            assert!((gaussian_nll(&x, &g).unwrap() + density.ln()).abs() < 1e-9);
        }
    }

    #[test]
    fn squared_distance_examples() {
        let g = DiagGaussian::new(vec![0.0, 0.0], vec![1.0, 4.0]).unwrap();
        assert_eq!(generalized_squared_distance(&[0.0, 0.0], &g).unwrap(), 0.0);
        assert_eq!(generalized_squared_distance(&[1.0, 2.0], &g).unwrap(), 2.0);
        let unit = DiagGaussian::new(vec![1.0, -2.0, 0.5], vec![1.0; 3]).unwrap();
        let x = [0.3, 0.7, -1.1];
        let sq: f64 = x.iter().zip(&unit.mean).map(|(a, b)| (a - b) * (a - b)).sum();
        assert!((generalized_squared_distance(&x, &unit).unwrap() - sq).abs() < 1e-12);
    }

    #[test]
    fn delta_examples() {
        assert!((delta_term(&DiagGaussian::standard(1)).unwrap() - HALF_LN_2PI).abs() < 1e-15);
        assert!((delta_term(&DiagGaussian::standard(2)).unwrap() - 2.0 * HALF_LN_2PI).abs() < 1e-15);
        let bad = DiagGaussian { mean: vec![0.0], var: vec![0.0] };
        assert!(matches!(delta_term(&bad), Err(Error::NonPositiveVariance)));
        assert!(DiagGaussian::new(vec![0.0], vec![-1.0]).is_err());
        let mut rng = SeededRng::new(2);
        let (_, g) = random_nll_case(&mut rng, 10);
        assert!((gaussian_nll(&g.mean, &g).unwrap() - delta_term(&g).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn nll_identity_residuals() {
        let g = DiagGaussian::new(vec![1.0, 2.0], vec![0.5, 3.0]).unwrap();
        assert!(nll_identity_residual(&g.mean.clone(), &g).unwrap() < 1e-12);
        assert!(max_nll_identity_residual(1000, 99).unwrap() <= 1e-9);
        let tiny = DiagGaussian::new(vec![0.0; 16], vec![1e-8; 16]).unwrap();
        let x = vec![1e-4; 16];
        assert!(nll_identity_residual(&x, &tiny).unwrap() <= 1e-6);
    }

    #[test]
    fn aggregated_examples() {
        let one = [DiagGaussian::standard(1)];
        assert!((aggregated_indicator(&[0.0], &one, 0).unwrap().value - HALF_LN_2PI).abs() < 1e-15);
        assert!(matches!(aggregated_indicator(&[0.0], &[], 0), Err(Error::EmptyPosteriorSet)));

        let g = DiagGaussian::new(vec![1.0, -1.0], vec![0.5, 2.0]).unwrap();
        let same = vec![g.clone(); 3];
        let at_mean = aggregated_indicator(&g.mean, &same, 0).unwrap().value;
        let mut rng = SeededRng::new(3);
        for _ in 0..100 {
            let z: Vec<f64> = g.mean.iter().map(|m| m + 0.5 * rng.normal()).collect();
            assert!(aggregated_indicator(&z, &same, 0).unwrap().value >= at_mean);
        }
    }

    #[test]
    fn aggregated_routes_agree() {
        let mut rng = SeededRng::new(55);
        for _ in 0..1000 {
            let d = 1 + rng.below(32);
            let m = 1 + rng.below(8);
            let posts: Vec<DiagGaussian> = (0..m)
                .map(|_| DiagGaussian {
                    mean: rng.normals(d),
                    var: (0..d).map(|_| rng.uniform_in(0.05, 4.0)).collect(),
                })
                .collect();
            let z = rng.normals(d);
            let a = aggregated_indicator(&z, &posts, 0).unwrap().value;
            let b = aggregated_indicator_expanded(&z, &posts, 0).unwrap().value;
            assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn jump_fixture_default() {
        let r = jump_scenario().unwrap();
        assert_eq!(r.lip_flags, vec![4]);
        assert!(r.agg_flags.is_empty());
        assert_eq!(r.lip.len(), FIXTURE_POINTS);
    }

    #[test]
    fn jump_fixture_variants() {
        let smooth = JumpFixture { with_jump: false, symmetric_posteriors: true }.evaluate().unwrap();
        assert!(smooth.lip_flags.is_empty() && smooth.agg_flags.is_empty());
        let skewed = JumpFixture { with_jump: true, symmetric_posteriors: false }.evaluate().unwrap();
        assert!(!skewed.agg_flags.is_empty());
        assert_eq!(skewed.lip_flags, vec![4]);
    }

    #[test]
    fn containment_holds_for_metric_chain() {
        let r = containment_check(2000, 1, ChainMetric::Mahalanobis);
        assert_eq!(r.violations, 0);
        assert!(r.lip_passes > 500);
    }

    #[test]
    fn squared_chain_breaks_containment() {
        let r = containment_check(2000, 1, ChainMetric::SquaredMahalanobis);
        assert!(r.violations > 0);
    }

    proptest! {
        #[test]
        fn lipschitz_homogeneous(d in 0.0f64..1e3, gap in 1e-6f64..1e3, alpha in 0.0f64..100.0) {
            let base = lipschitz_indicator(d, gap, 0).unwrap().value;
            let scaled = lipschitz_indicator(alpha * d, gap, 0).unwrap().value;
            prop_assert!((scaled - alpha * base).abs() <= 1e-12 * scaled.abs().max(1.0));
        }

        #[test]
        fn aggregated_permutation_invariant(seed in 0u64..1000) {
            let mut rng = SeededRng::new(seed);
            let mut posts: Vec<DiagGaussian> = (0..5)
                .map(|_| DiagGaussian { mean: rng.normals(3), var: (0..3).map(|_| rng.uniform_in(0.1, 2.0)).collect() })
                .collect();
            let z = rng.normals(3);
            let a = aggregated_indicator(&z, &posts, 0).unwrap().value;
            posts.reverse();
            rng.shuffle(&mut posts);
            let b = aggregated_indicator(&z, &posts, 0).unwrap().value;
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }

        #[test]
        fn nll_minimized_at_mean(seed in 0u64..1000) {
            let mut rng = SeededRng::new(seed);
            let (_, g) = random_nll_case(&mut rng, 6);
            let at_mean = gaussian_nll(&g.mean, &g).unwrap();
            for _ in 0..20 {
                let x: Vec<f64> = g.mean.iter().zip(&g.var).map(|(m, v)| m + v.sqrt() * rng.normal()).collect();
                prop_assert!(gaussian_nll(&x, &g).unwrap() >= at_mean);
            }
        }
    }
}
