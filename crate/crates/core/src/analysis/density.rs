use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{MixtureDensity, ModelOracle};
use crate::numerics::{pearson, spearman};
use crate::tdc::{run_tdc, RunConfig, RunReport, RunStatus};
use crate::transport::SampleDistribution;

/// Mean negative log density of a decoded output under the data density, weighted by
/// the output's support weights. Lower is better.
pub fn quality_proxy(density: &MixtureDensity, output: &SampleDistribution) -> f64 {
    output.support.iter_rows().zip(&output.weights).map(|(x, w)| w * density.nll(x)).sum()
}

/// Where the quality value of a setup comes from.
#[derive(Clone, Copy)]
pub enum QualitySource<'a> {
    /// Mean [`quality_proxy`] of the decoded holes.
    Density(&'a MixtureDensity),
    /// A value known in advance, such as the number of planted holes.
    Fixed(f64),
}

pub struct Setup<'a> {
    pub id: String,
    pub model: &'a dyn ModelOracle,
    pub config: RunConfig,
    pub quality: QualitySource<'a>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub setup_id: String,
    pub quality: f64,
    /// Paths traversed until the halting hole; for an exhausted run, all paths traversed.
    pub paths_to_halt: usize,
    pub status: RunStatus,
    pub holes_found: usize,
    /// Holes on each traversed path.
    pub hole_counts: Vec<usize>,
    /// Reduced coordinates of every returned hole.
    pub holes_reduced: Vec<Vec<f64>>,
}

impl StudyRow {
    pub fn from_report(setup_id: impl Into<String>, quality: f64, report: &RunReport) -> StudyRow {
        StudyRow {
            setup_id: setup_id.into(),
            quality,
            paths_to_halt: report.paths_to_halt.unwrap_or(report.paths_traversed),
            status: report.status,
            holes_found: report.holes.len(),
            hole_counts: report.hole_counts.clone(),
            holes_reduced: report.holes.iter().map(|h| h.z_reduced.clone()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub rows: Vec<StudyRow>,
    /// Rank correlation between `quality` and `paths_to_halt`.
    pub spearman: f64,
    pub pearson: f64,
}

impl StudyResult {
    /// Correlates the rows; needs at least three.
    pub fn from_rows(rows: Vec<StudyRow>) -> Result<StudyResult> {
        if rows.len() < 3 {
            return Err(Error::InsufficientSetups { needed: 3, got: rows.len() });
        }
        let q: Vec<f64> = rows.iter().map(|r| r.quality).collect();
        let p: Vec<f64> = rows.iter().map(|r| r.paths_to_halt as f64).collect();
        let spearman = spearman(&q, &p)?;
        let pearson = pearson(&q, &p)?;
        Ok(StudyResult { rows, spearman, pearson })
    }
}

fn mean_hole_quality(density: &MixtureDensity, model: &dyn ModelOracle, report: &RunReport) -> Result<f64> {
    if report.holes.is_empty() {
        return Err(Error::DegenerateInput("setup produced no holes to score"));
    }
    let mut total = 0.0;
    for h in &report.holes {
        total += quality_proxy(density, &model.decode(&h.z)?);
    }
    Ok(total / report.holes.len() as f64)
}

/// Runs the search on every setup, in order, and correlates setup quality with the
/// number of paths needed to halt.
pub fn density_correlation_study(setups: &[Setup<'_>]) -> Result<StudyResult> {
    if setups.len() < 3 {
        return Err(Error::InsufficientSetups { needed: 3, got: setups.len() });
    }
    let mut rows = Vec::with_capacity(setups.len());
    for s in setups {
        let report = run_tdc(&s.config, s.model)?;
        let quality = match s.quality {
            QualitySource::Density(density) => mean_hole_quality(density, s.model, &report)?,
            QualitySource::Fixed(v) => v,
        };
        log::info!("setup {}: quality {quality:.4}, {} paths to halt", s.id, report.paths_to_halt.unwrap_or(0));
        rows.push(StudyRow::from_report(s.id.clone(), quality, &report));
    }
    StudyResult::from_rows(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::DatasetSpec;
    use crate::numerics::Matrix;

    #[test]
    fn proxy_is_weighted_mean() {
        let density = DatasetSpec::default().density();
        let a = [4.5, 1.5];
        let b = [0.0, 0.0];
        let dist = SampleDistribution::new(Matrix::from_rows(&[a, b]).unwrap(), vec![0.25, 0.75]).unwrap();
        let expected = 0.25 * density.nll(&a) + 0.75 * density.nll(&b);
        assert!((quality_proxy(&density, &dist) - expected).abs() < 1e-12);
    }

    #[test]
    fn too_few_rows() {
        assert!(matches!(StudyResult::from_rows(vec![]), Err(Error::InsufficientSetups { needed: 3, got: 0 })));
    }
}
