use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::{Category, CategorySummary, StudyResult, VacancyResult};
use crate::error::{Error, Result};
use crate::tdc::RunReport;

/// Number of traversed paths holding each hole count. Only counts that occur are listed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolesPerPath {
    pub bins: BTreeMap<usize, usize>,
    pub paths: usize,
    pub holes: usize,
}

impl HolesPerPath {
    pub fn from_counts(counts: &[usize]) -> HolesPerPath {
        let mut bins = BTreeMap::new();
        for &c in counts {
            *bins.entry(c).or_insert(0) += 1;
        }
        HolesPerPath { bins, paths: counts.len(), holes: counts.iter().sum() }
    }

    /// Mean holes per traversed path.
    pub fn mean(&self) -> f64 {
        if self.paths == 0 {
            0.0
        } else {
            self.holes as f64 / self.paths as f64
        }
    }

    /// Mean holes over the paths that hold at least one.
    pub fn mean_nonzero(&self) -> f64 {
        let hit = self.paths - self.bins.get(&0).copied().unwrap_or(0);
        if hit == 0 {
            0.0
        } else {
            self.holes as f64 / hit as f64
        }
    }
}

pub fn holes_per_path_histogram(report: &RunReport) -> HolesPerPath {
    HolesPerPath::from_counts(&report.hole_counts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterRow {
    pub setup_id: String,
    pub quality: f64,
    pub paths_to_halt: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramRow {
    pub setup_id: String,
    pub holes_on_path: usize,
    pub paths: usize,
}

/// One hole in reduced coordinates; `coords` holds the components separated by `;`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoleScatterRow {
    pub setup_id: String,
    pub hole_index: usize,
    pub coords: String,
}

/// Raw quality samples of a vacancy study, one row per value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VacancyRow {
    pub category: Category,
    pub index: usize,
    pub quality: f64,
}

pub fn scatter_rows(result: &StudyResult) -> Vec<ScatterRow> {
    result
        .rows
        .iter()
        .map(|r| ScatterRow { setup_id: r.setup_id.clone(), quality: r.quality, paths_to_halt: r.paths_to_halt })
        .collect()
}

pub fn histogram_rows(result: &StudyResult) -> Vec<HistogramRow> {
    result
        .rows
        .iter()
        .flat_map(|r| {
            HolesPerPath::from_counts(&r.hole_counts).bins.into_iter().map(move |(holes_on_path, paths)| HistogramRow {
                setup_id: r.setup_id.clone(),
                holes_on_path,
                paths,
            })
        })
        .collect()
}

pub fn hole_scatter_rows(result: &StudyResult) -> Vec<HoleScatterRow> {
    result
        .rows
        .iter()
        .flat_map(|r| {
            r.holes_reduced.iter().enumerate().map(move |(i, p)| HoleScatterRow {
                setup_id: r.setup_id.clone(),
                hole_index: i,
                coords: p.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";"),
            })
        })
        .collect()
}

pub fn parse_coords(coords: &str) -> Result<Vec<f64>> {
    coords
        .split(';')
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|e| Error::InvalidConfig(format!("bad coordinate {s:?}: {e}"))))
        .collect()
}

fn vacancy_rows(result: &VacancyResult) -> Vec<VacancyRow> {
    Category::ALL
        .iter()
        .flat_map(|&c| {
            result.samples(c).iter().enumerate().map(move |(index, &quality)| VacancyRow {
                category: c,
                index,
                quality,
            })
        })
        .collect()
}

pub fn write_csv<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    if rows.is_empty() {
        w.write_record(header)?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<Vec<T>, _>>()?)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Output of either study, as written to `study.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StudyOutput {
    Density(StudyResult),
    Vacancy(VacancyResult),
}

pub const SCATTER_HEADER: [&str; 3] = ["setup_id", "quality", "paths_to_halt"];
pub const HISTOGRAM_HEADER: [&str; 3] = ["setup_id", "holes_on_path", "paths"];
pub const HOLE_SCATTER_HEADER: [&str; 3] = ["setup_id", "hole_index", "coords"];
pub const VACANCY_HEADER: [&str; 6] = ["category", "n", "median", "mean", "min", "max"];
pub const VACANCY_SAMPLES_HEADER: [&str; 3] = ["category", "index", "quality"];

/// Writes `study.json` plus the CSV files for external plotting into `dir`, returning the
/// paths written.
///
/// A density study yields `scatter.csv`, `histogram.csv` and `holes_scatter.csv`; a
/// vacancy study yields `vacancy.csv` (per-category summary) and
/// `vacancy_samples.csv`.
pub fn emit_plot_data(output: &StudyOutput, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = vec![dir.join("study.json")];
    write_json(&written[0], output)?;
    match output {
        StudyOutput::Density(result) => {
            let files = [dir.join("scatter.csv"), dir.join("histogram.csv"), dir.join("holes_scatter.csv")];
            write_csv(&files[0], &SCATTER_HEADER, &scatter_rows(result))?;
            write_csv(&files[1], &HISTOGRAM_HEADER, &histogram_rows(result))?;
            write_csv(&files[2], &HOLE_SCATTER_HEADER, &hole_scatter_rows(result))?;
            written.extend(files);
        }
        StudyOutput::Vacancy(result) => {
            let files = [dir.join("vacancy.csv"), dir.join("vacancy_samples.csv")];
            write_csv(&files[0], &VACANCY_HEADER, &result.summaries)?;
            write_csv(&files[1], &VACANCY_SAMPLES_HEADER, &vacancy_rows(result))?;
            written.extend(files);
        }
    }
    Ok(written)
}

pub fn read_vacancy_summary(path: &Path) -> Result<Vec<CategorySummary>> {
    read_csv(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{RankSumTest, StudyRow};
    use crate::tdc::RunStatus;

    fn row(id: &str, q: f64, p: usize, counts: Vec<usize>) -> StudyRow {
        StudyRow {
            setup_id: id.into(),
            quality: q,
            paths_to_halt: p,
            status: RunStatus::Halted,
            holes_found: counts.iter().sum(),
            hole_counts: counts,
            holes_reduced: vec![vec![0.1, -2.5e-7, 1.0 / 3.0]],
        }
    }

    fn study() -> StudyResult {
        StudyResult::from_rows(vec![
            row("a", 1.0, 30, vec![0, 2, 2]),
            row("b", 4.0, 20, vec![4, 0]),
            row("c", 16.0, 10, vec![3]),
        ])
        .unwrap()
    }

    #[test]
    fn histogram_examples() {
        let h = HolesPerPath::from_counts(&[3]);
        assert_eq!(h.bins, BTreeMap::from([(3, 1)]));
        let h = HolesPerPath::from_counts(&[0, 0, 0]);
        assert_eq!(h.bins, BTreeMap::from([(0, 3)]));
        assert_eq!(h.mean(), 0.0);
        let h = HolesPerPath::from_counts(&[0, 2, 4]);
        assert_eq!(h.mean(), 2.0);
        assert_eq!(h.mean_nonzero(), 3.0);
    }

    #[test]
    fn density_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let s = study();
        let files = emit_plot_data(&StudyOutput::Density(s.clone()), dir.path()).unwrap();
        assert_eq!(files.len(), 4);
        let scatter: Vec<ScatterRow> = read_csv(&files[1]).unwrap();
        assert_eq!(scatter, scatter_rows(&s));
        assert_eq!(std::fs::read_to_string(&files[1]).unwrap().lines().count(), 4);
        let hist: Vec<HistogramRow> = read_csv(&files[2]).unwrap();
        assert_eq!(hist, histogram_rows(&s));
        let holes: Vec<HoleScatterRow> = read_csv(&files[3]).unwrap();
        assert_eq!(parse_coords(&holes[0].coords).unwrap(), s.rows[0].holes_reduced[0]);
        let json: StudyOutput = serde_json::from_str(&std::fs::read_to_string(&files[0]).unwrap()).unwrap();
        assert_eq!(json, StudyOutput::Density(s));
    }

    #[test]
    fn vacancy_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let v = VacancyResult {
            hole: vec![1.5, 2.25],
            norm: vec![0.1, 0.7],
            rand: vec![9.0, 1.0 / 7.0],
            skipped: 1,
            summaries: vec![
                CategorySummary::from_samples(Category::Hole, &[1.5, 2.25]),
                CategorySummary::from_samples(Category::Norm, &[0.1, 0.7]),
                CategorySummary::from_samples(Category::Rand, &[9.0, 1.0 / 7.0]),
            ],
            tests: vec![RankSumTest {
                a: Category::Hole,
                b: Category::Norm,
                u: 4.0,
                z: 1.0,
                p_value: 0.3,
                p_bonferroni: 0.9,
            }],
        };
        let files = emit_plot_data(&StudyOutput::Vacancy(v.clone()), dir.path()).unwrap();
        assert_eq!(read_vacancy_summary(&files[1]).unwrap(), v.summaries);
        let samples: Vec<VacancyRow> = read_csv(&files[2]).unwrap();
        assert_eq!(samples, vacancy_rows(&v));
    }

    #[test]
    fn unwritable_directory_is_an_io_error() {
        let file = tempfile::NamedTempFile::new().unwrap();
        let err = emit_plot_data(&StudyOutput::Density(study()), &file.path().join("sub")).unwrap_err();
        assert!(matches!(err, Error::Io(_)));
    }
}
