//! Studies built on the search: hole density against model quality, decoding quality
//! inside and around holes, and holes-per-path distributions, plus CSV/JSON emission for
//! external plotting.
//!
//! Quality is measured by [`quality_proxy`], the negative log density of decoded outputs
//! under the known data density of the toy datasets; lower is better.

mod density;
mod layout;
mod plot;
mod vacancy;

pub use density::{density_correlation_study, quality_proxy, QualitySource, Setup, StudyResult, StudyRow};
pub use layout::{fenced_spec, HoleLayout, ReducedBounds};
pub use plot::{
    emit_plot_data, histogram_rows, hole_scatter_rows, holes_per_path_histogram, parse_coords, read_csv,
    read_vacancy_summary, scatter_rows, write_csv, HistogramRow, HoleScatterRow, HolesPerPath, ScatterRow, StudyOutput,
    VacancyRow, HISTOGRAM_HEADER, HOLE_SCATTER_HEADER, SCATTER_HEADER, VACANCY_HEADER, VACANCY_SAMPLES_HEADER,
};
pub use vacancy::{rank_sum_test, vacancy_study, Category, CategorySummary, RankSumTest, VacancyResult};
