use tdc_core::analysis::{fenced_spec, holes_per_path_histogram, HoleLayout};
use tdc_core::tdc::{
    read_holes_jsonl, read_report_json, read_trace_csv, run_tdc_traced, write_holes_jsonl, write_report_json,
    write_trace_csv,
};
use tdc_core::{PlantedSpec, RunConfig, RunStatus};

fn slab_run(seed: u64) -> (tdc_core::RunReport, Vec<tdc_core::tdc::TraceRow>) {
    let config = RunConfig { seed, max_paths: Some(5_000), ..RunConfig::new(32, 8, 30) };
    let layout = HoleLayout::Slabs { axis: 0, count: 4, width: 0.2 };
    let model = fenced_spec(&PlantedSpec { seed, ..Default::default() }, &config, &layout).unwrap().build().unwrap();
    run_tdc_traced(&config, &model).unwrap()
}

#[test]
fn files_round_trip() {
    let (report, trace) = slab_run(2);
    assert_eq!(report.status, RunStatus::Halted);
    let dir = tempfile::tempdir().unwrap();
    let (holes, trace_path, report_path) =
        (dir.path().join("holes.jsonl"), dir.path().join("trace.csv"), dir.path().join("report.json"));
    write_holes_jsonl(&holes, &report.holes).unwrap();
    write_trace_csv(&trace_path, &trace).unwrap();
    write_report_json(&report_path, &report).unwrap();
    assert_eq!(read_holes_jsonl(&holes).unwrap(), report.holes);
    assert_eq!(read_trace_csv(&trace_path).unwrap(), trace);
    assert_eq!(read_report_json(&report_path).unwrap(), report);
}

#[test]
fn trace_agrees_with_report() {
    let (report, trace) = slab_run(3);
    // one indicator per adjacent pair of samples
    assert_eq!(trace.len() + report.paths_traversed - report.short_paths, report.points_evaluated);
    let flagged = trace.iter().filter(|r| r.is_outlier).count();
    assert!(flagged >= report.holes.len());
    for h in &report.holes {
        let row = trace.iter().find(|r| r.path_id == h.path_id && r.point_index == h.point_index).unwrap();
        assert!(row.is_outlier);
        assert_eq!(row.indicator, h.indicator);
    }
    let hist = holes_per_path_histogram(&report);
    assert_eq!(hist.holes, report.holes.len());
    assert_eq!(hist.paths, report.paths_traversed);
}

#[test]
fn reruns_match_apart_from_meta() {
    let (a, _) = slab_run(4);
    let (b, _) = slab_run(4);
    assert_eq!(a.without_meta(), b.without_meta());
}
