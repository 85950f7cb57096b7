use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tdc_core::analysis::{fenced_spec, read_csv, HoleLayout, ScatterRow};
use tdc_core::models::load_weights;
use tdc_core::tdc::{read_holes_jsonl, read_report_json};
use tdc_core::{PlantedSpec, RunConfig, RunStatus};

fn tdc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tdc")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

const SLABS: &str = r#"{"seed": 0, "layout": {"kind": "slabs", "axis": 0, "count": 4, "width": 0.2}}"#;

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn planted_scan_halts_with_requested_holes() {
    let dir = tempfile::tempdir().unwrap();
    let planted = write(dir.path(), "planted.json", SLABS);
    let out = dir.path().join("run");
    let o = tdc(&["scan", "--planted", &planted, "--out", out.to_str().unwrap(), "--d-r", "8", "--n-hole", "5"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let text = fs::read_to_string(out.join("holes.jsonl")).unwrap();
    assert_eq!(text.lines().count(), 5);
    let holes = read_holes_jsonl(&out.join("holes.jsonl")).unwrap();
    let report = read_report_json(&out.join("report.json")).unwrap();
    assert_eq!(report.status, RunStatus::Halted);
    assert_eq!(report.config.d, 32);
    assert_eq!(report.config.max_paths, Some(50));

    // every hole sits in (or within one sampling step of) a planted slab
    let config = RunConfig::new(32, 8, 5);
    let layout = HoleLayout::Slabs { axis: 0, count: 4, width: 0.2 };
    let model = fenced_spec(&PlantedSpec::default(), &config, &layout).unwrap().build().unwrap();
    assert!(holes.iter().all(|h| model.in_dilated_hole(&h.z, report.interval)));
    assert!(fs::read_to_string(out.join("trace.csv")).unwrap().starts_with("path_id,"));
}

#[test]
fn affine_scan_exhausts() {
    let dir = tempfile::tempdir().unwrap();
    let planted = write(dir.path(), "affine.json", r#"{"sinusoid_amplitude": 0.0}"#);
    let out = dir.path().join("run");
    let o = tdc(&["scan", "--planted", &planted, "--out", out.to_str().unwrap(), "--max-paths", "50", "--n-hole", "5"]);
    assert_eq!(code(&o), 3);
    assert_eq!(fs::read_to_string(out.join("holes.jsonl")).unwrap(), "");
    assert_eq!(read_report_json(&out.join("report.json")).unwrap().status, RunStatus::Exhausted);
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let planted = write(dir.path(), "planted.json", SLABS);
    let out = dir.path().join("run");
    let out = out.to_str().unwrap();
    let both = tdc(&["scan", "--planted", &planted, "--model", &planted, "--out", out]);
    assert_eq!(code(&both), 2);
    assert!(!both.stderr.is_empty());
    assert_eq!(code(&tdc(&["scan", "--out", out])), 2);
    assert_eq!(code(&tdc(&["scan", "--planted", &planted, "--out", out, "--d-r", "0"])), 2);
    let config = write(dir.path(), "config.json", r#"{"d": 16}"#);
    assert_eq!(code(&tdc(&["scan", "--planted", &planted, "--config", &config, "--out", out])), 2);
    assert_eq!(code(&tdc(&["train-toy", "--epochs", "0", "--out", out])), 2);
    assert_eq!(code(&tdc(&["study", "--kind", "other", "--out", out])), 2);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let planted = write(dir.path(), "planted.json", SLABS);
    let config = write(dir.path(), "config.json", r#"{"d_r": 8, "n_hole": 9, "seed": 4, "warmup_pool": 40}"#);
    let out = dir.path().join("run");
    let o = tdc(&["scan", "--planted", &planted, "--config", &config, "--out", out.to_str().unwrap(), "--n-hole", "3"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = read_report_json(&out.join("report.json")).unwrap();
    assert_eq!((report.config.n_hole, report.config.seed, report.config.warmup_pool), (3, 4, 40));
    assert_eq!(report.holes.len(), 3);
}

#[test]
fn thread_count_does_not_change_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let planted = write(dir.path(), "planted.json", SLABS);
    let mut files = Vec::new();
    for threads in ["1", "8"] {
        let out = dir.path().join(format!("run{threads}"));
        let o = tdc(&[
            "scan",
            "--planted",
            &planted,
            "--out",
            out.to_str().unwrap(),
            "--d-r",
            "8",
            "--n-hole",
            "60",
            "--threads",
            threads,
        ]);
        assert_eq!(code(&o), 0);
        files.push((fs::read(out.join("holes.jsonl")).unwrap(), fs::read(out.join("trace.csv")).unwrap()));
    }
    assert_eq!(files[0], files[1]);
}

#[test]
fn trained_weights_are_deterministic_and_scannable() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for path in [&a, &b] {
        let o = tdc(&["train-toy", "--epochs", "50", "--seed", "3", "--out", path.to_str().unwrap()]);
        assert_eq!(code(&o), 0);
        assert!(String::from_utf8_lossy(&o.stdout).contains("final ELBO"));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let (vae, dataset) = load_weights(&a).unwrap();
    assert_eq!(vae.dims().d, 8);
    assert!(dataset.is_some());

    let out = dir.path().join("run");
    let o = tdc(&["scan", "--model", a.to_str().unwrap(), "--out", out.to_str().unwrap(), "--n-hole", "5"]);
    assert!(matches!(code(&o), 0 | 3), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(read_report_json(&out.join("report.json")).unwrap().config.d, 8);
}

#[test]
fn verify_lemma_passes() {
    let o = tdc(&["verify-lemma", "--trials", "1000"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("max residual"));
}

#[test]
fn compare_indicators_emits_csv() {
    let o = tdc(&["compare-indicators", "--scenario", "straight-jump"]);
    assert_eq!(code(&o), 0);
    let alias = tdc(&["compare-indicators", "--scenario", "appendix-c"]);
    assert_eq!(alias.stdout, o.stdout);
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "index,lip,agg,lip_outlier,agg_outlier");
    assert_eq!(lines.len(), 6);
    let flags: Vec<(&str, &str)> = lines[1..]
        .iter()
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[3], f[4])
        })
        .collect();
    assert_eq!(
        flags,
        vec![("false", "false"), ("false", "false"), ("false", "false"), ("false", "false"), ("true", "false")]
    );
}

#[test]
fn density_study_trend() {
    let dir = tempfile::tempdir().unwrap();
    let o = tdc(&["study", "--kind", "density", "--repeats", "2", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows: Vec<ScatterRow> = read_csv(&dir.path().join("scatter.csv")).unwrap();
    assert_eq!(rows.len(), 6);
    let mean = |q: f64| {
        let v: Vec<f64> = rows.iter().filter(|r| r.quality == q).map(|r| r.paths_to_halt as f64).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    assert!(mean(1.0) > mean(4.0) && mean(4.0) > mean(16.0));
    for f in ["study.json", "histogram.csv", "holes_scatter.csv"] {
        assert!(dir.path().join(f).exists());
    }
}

#[test]
fn vacancy_study_writes_summary() {
    let dir = tempfile::tempdir().unwrap();
    let o = tdc(&["study", "--kind", "vacancy", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary = fs::read_to_string(dir.path().join("vacancy.csv")).unwrap();
    assert!(summary.starts_with("category,n,median,mean,min,max"));
    assert_eq!(summary.lines().count(), 4);
    assert!(dir.path().join("vacancy_samples.csv").exists());
}

#[test]
fn help_documents_exit_codes() {
    for sub in ["scan", "train-toy", "verify-lemma", "compare-indicators", "study"] {
        let o = tdc(&[sub, "--help"]);
        assert_eq!(code(&o), 0);
        assert!(String::from_utf8_lossy(&o.stdout).contains("Exit codes"), "{sub}");
    }
}

#[test]
fn golden_scan_reproduces() {
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/golden");
    let dir = tempfile::tempdir().unwrap();
    let o = tdc(&[
        "scan",
        "--planted",
        golden.join("planted.json").to_str().unwrap(),
        "--config",
        golden.join("config.json").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    for f in ["holes.jsonl", "trace.csv"] {
        assert_eq!(fs::read(dir.path().join(f)).unwrap(), fs::read(golden.join(f)).unwrap(), "{f}");
    }
    let fresh = read_report_json(&dir.path().join("report.json")).unwrap();
    let checked_in = read_report_json(&golden.join("report.json")).unwrap();
    assert_eq!(fresh.without_meta(), checked_in.without_meta());
}
