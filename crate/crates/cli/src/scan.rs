use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{ArgGroup, Args};
use serde::Deserialize;
use tdc_core::analysis::{fenced_spec, HoleLayout};
use tdc_core::models::{load_weights, PlantedSpec};
use tdc_core::tdc::{run_tdc_traced, write_holes_jsonl, write_report_json, write_trace_csv};
use tdc_core::{ModelOracle, RunConfig, RunStatus, VaeModel};

use crate::{UsageError, EXIT_EXHAUSTED};

const SCAN_EXIT_CODES: &str = "\
Exit codes:
  0  halted: n_hole holes found
  3  exhausted: the path budget ran out first (outputs are still written)
  1  runtime error
  2  usage error";

#[derive(Args)]
#[command(
    about = "Search a model's latent space for holes",
    after_help = SCAN_EXIT_CODES,
    group(ArgGroup::new("source").required(true).args(["model", "planted"]))
)]
pub struct ScanArgs {
    /// Run configuration JSON. Explicit flags override its fields; missing fields take
    /// their defaults.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Toy VAE weights from `train-toy`. The file must record its dataset.
    #[arg(long, value_name = "FILE")]
    pub model: Option<PathBuf>,

    /// Planted decoder spec JSON, optionally with a `layout` placing its holes in the
    /// run's fence.
    #[arg(long, value_name = "FILE")]
    pub planted: Option<PathBuf>,

    /// Output directory for holes.jsonl, trace.csv and report.json.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,

    /// Run seed [default: config value, else 0]
    #[arg(long)]
    pub seed: Option<u64>,

    /// Number of principal axes searched [default: config value, else 3]
    #[arg(long)]
    pub d_r: Option<usize>,

    /// Holes to find before halting [default: config value, else 200]
    #[arg(long)]
    pub n_hole: Option<usize>,

    /// Path budget [default: config value, else 10 * n_hole]
    #[arg(long)]
    pub max_paths: Option<usize>,

    /// Evaluation threads; never changes results [default: available parallelism]
    #[arg(long)]
    pub threads: Option<usize>,
}

/// A planted spec plus an optional layout resolved against the run's fence.
#[derive(Deserialize)]
struct PlantedFile {
    #[serde(flatten)]
    spec: PlantedSpec,
    #[serde(default)]
    layout: Option<HoleLayout>,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// The config file (or defaults) with explicit flags applied on top, and whether the
/// file fixed the latent dimension.
pub fn resolve_config(args: &ScanArgs) -> Result<(RunConfig, bool)> {
    let (mut config, has_d) = match &args.config {
        Some(path) => {
            let value: serde_json::Value = read_json(path)?;
            let has_d = value.get("d").is_some();
            let config = serde_json::from_value(value).with_context(|| format!("parsing {}", path.display()))?;
            (config, has_d)
        }
        None => (RunConfig::default(), false),
    };
    if let Some(v) = args.seed {
        config.seed = v;
    }
    if let Some(v) = args.d_r {
        config.d_r = v;
    }
    if let Some(v) = args.n_hole {
        config.n_hole = v;
    }
    if let Some(v) = args.max_paths {
        config.max_paths = Some(v);
    }
    if let Some(v) = args.threads {
        config.workers = v;
    }
    Ok((config, has_d))
}

fn set_latent_dim(config: &mut RunConfig, has_d: bool, d: usize) -> Result<()> {
    if has_d && config.d != d {
        return Err(UsageError(format!("config sets d = {} but the model's latent dimension is {d}", config.d)).into());
    }
    config.d = d;
    config.validate().map_err(|e| UsageError(e.to_string()))?;
    Ok(())
}

pub fn run(args: ScanArgs) -> Result<u8> {
    let (mut config, has_d) = resolve_config(&args)?;
    let model: Box<dyn ModelOracle> = if let Some(path) = &args.model {
        let (vae, dataset) = load_weights(path)?;
        let dataset = dataset.with_context(|| format!("{} does not record its training dataset", path.display()))?;
        let training = dataset.generate()?;
        set_latent_dim(&mut config, has_d, vae.dims().d)?;
        Box::new(VaeModel { vae, training })
    } else {
        let path = args.planted.as_ref().expect("clap enforces one model source");
        let file: PlantedFile = read_json(path)?;
        set_latent_dim(&mut config, has_d, file.spec.latent_dim)?;
        let spec = match &file.layout {
            Some(layout) => fenced_spec(&file.spec, &config, layout)?,
            None => file.spec,
        };
        Box::new(spec.build()?)
    };

    let (report, trace) = run_tdc_traced(&config, model.as_ref())?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    write_holes_jsonl(&args.out.join("holes.jsonl"), &report.holes)?;
    write_trace_csv(&args.out.join("trace.csv"), &trace)?;
    write_report_json(&args.out.join("report.json"), &report)?;
    println!(
        "{:?}: {} holes, {} paths traversed, max depth {}",
        report.status,
        report.holes.len(),
        report.paths_traversed,
        report.max_depth_reached
    );
    Ok(match report.status {
        RunStatus::Halted => 0,
        RunStatus::Exhausted => EXIT_EXHAUSTED,
    })
}
