use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use tdc_core::analysis::{
    density_correlation_study, emit_plot_data, fenced_spec, vacancy_study, Category, HoleLayout, QualitySource, Setup,
    StudyOutput,
};
use tdc_core::models::{initial_vae, load_weights, train_toy_vae, DatasetSpec, TrainConfig, VaeDims};
use tdc_core::{run_tdc, PlantedModel, PlantedSpec, RunConfig, VaeModel};

use crate::UsageError;

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StudyKind {
    /// Planted slab families of increasing density; correlates density with paths to halt
    Density,
    /// Trained toy VAE against its untrained twin; compares Hole, Norm and Rand quality
    Vacancy,
}

#[derive(Args)]
#[command(
    about = "Run a study and write its plot data",
    after_help = "Outputs:\n  density: study.json, scatter.csv, histogram.csv, holes_scatter.csv\n  vacancy: study.json, vacancy.csv, vacancy_samples.csv\n\nExit codes:\n  0  outputs written\n  1  runtime error\n  2  usage error"
)]
pub struct StudyArgs {
    #[arg(long, value_enum)]
    pub kind: StudyKind,

    /// Output directory
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,

    /// Base seed; repeats and runs use consecutive seeds from here
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Holes per run [default: 40 for density, 50 for vacancy]
    #[arg(long)]
    pub n_hole: Option<usize>,

    /// Principal axes searched [default: 8 for density, 3 for vacancy]
    #[arg(long)]
    pub d_r: Option<usize>,

    /// Evaluation threads; never changes results [default: available parallelism]
    #[arg(long)]
    pub threads: Option<usize>,

    /// Density: planted slab counts, comma separated
    #[arg(long, value_delimiter = ',', default_value = "1,4,16")]
    pub densities: Vec<usize>,

    /// Density: seeds per slab count
    #[arg(long, default_value_t = 5)]
    pub repeats: u64,

    /// Vacancy: trained weights with a recorded dataset; the twin is rebuilt from --seed
    /// [default: train on two-modes]
    #[arg(long, value_name = "FILE")]
    pub model: Option<PathBuf>,

    /// Vacancy: training epochs when no --model is given
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,

    /// Vacancy: searches whose holes are pooled
    #[arg(long, default_value_t = 8)]
    pub runs: u64,
}

const PLANTED_LATENT_DIM: usize = 32;
const SLAB_WIDTH: f64 = 0.2;
const DENSITY_MAX_PATHS: usize = 20_000;

fn density(args: &StudyArgs) -> Result<StudyOutput> {
    let n_hole = args.n_hole.unwrap_or(40);
    let d_r = args.d_r.unwrap_or(8);
    let mut planted: Vec<(String, f64, RunConfig, PlantedModel)> = Vec::new();
    for &count in &args.densities {
        for r in 0..args.repeats {
            let seed = args.seed + r;
            let config = RunConfig {
                seed,
                max_paths: Some(DENSITY_MAX_PATHS),
                workers: args.threads.unwrap_or(0),
                ..RunConfig::new(PLANTED_LATENT_DIM, d_r, n_hole)
            };
            config.validate().map_err(|e| UsageError(e.to_string()))?;
            let layout = HoleLayout::Slabs { axis: 0, count, width: SLAB_WIDTH };
            let base = PlantedSpec { seed, ..Default::default() };
            let model = fenced_spec(&base, &config, &layout)?.build()?;
            planted.push((format!("slabs{count}-seed{seed}"), count as f64, config, model));
        }
    }
    let setups: Vec<Setup<'_>> = planted
        .iter()
        .map(|(id, count, config, model)| Setup {
            id: id.clone(),
            model,
            config: config.clone(),
            quality: QualitySource::Fixed(*count),
        })
        .collect();
    let result = density_correlation_study(&setups)?;
    println!("spearman {:.4}, pearson {:.4} over {} setups", result.spearman, result.pearson, result.rows.len());
    Ok(StudyOutput::Density(result))
}

fn vacancy(args: &StudyArgs) -> Result<StudyOutput> {
    let n_hole = args.n_hole.unwrap_or(50);
    let d_r = args.d_r.unwrap_or(3);
    let (trained, dataset, train_config) = match &args.model {
        Some(path) => {
            let (vae, dataset) = load_weights(path)?;
            let dataset =
                dataset.with_context(|| format!("{} does not record its training dataset", path.display()))?;
            let config = TrainConfig { seed: args.seed, output_var: vae.output_var(), ..Default::default() };
            (vae, dataset, config)
        }
        None => {
            let dataset = DatasetSpec::two_modes(1000, args.seed);
            let config = TrainConfig { epochs: args.epochs, seed: args.seed, ..Default::default() };
            let data = dataset.generate()?;
            let (vae, summary) = train_toy_vae(&data, VaeDims { k: data.cols(), h: 16, d: 8 }, &config)?;
            println!("trained toy VAE: final ELBO {:.4}", summary.final_elbo);
            (vae, dataset, config)
        }
    };
    let training = dataset.generate()?;
    let twin = initial_vae(trained.dims(), &train_config)?;
    let trained = VaeModel { vae: trained, training: training.clone() };
    let twin = VaeModel { vae: twin, training };

    let mut holes = Vec::new();
    for r in 0..args.runs {
        let config = RunConfig {
            seed: args.seed + r,
            workers: args.threads.unwrap_or(0),
            ..RunConfig::new(trained.vae.dims().d, d_r, n_hole)
        };
        config.validate().map_err(|e| UsageError(e.to_string()))?;
        holes.extend(run_tdc(&config, &trained)?.holes);
    }
    if holes.is_empty() {
        anyhow::bail!("{} searches found no holes; raise --runs or --n-hole", args.runs);
    }
    let result = vacancy_study(&trained, &twin, &holes, &dataset.density())?;
    for c in Category::ALL {
        if let Some(s) = result.summary(c) {
            println!("{c:?}: n {}, median quality {:.4}", s.n, s.median);
        }
    }
    for t in &result.tests {
        println!("{:?} vs {:?}: z {:.3}, p {:.3e} (Bonferroni {:.3e})", t.a, t.b, t.z, t.p_value, t.p_bonferroni);
    }
    Ok(StudyOutput::Vacancy(result))
}

pub fn run(args: StudyArgs) -> Result<u8> {
    let output = match args.kind {
        StudyKind::Density => density(&args)?,
        StudyKind::Vacancy => vacancy(&args)?,
    };
    for path in emit_plot_data(&output, &args.out)? {
        println!("wrote {}", path.display());
    }
    Ok(0)
}
