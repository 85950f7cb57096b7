use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use tdc_core::models::{save_weights, train_toy_vae, DatasetSpec, TrainConfig, VaeDims};

#[derive(Args)]
#[command(
    about = "Train the toy VAE and write its weights",
    after_help = "Exit codes:\n  0  weights written\n  1  training diverged or another runtime error\n  2  usage error"
)]
pub struct TrainArgs {
    /// `two-modes`, `ring`, or a dataset JSON file
    #[arg(long, default_value = "two-modes")]
    pub dataset: String,

    /// Points drawn for a named dataset
    #[arg(long, default_value_t = 1000)]
    pub n: usize,

    /// Hidden width of encoder and decoder
    #[arg(long, default_value_t = 16)]
    pub hidden: usize,

    /// Latent dimension
    #[arg(long, default_value_t = 8)]
    pub latent: usize,

    #[arg(long, default_value_t = 50, value_parser = clap::value_parser!(u64).range(1..))]
    pub epochs: u64,

    /// Adam learning rate
    #[arg(long, default_value_t = 3e-3)]
    pub lr: f64,

    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,

    /// Seeds both training and a named dataset
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Weights JSON to write
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

pub fn dataset_from_arg(name: &str, n: usize, seed: u64) -> Result<DatasetSpec> {
    Ok(match name {
        "two-modes" => DatasetSpec::two_modes(n, seed),
        "ring" => DatasetSpec::ring(n, seed),
        path => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {path}"))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {path}"))?
        }
    })
}

pub fn run(args: TrainArgs) -> Result<u8> {
    let dataset = dataset_from_arg(&args.dataset, args.n, args.seed)?;
    let data = dataset.generate()?;
    let dims = VaeDims { k: data.cols(), h: args.hidden, d: args.latent };
    let config = TrainConfig {
        epochs: args.epochs as usize,
        lr: args.lr,
        batch_size: args.batch_size,
        seed: args.seed,
        ..Default::default()
    };
    let (vae, summary) = train_toy_vae(&data, dims, &config)?;
    save_weights(&args.out, &vae, Some(&dataset))?;
    println!(
        "final ELBO {:.6} (reconstruction MSE {:.6} -> {:.6}, {} steps)",
        summary.final_elbo, summary.initial_mse, summary.final_mse, summary.steps
    );
    Ok(0)
}
