//! Encoder/decoder oracles: synthetic planted-hole decoders and a small trainable VAE.

mod data;
mod planted;
mod vae;

pub use data::{DatasetSpec, MixtureDensity};
pub use planted::{cluster_boxes, HoleBox, PlantedModel, PlantedSpec};
pub use vae::{
    initial_vae, load_weights, save_weights, train_toy_vae, vae_decode_distribution, DecoderWeights, EncoderWeights,
    Gradients, ToyVae, TrainConfig, TrainSummary, VaeDims, VaeModel, WeightsFile, WEIGHTS_VERSION,
};

use crate::error::Result;
use crate::indicators::DiagGaussian;
use crate::numerics::Matrix;
use crate::transport::SampleDistribution;

/// A trained (or synthetic) latent variable model seen from the outside.
///
/// Implementations must be deterministic: the same input always yields the same
/// posterior or output distribution. Both calls may run concurrently from several
/// threads.
///
/// An adapter around an external model only needs forward passes: `encode` returns the
/// diagonal posterior of one data point and `decode` converts the decoder's output for
/// a latent vector into a weighted point set in some fixed embedding space.
pub trait ModelOracle: Sync {
    fn latent_dim(&self) -> usize;

    /// Rows are data points.
    fn training_set(&self) -> &Matrix;

    fn encode(&self, x: &[f64]) -> Result<DiagGaussian>;

    fn decode(&self, z: &[f64]) -> Result<SampleDistribution>;
}
