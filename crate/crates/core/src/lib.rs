//! Latent hole search for variational autoencoders.
//!
//! A latent hole is a region of a VAE's latent space where decoding changes abruptly.
//! The crate finds them by walking axis-parallel lines through a PCA-reduced box of the
//! latent space and flagging points whose decoder-side Lipschitz ratio is an outlier
//! ([`tdc`]). Around that search sit the supporting pieces:
//!
//! * [`numerics`]: dense matrices, a Jacobi eigensolver, quartiles and rank statistics,
//!   seeded randomness;
//! * [`pca`]: principal component projection and its inverse;
//! * [`transport`]: Wasserstein-1 distances between decoder outputs (Sinkhorn, plus an
//!   exact solver for small instances);
//! * [`indicators`]: the Lipschitz and aggregated-posterior hole scores;
//! * [`models`]: the encoder/decoder interface, synthetic decoders with planted holes,
//!   and a small trainable Gaussian VAE;
//! * [`analysis`]: hole-density and vacancy studies built on top of the search.

// NaN-rejecting checks are written as `!(x > 0.0)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod error;
pub mod indicators;
pub mod models;
pub mod numerics;
pub mod pca;
pub mod tdc;
pub mod transport;

pub use error::{Error, Result};
pub use indicators::{DiagGaussian, IndicatorKind, IndicatorValue};
pub use models::{ModelOracle, PlantedModel, PlantedSpec, ToyVae, VaeModel};
pub use numerics::{Matrix, SeededRng};
pub use pca::PcaModel;
pub use tdc::{run_tdc, HoleRecord, RunConfig, RunReport, RunStatus};
pub use transport::{SampleDistribution, SinkhornConfig};
