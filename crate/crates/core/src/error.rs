use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("need at least {needed} rows, got {got}")]
    EmptyData { needed: usize, got: usize },

    #[error("need at least {needed} values, got {got}")]
    TooFewValues { needed: usize, got: usize },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),

    #[error("covariance has {positive} strictly positive eigenvalues, {requested} requested")]
    RankDeficient { requested: usize, positive: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("sinkhorn did not converge after {iterations} iterations (marginal violation {violation:e})")]
    NoConvergence { iterations: usize, violation: f64 },

    #[error("sinkhorn scaling underflowed; rescale costs or raise eps")]
    NumericalUnderflow,

    #[error("instance too large for exact solver: {rows}x{cols} > {limit}")]
    InstanceTooLarge { rows: usize, cols: usize, limit: usize },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(&'static str),

    #[error("latent gap {0:e} too small for a Lipschitz ratio")]
    DegenerateLatentGap(f64),

    #[error("posterior set is empty")]
    EmptyPosteriorSet,

    #[error("variance entries must be strictly positive")]
    NonPositiveVariance,

    #[error("need at least {needed} points to build a fence, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("hub {index} lies outside the fence")]
    HubOutsideFence { index: usize },

    #[error("standard deviations must be strictly positive")]
    NonPositiveStd,

    #[error("path of length {length:e} holds fewer than two samples at interval {interval:e}")]
    PathTooShort { length: f64, interval: f64 },

    #[error("decoder failed at {point:?}: {message}")]
    DecoderFailure { point: Vec<f64>, message: String },

    #[error("training diverged at epoch {epoch}")]
    DivergedTraining { epoch: usize },

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("corrupt file {path}: {message}")]
    CorruptFile { path: PathBuf, message: String },

    #[error("need at least {needed} setups, got {got}")]
    InsufficientSetups { needed: usize, got: usize },

    #[error("no hole has a continuous successor")]
    MissingNeighbor,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
