use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::indicators::DiagGaussian;
use crate::models::{DatasetSpec, ModelOracle};
use crate::numerics::{Matrix, SeededRng};
use crate::transport::SampleDistribution;

pub const WEIGHTS_VERSION: u32 = 1;
const LN_2PI: f64 = 1.837_877_066_409_345_5;
const LOGVAR_LIMIT: f64 = 10.0;
const INIT_RANGE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VaeDims {
    /// Data dimension.
    pub k: usize,
    /// Hidden width of both networks.
    pub h: usize,
    /// Latent dimension.
    pub d: usize,
}

/// Offsets of each parameter block inside the flat parameter vector.
#[derive(Debug, Clone, Copy)]
struct Layout {
    dims: VaeDims,
}

impl Layout {
    fn sizes(&self) -> [usize; 10] {
        let VaeDims { k, h, d } = self.dims;
        [h * k, h, d * h, d, d * h, d, h * d, h, k * h, k]
    }

    fn len(&self) -> usize {
        self.sizes().iter().sum()
    }

    fn block(&self, i: usize) -> std::ops::Range<usize> {
        let s = self.sizes();
        let start: usize = s[..i].iter().sum();
        start..start + s[i]
    }
}

// block order
const ENC_W1: usize = 0;
const ENC_B1: usize = 1;
const ENC_WMU: usize = 2;
const ENC_BMU: usize = 3;
const ENC_WLV: usize = 4;
const ENC_BLV: usize = 5;
const DEC_W1: usize = 6;
const DEC_B1: usize = 7;
const DEC_W2: usize = 8;
const DEC_B2: usize = 9;

/// Gaussian VAE with one tanh hidden layer in each network.
///
/// The encoder maps `x` to `μ` and `log σ²` (clamped to `[−10, 10]`); the decoder maps
/// `z` to the output mean, with a fixed isotropic output variance.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyVae {
    dims: VaeDims,
    output_var: f64,
    params: Vec<f64>,
}

/// Flat gradient of the negative weighted ELBO, in parameter order.
pub type Gradients = Vec<f64>;

struct Forward {
    h1: Vec<f64>,
    mu: Vec<f64>,
    lv: Vec<f64>,
    lv_active: Vec<bool>,
    z: Vec<f64>,
    h2: Vec<f64>,
    xhat: Vec<f64>,
}

fn affine(w: &[f64], b: &[f64], x: &[f64]) -> Vec<f64> {
    let n_in = x.len();
    b.iter()
        .enumerate()
        .map(|(r, &bias)| bias + w[r * n_in..(r + 1) * n_in].iter().zip(x).map(|(a, c)| a * c).sum::<f64>())
        .collect()
}

/// `wᵀ g` for a row-major `w` with `g.len()` rows.
fn affine_t(w: &[f64], g: &[f64], n_in: usize) -> Vec<f64> {
    let mut out = vec![0.0; n_in];
    for (r, &gr) in g.iter().enumerate() {
        for (o, &wv) in out.iter_mut().zip(&w[r * n_in..(r + 1) * n_in]) {
            *o += gr * wv;
        }
    }
    out
}

fn outer_into(dst: &mut [f64], g: &[f64], x: &[f64]) {
    let n = x.len();
    for (r, &gr) in g.iter().enumerate() {
        for (d, &xv) in dst[r * n..(r + 1) * n].iter_mut().zip(x) {
            *d += gr * xv;
        }
    }
}

fn add_into(dst: &mut [f64], g: &[f64]) {
    dst.iter_mut().zip(g).for_each(|(a, b)| *a += b);
}

impl ToyVae {
    /// Random initialization, every weight uniform in `[−0.01, 0.01]`.
    pub fn init(dims: VaeDims, output_var: f64, rng: &mut SeededRng) -> Result<Self> {
        if dims.k == 0 || dims.h == 0 || dims.d == 0 {
            return Err(Error::InvalidConfig("VAE dimensions must be positive".into()));
        }
        if !(output_var > 0.0) {
            return Err(Error::NonPositiveVariance);
        }
        let n = Layout { dims }.len();
        let params = (0..n).map(|_| rng.uniform_in(-INIT_RANGE, INIT_RANGE)).collect();
        Ok(ToyVae { dims, output_var, params })
    }

    pub fn from_params(dims: VaeDims, output_var: f64, params: Vec<f64>) -> Result<Self> {
        check_dim(Layout { dims }.len(), params.len())?;
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("VAE weights"));
        }
        if !(output_var > 0.0) {
            return Err(Error::NonPositiveVariance);
        }
        Ok(ToyVae { dims, output_var, params })
    }

    pub fn dims(&self) -> VaeDims {
        self.dims
    }

    pub fn output_var(&self) -> f64 {
        self.output_var
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn block(&self, i: usize) -> &[f64] {
        &self.params[Layout { dims: self.dims }.block(i)]
    }

    /// Posterior `(μ, log σ²)` with the log-variance clamped.
    pub fn encode_raw(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        check_dim(self.dims.k, x.len())?;
        let h1: Vec<f64> = affine(self.block(ENC_W1), self.block(ENC_B1), x).into_iter().map(f64::tanh).collect();
        let mu = affine(self.block(ENC_WMU), self.block(ENC_BMU), &h1);
        let lv = affine(self.block(ENC_WLV), self.block(ENC_BLV), &h1)
            .into_iter()
            .map(|v| v.clamp(-LOGVAR_LIMIT, LOGVAR_LIMIT))
            .collect();
        Ok((mu, lv))
    }

    pub fn encode_gaussian(&self, x: &[f64]) -> Result<DiagGaussian> {
        let (mu, lv) = self.encode_raw(x)?;
        DiagGaussian::new(mu, lv.iter().map(|v| v.exp()).collect())
    }

    /// Output mean for latent `z`.
    pub fn decode_mean(&self, z: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dims.d, z.len())?;
        let h2: Vec<f64> = affine(self.block(DEC_W1), self.block(DEC_B1), z).into_iter().map(f64::tanh).collect();
        Ok(affine(self.block(DEC_W2), self.block(DEC_B2), &h2))
    }

    fn forward(&self, x: &[f64], eps: &[f64]) -> Forward {
        let h1: Vec<f64> = affine(self.block(ENC_W1), self.block(ENC_B1), x).into_iter().map(f64::tanh).collect();
        let mu = affine(self.block(ENC_WMU), self.block(ENC_BMU), &h1);
        let raw = affine(self.block(ENC_WLV), self.block(ENC_BLV), &h1);
        let lv_active = raw.iter().map(|v| v.abs() <= LOGVAR_LIMIT).collect();
        let lv: Vec<f64> = raw.iter().map(|v| v.clamp(-LOGVAR_LIMIT, LOGVAR_LIMIT)).collect();
        let z: Vec<f64> = mu.iter().zip(&lv).zip(eps).map(|((m, l), e)| m + (0.5 * l).exp() * e).collect();
        let h2: Vec<f64> = affine(self.block(DEC_W1), self.block(DEC_B1), &z).into_iter().map(f64::tanh).collect();
        let xhat = affine(self.block(DEC_W2), self.block(DEC_B2), &h2);
        Forward { h1, mu, lv, lv_active, z, h2, xhat }
    }

    fn terms(&self, x: &[f64], f: &Forward) -> (f64, f64) {
        let recon = -0.5
            * x.iter()
                .zip(&f.xhat)
                .map(|(a, b)| (a - b) * (a - b) / self.output_var + LN_2PI + self.output_var.ln())
                .sum::<f64>();
        let kl = 0.5 * f.mu.iter().zip(&f.lv).map(|(m, l)| m * m + l.exp() - 1.0 - l).sum::<f64>();
        (recon, kl)
    }

    /// Reconstruction log-likelihood and KL term for a fixed noise draw `eps`.
    pub fn elbo_terms(&self, x: &[f64], eps: &[f64]) -> Result<(f64, f64)> {
        check_dim(self.dims.k, x.len())?;
        check_dim(self.dims.d, eps.len())?;
        Ok(self.terms(x, &self.forward(x, eps)))
    }

    /// Single-sample ELBO, the noise drawn from `rng`.
    pub fn elbo(&self, x: &[f64], rng: &mut SeededRng) -> Result<f64> {
        let eps = rng.normals(self.dims.d);
        let (recon, kl) = self.elbo_terms(x, &eps)?;
        Ok(recon - kl)
    }

    /// `−(recon − β·KL)` for noise `eps`.
    pub fn loss(&self, x: &[f64], eps: &[f64], beta: f64) -> Result<f64> {
        let (recon, kl) = self.elbo_terms(x, eps)?;
        Ok(-(recon - beta * kl))
    }

    /// Loss and its gradient with respect to every parameter.
    pub fn loss_and_grad(&self, x: &[f64], eps: &[f64], beta: f64) -> Result<(f64, Gradients)> {
        let mut grad = vec![0.0; self.params.len()];
        let loss = self.accumulate_grad(x, eps, beta, &mut grad)?;
        Ok((loss, grad))
    }

    fn accumulate_grad(&self, x: &[f64], eps: &[f64], beta: f64, grad: &mut [f64]) -> Result<f64> {
        check_dim(self.dims.k, x.len())?;
        check_dim(self.dims.d, eps.len())?;
        let VaeDims { k, h, d } = self.dims;
        let layout = Layout { dims: self.dims };
        let f = self.forward(x, eps);
        let (recon, kl) = self.terms(x, &f);

        let dxhat: Vec<f64> = f.xhat.iter().zip(x).map(|(a, b)| (a - b) / self.output_var).collect();
        outer_into(&mut grad[layout.block(DEC_W2)], &dxhat, &f.h2);
        add_into(&mut grad[layout.block(DEC_B2)], &dxhat);
        let dh2 = affine_t(self.block(DEC_W2), &dxhat, h);
        let da2: Vec<f64> = dh2.iter().zip(&f.h2).map(|(g, t)| g * (1.0 - t * t)).collect();
        outer_into(&mut grad[layout.block(DEC_W1)], &da2, &f.z);
        add_into(&mut grad[layout.block(DEC_B1)], &da2);
        let dz = affine_t(self.block(DEC_W1), &da2, d);

        let dmu: Vec<f64> = dz.iter().zip(&f.mu).map(|(g, m)| g + beta * m).collect();
        let dlv: Vec<f64> = (0..d)
            .map(|j| {
                if !f.lv_active[j] {
                    return 0.0;
                }
                let s = (0.5 * f.lv[j]).exp();
                dz[j] * eps[j] * 0.5 * s + beta * 0.5 * (f.lv[j].exp() - 1.0)
            })
            .collect();
        outer_into(&mut grad[layout.block(ENC_WMU)], &dmu, &f.h1);
        add_into(&mut grad[layout.block(ENC_BMU)], &dmu);
        outer_into(&mut grad[layout.block(ENC_WLV)], &dlv, &f.h1);
        add_into(&mut grad[layout.block(ENC_BLV)], &dlv);
        let mut dh1 = affine_t(self.block(ENC_WMU), &dmu, h);
        add_into(&mut dh1, &affine_t(self.block(ENC_WLV), &dlv, h));
        let da1: Vec<f64> = dh1.iter().zip(&f.h1).map(|(g, t)| g * (1.0 - t * t)).collect();
        outer_into(&mut grad[layout.block(ENC_W1)], &da1, x);
        add_into(&mut grad[layout.block(ENC_B1)], &da1);
        debug_assert_eq!(grad.len(), layout.len());
        let _ = k;
        Ok(-(recon - beta * kl))
    }

    /// Mean squared error of `decode(μ(x))` over the rows of `data`, per coordinate.
    pub fn reconstruction_mse(&self, data: &Matrix) -> Result<f64> {
        let mut total = 0.0;
        for x in data.iter_rows() {
            let (mu, _) = self.encode_raw(x)?;
            let xhat = self.decode_mean(&mu)?;
            total += x.iter().zip(&xhat).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        }
        Ok(total / (data.rows() * self.dims.k).max(1) as f64)
    }
}

/// Sigma points of the decoder's Gaussian output: the mean, then `mean ± σ·e_i` for each
/// output axis, uniformly weighted.
pub fn vae_decode_distribution(vae: &ToyVae, z: &[f64]) -> Result<SampleDistribution> {
    let mean = vae.decode_mean(z)?;
    let k = mean.len();
    let sigma = vae.output_var.sqrt();
    let mut support = Matrix::zeros(2 * k + 1, k);
    support.row_mut(0).copy_from_slice(&mean);
    for i in 0..k {
        let plus = support.row_mut(1 + 2 * i);
        plus.copy_from_slice(&mean);
        plus[i] += sigma;
        let minus = support.row_mut(2 + 2 * i);
        minus.copy_from_slice(&mean);
        minus[i] -= sigma;
    }
    SampleDistribution::uniform(support)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub output_var: f64,
    /// Gradient norm clip threshold.
    pub clip: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { epochs: 50, lr: 3e-3, batch_size: 32, output_var: 0.05, clip: 5.0, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub initial_mse: f64,
    pub final_mse: f64,
    /// Mean single-sample ELBO over the dataset after training.
    pub final_elbo: f64,
    pub steps: usize,
}

/// The network [`train_toy_vae`] starts from under `config`: its untrained twin.
pub fn initial_vae(dims: VaeDims, config: &TrainConfig) -> Result<ToyVae> {
    ToyVae::init(dims, config.output_var, &mut SeededRng::substream(config.seed, 0))
}

/// Minibatch Adam on the negative ELBO with the KL weight annealed linearly from 0 to 1
/// over the first `min(10, epochs)` epochs.
pub fn train_toy_vae(data: &Matrix, dims: VaeDims, config: &TrainConfig) -> Result<(ToyVae, TrainSummary)> {
    if data.rows() == 0 {
        return Err(Error::EmptyData { needed: 1, got: 0 });
    }
    check_dim(dims.k, data.cols())?;
    if config.epochs == 0 {
        return Err(Error::InvalidConfig("epochs must be at least 1".into()));
    }
    if !(config.lr >= 0.0) || config.batch_size == 0 || !(config.clip > 0.0) {
        return Err(Error::InvalidConfig("lr must be nonnegative, batch_size and clip positive".into()));
    }
    let mut vae = initial_vae(dims, config)?;
    let mut noise_rng = SeededRng::substream(config.seed, 1);
    let mut order_rng = SeededRng::substream(config.seed, 2);
    let initial_mse = vae.reconstruction_mse(data)?;

    let n = data.rows();
    let batches_per_epoch = n.div_ceil(config.batch_size);
    let anneal_steps = (config.epochs.min(10) * batches_per_epoch) as f64;
    let (b1, b2, adam_eps): (f64, f64, f64) = (0.9, 0.999, 1e-8);
    let mut m = vec![0.0; vae.params.len()];
    let mut v = vec![0.0; vae.params.len()];
    let mut grad = vec![0.0; vae.params.len()];
    let mut order: Vec<usize> = (0..n).collect();
    let mut step = 0usize;

    for epoch in 0..config.epochs {
        order_rng.shuffle(&mut order);
        for batch in order.chunks(config.batch_size) {
            let beta = ((step + 1) as f64 / anneal_steps).min(1.0);
            grad.iter_mut().for_each(|g| *g = 0.0);
            let mut loss = 0.0;
            for &i in batch {
                let eps = noise_rng.normals(dims.d);
                loss += vae.accumulate_grad(data.row(i), &eps, beta, &mut grad)?;
            }
            let scale = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|g| *g *= scale);
            if !(loss * scale).is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::DivergedTraining { epoch });
            }
            let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if norm > config.clip {
                let c = config.clip / norm;
                grad.iter_mut().for_each(|g| *g *= c);
            }
            step += 1;
            let (c1, c2) = (1.0 - b1.powi(step as i32), 1.0 - b2.powi(step as i32));
            for (((p, g), mi), vi) in vae.params.iter_mut().zip(&grad).zip(m.iter_mut()).zip(v.iter_mut()) {
                *mi = b1 * *mi + (1.0 - b1) * g;
                *vi = b2 * *vi + (1.0 - b2) * g * g;
                *p -= config.lr * (*mi / c1) / ((*vi / c2).sqrt() + adam_eps);
            }
        }
        if vae.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::DivergedTraining { epoch });
        }
        log::debug!("epoch {epoch}: mse {:.4}", vae.reconstruction_mse(data)?);
    }

    let final_mse = vae.reconstruction_mse(data)?;
    let mut eval_rng = SeededRng::substream(config.seed, 3);
    let mut elbo = 0.0;
    for x in data.iter_rows() {
        elbo += vae.elbo(x, &mut eval_rng)?;
    }
    let summary = TrainSummary { initial_mse, final_mse, final_elbo: elbo / n as f64, steps: step };
    Ok((vae, summary))
}

/// Trained or untrained VAE together with the data it is searched against.
#[derive(Debug, Clone)]
pub struct VaeModel {
    pub vae: ToyVae,
    pub training: Matrix,
}

impl ModelOracle for VaeModel {
    fn latent_dim(&self) -> usize {
        self.vae.dims.d
    }

    fn training_set(&self) -> &Matrix {
        &self.training
    }

    fn encode(&self, x: &[f64]) -> Result<DiagGaussian> {
        self.vae.encode_gaussian(x)
    }

    fn decode(&self, z: &[f64]) -> Result<SampleDistribution> {
        vae_decode_distribution(&self.vae, z)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderWeights {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w_mu: Vec<f64>,
    pub b_mu: Vec<f64>,
    pub w_logvar: Vec<f64>,
    pub b_logvar: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoderWeights {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

/// On-disk weight document. Matrices are row-major with `(out, in)` shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightsFile {
    pub version: u32,
    pub dims: VaeDims,
    pub output_var: f64,
    pub enc: EncoderWeights,
    pub dec: DecoderWeights,
    /// Training data the weights were fitted on, if known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<DatasetSpec>,
}

impl WeightsFile {
    pub fn from_vae(vae: &ToyVae, dataset: Option<DatasetSpec>) -> Self {
        let b = |i| vae.block(i).to_vec();
        WeightsFile {
            version: WEIGHTS_VERSION,
            dims: vae.dims,
            output_var: vae.output_var,
            enc: EncoderWeights {
                w1: b(ENC_W1),
                b1: b(ENC_B1),
                w_mu: b(ENC_WMU),
                b_mu: b(ENC_BMU),
                w_logvar: b(ENC_WLV),
                b_logvar: b(ENC_BLV),
            },
            dec: DecoderWeights { w1: b(DEC_W1), b1: b(DEC_B1), w2: b(DEC_W2), b2: b(DEC_B2) },
            dataset,
        }
    }

    pub fn to_vae(&self) -> Result<ToyVae> {
        if self.version != WEIGHTS_VERSION {
            return Err(Error::SchemaMismatch(format!("unsupported weights version {}", self.version)));
        }
        let layout = Layout { dims: self.dims };
        let blocks: [&Vec<f64>; 10] = [
            &self.enc.w1,
            &self.enc.b1,
            &self.enc.w_mu,
            &self.enc.b_mu,
            &self.enc.w_logvar,
            &self.enc.b_logvar,
            &self.dec.w1,
            &self.dec.b1,
            &self.dec.w2,
            &self.dec.b2,
        ];
        let mut params = Vec::with_capacity(layout.len());
        for (i, (block, size)) in blocks.iter().zip(layout.sizes()).enumerate() {
            if block.len() != size {
                return Err(Error::SchemaMismatch(format!(
                    "weight block {i} has {} entries, expected {size}",
                    block.len()
                )));
            }
            params.extend_from_slice(block);
        }
        ToyVae::from_params(self.dims, self.output_var, params)
    }
}

pub fn save_weights(path: &Path, vae: &ToyVae, dataset: Option<&DatasetSpec>) -> Result<()> {
    let doc = WeightsFile::from_vae(vae, dataset.cloned());
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Reads a weight document; also returns the dataset it names, if any.
pub fn load_weights(path: &Path) -> Result<(ToyVae, Option<DatasetSpec>)> {
    let text = std::fs::read_to_string(path)?;
    let corrupt = |message: String| Error::CorruptFile { path: path.to_path_buf(), message };
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| corrupt(e.to_string()))?;
    match value.get("version").and_then(|v| v.as_u64()) {
        Some(v) if v == WEIGHTS_VERSION as u64 => {}
        Some(v) => return Err(Error::SchemaMismatch(format!("unsupported weights version {v}"))),
        None => return Err(Error::SchemaMismatch("missing version tag".into())),
    }
    let doc: WeightsFile = serde_json::from_value(value).map_err(|e| Error::SchemaMismatch(e.to_string()))?;
    Ok((doc.to_vae()?, doc.dataset))
}
