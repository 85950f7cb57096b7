use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::indicators::DiagGaussian;
use crate::models::ModelOracle;
use crate::numerics::{dot, norm2, Matrix, SeededRng};
use crate::pca::PcaModel;
use crate::transport::SampleDistribution;

/// Axis-aligned region of the latent space. Coordinates without an entry are unbounded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoleBox {
    /// Latent coordinate → closed interval.
    pub bounds: BTreeMap<usize, (f64, f64)>,
}

impl HoleBox {
    pub fn new(bounds: impl IntoIterator<Item = (usize, (f64, f64))>) -> Self {
        HoleBox { bounds: bounds.into_iter().collect() }
    }

    pub fn contains(&self, z: &[f64]) -> bool {
        self.contains_dilated(z, 0.0)
    }

    /// Membership in the box grown by `margin` on every bounded side.
    pub fn contains_dilated(&self, z: &[f64], margin: f64) -> bool {
        self.bounds.iter().all(|(&j, &(lo, hi))| z.get(j).is_some_and(|&v| v >= lo - margin && v <= hi + margin))
    }

    fn overlaps(&self, other: &HoleBox) -> bool {
        self.bounds.iter().all(|(j, &(lo, hi))| match other.bounds.get(j) {
            Some(&(olo, ohi)) => lo <= ohi && olo <= hi,
            None => true,
        })
    }

    /// A box given in reduced coordinates, expressed in latent coordinates.
    ///
    /// Requires each referenced principal axis to coincide with a latent coordinate
    /// axis (within `1e-6`), as it does for planted models, whose training codes have
    /// a diagonal covariance.
    pub fn from_reduced(pca: &PcaModel, bounds: &[(usize, (f64, f64))]) -> Result<HoleBox> {
        let mut out = BTreeMap::new();
        for &(axis, (lo, hi)) in bounds {
            if axis >= pca.reduced_dim() || !(lo < hi) {
                return Err(Error::InvalidConfig(format!("bad reduced bound on axis {axis}")));
            }
            let row = pca.components.row(axis);
            let (coord, &weight) = row
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
                .ok_or_else(|| Error::InvalidConfig("empty projection".into()))?;
            if weight.abs() < 1.0 - 1e-6 {
                return Err(Error::InvalidConfig(format!("principal axis {axis} is not a latent coordinate axis")));
            }
            let m = pca.mean[coord];
            let (a, b) = (m + weight.signum() * lo, m + weight.signum() * hi);
            out.insert(coord, (a.min(b), a.max(b)));
        }
        Ok(HoleBox { bounds: out })
    }
}

/// Parameters of a synthetic model with known discontinuities.
///
/// The decoder is a smooth base map (a random linear map plus a small sinusoid on the
/// first output) with a constant jump of `offset` on every output inside any hole box.
/// The encoder is a fixed orthogonal affine map whose training codes have an exactly
/// diagonal covariance with distinct variances in `[0.25, 1]`, so principal axes are
/// latent coordinate axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlantedSpec {
    pub latent_dim: usize,
    pub output_dim: usize,
    pub training_size: usize,
    pub seed: u64,
    /// L1 norm of every column of the linear part.
    pub gain: f64,
    pub sinusoid_amplitude: f64,
    pub sinusoid_frequency: f64,
    pub offset: f64,
    pub boxes: Vec<HoleBox>,
}

impl Default for PlantedSpec {
    fn default() -> Self {
        PlantedSpec {
            latent_dim: 32,
            output_dim: 4,
            training_size: 512,
            seed: 0,
            gain: 1.0,
            sinusoid_amplitude: 0.001,
            sinusoid_frequency: 100.0,
            offset: 1.0,
            boxes: Vec::new(),
        }
    }
}

impl PlantedSpec {
    /// An exactly affine decoder: no sinusoid, no holes.
    pub fn affine(latent_dim: usize, seed: u64) -> Self {
        PlantedSpec { latent_dim, seed, sinusoid_amplitude: 0.0, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.latent_dim == 0 || self.output_dim == 0 {
            return bad("dimensions must be positive".into());
        }
        if self.training_size < self.latent_dim + 1 {
            return bad(format!("training_size must exceed latent_dim ({})", self.latent_dim));
        }
        if !(self.gain > 0.0) || !(self.sinusoid_amplitude >= 0.0) || !self.sinusoid_frequency.is_finite() {
            return bad("gain must be positive and sinusoid parameters finite".into());
        }
        if !self.boxes.is_empty() && !(self.offset > 0.0) {
            return bad("jump offset must be positive".into());
        }
        for (i, b) in self.boxes.iter().enumerate() {
            if b.bounds.is_empty() {
                return bad(format!("box {i} has no bounds"));
            }
            if b.bounds.iter().any(|(&j, &(lo, hi))| j >= self.latent_dim || !(lo < hi)) {
                return bad(format!("box {i} has an invalid bound"));
            }
            if let Some(k) = (0..i).find(|&k| self.boxes[k].overlaps(b)) {
                return bad(format!("boxes {k} and {i} overlap"));
            }
        }
        Ok(())
    }

    pub fn build(&self) -> Result<PlantedModel> {
        PlantedModel::new(self.clone())
    }
}

/// `count` disjoint boxes of half-width `half_width` scattered around `centre`.
///
/// Each box is bounded on the coordinates listed in `centre`; box centres are drawn
/// uniformly within `spread` of it and rejected when they would overlap earlier boxes.
pub fn cluster_boxes(
    centre: &[(usize, f64)],
    count: usize,
    spread: f64,
    half_width: f64,
    rng: &mut SeededRng,
) -> Result<Vec<HoleBox>> {
    let mut boxes: Vec<HoleBox> = Vec::with_capacity(count);
    let mut attempts = 0;
    while boxes.len() < count {
        attempts += 1;
        if attempts > 1000 * count.max(1) {
            return Err(Error::InvalidConfig("cannot place that many disjoint boxes".into()));
        }
        let candidate = HoleBox::new(centre.iter().map(|&(j, c)| {
            let m = c + rng.uniform_in(-spread, spread);
            (j, (m - half_width, m + half_width))
        }));
        if boxes.iter().all(|b| !b.overlaps(&candidate)) {
            boxes.push(candidate);
        }
    }
    Ok(boxes)
}

/// Model built from a [`PlantedSpec`].
#[derive(Debug, Clone)]
pub struct PlantedModel {
    spec: PlantedSpec,
    /// Orthogonal encoder matrix, `d × d`.
    encoder: Matrix,
    encoder_bias: Vec<f64>,
    posterior_var: Vec<f64>,
    /// Linear part of the base map, `k × d`.
    weights: Matrix,
    phase: f64,
    training: Matrix,
    code_stds: Vec<f64>,
}

impl PlantedModel {
    pub fn new(spec: PlantedSpec) -> Result<Self> {
        spec.validate()?;
        let (d, k, n) = (spec.latent_dim, spec.output_dim, spec.training_size);
        let mut rng = SeededRng::new(spec.seed);

        let mut code_stds: Vec<f64> =
            (0..d).map(|j| if d == 1 { 1.0 } else { 1.0 - 0.5 * j as f64 / (d - 1) as f64 }).collect();
        rng.shuffle(&mut code_stds);
        let codes = diagonal_codes(n, &code_stds, &mut rng);

        let encoder = random_orthogonal(d, &mut rng);
        let encoder_bias = rng.normals(d);
        let posterior_var: Vec<f64> = (0..d).map(|_| rng.uniform_in(0.8, 1.2).powi(2)).collect();

        // x = Aᵀ(z − b), so that A x + b recovers z
        let mut training = Matrix::zeros(n, d);
        for i in 0..n {
            let centred: Vec<f64> = codes.row(i).iter().zip(&encoder_bias).map(|(z, b)| z - b).collect();
            training.row_mut(i).copy_from_slice(&encoder.tmul_vec(&centred)?);
        }

        let per_entry = spec.gain / k as f64;
        let mut weights = Matrix::zeros(k, d);
        for r in 0..k {
            for j in 0..d {
                let sign = if r == 0 || rng.uniform() < 0.5 { 1.0 } else { -1.0 };
                weights[(r, j)] = sign * per_entry;
            }
        }
        let phase = rng.uniform_in(0.0, std::f64::consts::TAU);
        Ok(PlantedModel { spec, encoder, encoder_bias, posterior_var, weights, phase, training, code_stds })
    }

    pub fn spec(&self) -> &PlantedSpec {
        &self.spec
    }

    /// Population std of each latent coordinate over the training codes.
    pub fn code_stds(&self) -> &[f64] {
        &self.code_stds
    }

    /// The continuous part of the decoder.
    pub fn base(&self, z: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = self.weights.iter_rows().map(|w| dot(w, z)).collect();
        if self.spec.sinusoid_amplitude > 0.0 {
            let s: f64 = z.iter().sum::<f64>() / (z.len() as f64).sqrt();
            out[0] += self.spec.sinusoid_amplitude * (self.spec.sinusoid_frequency * s + self.phase).sin();
        }
        out
    }

    /// Index of the hole box containing `z`, if any.
    pub fn hole_index(&self, z: &[f64]) -> Option<usize> {
        self.spec.boxes.iter().position(|b| b.contains(z))
    }

    pub fn in_hole(&self, z: &[f64]) -> bool {
        self.hole_index(z).is_some()
    }

    pub fn in_dilated_hole(&self, z: &[f64], margin: f64) -> bool {
        self.spec.boxes.iter().any(|b| b.contains_dilated(z, margin))
    }

    /// Upper bound on the L1-over-Euclidean ratio of the base map.
    pub fn lipschitz_bound(&self) -> f64 {
        let linear: f64 = self.weights.iter_rows().map(norm2).sum();
        linear + self.spec.sinusoid_amplitude * self.spec.sinusoid_frequency.abs()
    }

    pub fn decode_point(&self, z: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.spec.latent_dim, z.len())?;
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::DecoderFailure { point: z.to_vec(), message: "non-finite latent".into() });
        }
        let mut out = self.base(z);
        if self.in_hole(z) {
            out.iter_mut().for_each(|v| *v += self.spec.offset);
        }
        Ok(out)
    }
}

impl ModelOracle for PlantedModel {
    fn latent_dim(&self) -> usize {
        self.spec.latent_dim
    }

    fn training_set(&self) -> &Matrix {
        &self.training
    }

    fn encode(&self, x: &[f64]) -> Result<DiagGaussian> {
        let mut mean = self.encoder.mul_vec(x)?;
        mean.iter_mut().zip(&self.encoder_bias).for_each(|(m, b)| *m += b);
        Ok(DiagGaussian { mean, var: self.posterior_var.clone() })
    }

    fn decode(&self, z: &[f64]) -> Result<SampleDistribution> {
        SampleDistribution::point(&self.decode_point(z)?)
    }
}

/// `n × d` codes with zero column means, orthogonal columns and column stds `stds`.
fn diagonal_codes(n: usize, stds: &[f64], rng: &mut SeededRng) -> Matrix {
    let d = stds.len();
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(d);
    let ones = vec![1.0 / (n as f64).sqrt(); n];
    while cols.len() < d {
        let mut c = rng.normals(n);
        // orthogonal to the constant vector and to earlier columns
        for basis in std::iter::once(&ones).chain(cols.iter()) {
            let nb = dot(basis, basis);
            let proj = dot(&c, basis) / nb;
            c.iter_mut().zip(basis).for_each(|(v, b)| *v -= proj * b);
        }
        let norm = norm2(&c);
        if norm < 1e-8 {
            continue;
        }
        let scale = stds[cols.len()] * (n as f64).sqrt() / norm;
        c.iter_mut().for_each(|v| *v *= scale);
        cols.push(c);
    }
    let mut m = Matrix::zeros(n, d);
    for (j, c) in cols.iter().enumerate() {
        for i in 0..n {
            m[(i, j)] = c[i];
        }
    }
    m
}

/// Gram–Schmidt orthonormalization of a Gaussian matrix; rows are orthonormal.
fn random_orthogonal(d: usize, rng: &mut SeededRng) -> Matrix {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(d);
    while rows.len() < d {
        let mut v = rng.normals(d);
        for _ in 0..2 {
            for r in &rows {
                let p = dot(&v, r);
                v.iter_mut().zip(r).for_each(|(a, b)| *a -= p * b);
            }
        }
        let n = norm2(&v);
        if n < 1e-8 {
            continue;
        }
        v.iter_mut().for_each(|a| *a /= n);
        rows.push(v);
    }
    Matrix::from_rows(&rows).expect("finite rows")
}
