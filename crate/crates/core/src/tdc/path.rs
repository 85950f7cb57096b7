use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::indicators::lipschitz_indicator;
use crate::models::ModelOracle;
use crate::numerics::euclidean;
use crate::pca::PcaModel;
use crate::tdc::Fence;
use crate::transport::{SampleDistribution, SinkhornConfig};

const KEY_RESOLUTION: f64 = 1e-9;
/// A trailing segment shorter than this fraction of the interval is dropped.
const MIN_TAIL_FRACTION: f64 = 0.1;

/// Identity of an axis-parallel line: its axis plus the other coordinates rounded to `1e-9`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PathKey {
    pub axis: usize,
    pub coords: Vec<i64>,
}

impl PathKey {
    pub fn new(hub: &[f64], axis: usize) -> Self {
        let coords = hub
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != axis)
            .map(|(_, &v)| (v / KEY_RESOLUTION).round() as i64)
            .collect();
        PathKey { axis, coords }
    }
}

/// Segment through `hub` parallel to `axis`, clipped to the fence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub hub: Vec<f64>,
    pub axis: usize,
    /// Axis coordinates of the two endpoints.
    pub start: f64,
    pub end: f64,
}

impl Path {
    pub fn key(&self) -> PathKey {
        PathKey::new(&self.hub, self.axis)
    }

    pub fn length(&self) -> f64 {
        self.end - self.start
    }

    /// Reduced point at axis coordinate `t`.
    pub fn point_at(&self, t: f64) -> Vec<f64> {
        let mut p = self.hub.clone();
        p[self.axis] = t;
        p
    }
}

/// One segment per hub and axis, skipping lines already in `visited` (which is updated).
///
/// Output order is hub order, then axis index.
pub fn enumerate_paths(hubs: &[Vec<f64>], fence: &Fence, visited: &mut HashSet<PathKey>) -> Result<Vec<Path>> {
    let mut out = Vec::new();
    for (index, hub) in hubs.iter().enumerate() {
        if !fence.contains(hub) {
            return Err(Error::HubOutsideFence { index });
        }
        for axis in 0..fence.dim() {
            if visited.insert(PathKey::new(hub, axis)) {
                out.push(Path { hub: hub.clone(), axis, start: fence.lo[axis], end: fence.hi[axis] });
            }
        }
    }
    Ok(out)
}

/// Axis coordinates sampled from `start` to `end` at `interval`, endpoint included.
///
/// The endpoint is appended when the remaining segment is at least a tenth of the
/// interval; otherwise the last regular sample stands in for it.
pub fn sample_positions(start: f64, end: f64, interval: f64) -> Result<Vec<f64>> {
    let length = end - start;
    if !(interval > 0.0) || !(length >= interval * (1.0 - 1e-9)) {
        return Err(Error::PathTooShort { length, interval });
    }
    let steps = (length / interval + 1e-9).floor() as usize;
    let mut out: Vec<f64> = (0..=steps).map(|j| start + j as f64 * interval).collect();
    if let Some(last) = out.last_mut() {
        if *last > end {
            *last = end;
        }
    }
    if end - start - steps as f64 * interval >= MIN_TAIL_FRACTION * interval {
        out.push(end);
    }
    if out.len() < 2 {
        return Err(Error::PathTooShort { length, interval });
    }
    Ok(out)
}

/// Lipschitz indicator series along one path.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorTrace {
    pub path: Path,
    /// Axis coordinate of every sample, in path order.
    pub positions: Vec<f64>,
    /// `values[i]` belongs to the pair `(i, i + 1)`.
    pub values: Vec<f64>,
}

impl IndicatorTrace {
    pub fn reduced_point(&self, i: usize) -> Vec<f64> {
        self.path.point_at(self.positions[i])
    }
}

fn decode_at(model: &dyn ModelOracle, z: &[f64]) -> Result<SampleDistribution> {
    model.decode(z).map_err(|e| match e {
        e @ Error::DecoderFailure { .. } => e,
        other => Error::DecoderFailure { point: z.to_vec(), message: other.to_string() },
    })
}

/// Samples `path`, lifts each sample to the latent space, decodes it, and scores every
/// consecutive pair.
pub fn evaluate_path(
    path: &Path,
    interval: f64,
    pca: &PcaModel,
    model: &dyn ModelOracle,
    sinkhorn: &SinkhornConfig,
) -> Result<IndicatorTrace> {
    let positions = sample_positions(path.start, path.end, interval)?;
    let mut values = Vec::with_capacity(positions.len() - 1);
    let mut prev_z = pca.inverse_transform(&path.point_at(positions[0]))?;
    let mut prev_out = decode_at(model, &prev_z)?;
    for (i, &t) in positions.iter().enumerate().skip(1) {
        let z = pca.inverse_transform(&path.point_at(t))?;
        let out = decode_at(model, &z)?;
        let d_sample = sinkhorn.distance(&prev_out, &out)?;
        values.push(lipschitz_indicator(d_sample, euclidean(&prev_z, &z), i - 1)?.value);
        prev_z = z;
        prev_out = out;
    }
    Ok(IndicatorTrace { path: path.clone(), positions, values })
}
