use std::collections::HashSet;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::ModelOracle;
use crate::numerics::{Matrix, SeededRng};
use crate::pca::PcaModel;
use crate::tdc::{
    build_fence, enumerate_paths, evaluate_path, interpolation_interval, outlier_fence_floored, Fence, IndicatorTrace,
};
use crate::transport::SinkhornConfig;

/// Full parameterization of one search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Latent dimension of the model.
    pub d: usize,
    /// Number of principal axes spanning the search space.
    pub d_r: usize,
    /// Halting threshold on the number of holes.
    pub n_hole: usize,
    /// Sampling step as a multiple of the smallest training posterior std.
    pub interval_multiplier: f64,
    pub iqr_k: f64,
    /// Lower bound on the IQR as a fraction of `|Q3|`.
    pub min_relative_spread: f64,
    /// Pool size below which classification is postponed.
    pub warmup_pool: usize,
    /// Path budget; `None` means `10 · n_hole`.
    pub max_paths: Option<usize>,
    pub seed: u64,
    pub sinkhorn: SinkhornConfig,
    /// Evaluation threads; 0 uses the available parallelism. Never affects results.
    #[serde(skip)]
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            d: 32,
            d_r: 3,
            n_hole: 200,
            interval_multiplier: 0.01,
            iqr_k: 1.5,
            min_relative_spread: 1e-6,
            warmup_pool: 50,
            max_paths: None,
            seed: 0,
            sinkhorn: SinkhornConfig::default(),
            workers: 0,
        }
    }
}

impl RunConfig {
    pub fn new(d: usize, d_r: usize, n_hole: usize) -> Self {
        RunConfig { d, d_r, n_hole, ..Default::default() }
    }

    pub fn path_budget(&self) -> usize {
        self.max_paths.unwrap_or(10 * self.n_hole)
    }

    /// Copy with every optional field filled in.
    pub fn resolved(&self) -> RunConfig {
        RunConfig { max_paths: Some(self.path_budget()), ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.d_r == 0 || self.d_r > self.d {
            return bad("d_r must lie in 1..=d");
        }
        if self.n_hole == 0 {
            return bad("n_hole must be at least 1");
        }
        if !(self.interval_multiplier > 0.0) {
            return bad("interval_multiplier must be positive");
        }
        if !(self.iqr_k >= 0.0) || !(self.min_relative_spread >= 0.0) {
            return bad("iqr_k and min_relative_spread must be nonnegative");
        }
        if self.warmup_pool < 4 {
            return bad("warmup_pool must be at least 4");
        }
        if self.path_budget() == 0 {
            return bad("max_paths must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoleRecord {
    /// Latent vector, `inverse_transform(z_reduced)`.
    pub z: Vec<f64>,
    pub z_reduced: Vec<f64>,
    pub indicator: f64,
    /// Outlier bound in force when the point was classified.
    pub fence_bound: f64,
    pub path_id: usize,
    pub depth: usize,
    pub tree_id: usize,
    pub discovery_index: usize,
    pub axis: usize,
    /// Sample index along the path.
    pub point_index: usize,
    /// First later sample on the same path that was not flagged, as a latent vector.
    pub norm_neighbor: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RunStatus {
    Halted,
    Exhausted,
}

/// One row of `trace.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub path_id: usize,
    pub depth: usize,
    pub tree_id: usize,
    pub point_index: usize,
    /// Distance from the path start along its axis.
    pub arc_position: f64,
    pub indicator: f64,
    pub is_outlier: bool,
}

/// Run facts that vary between identical invocations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub wall_time_secs: f64,
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub status: RunStatus,
    pub holes: Vec<HoleRecord>,
    pub paths_traversed: usize,
    /// Paths evaluated up to and including the one holding the `n_hole`-th hole.
    pub paths_to_halt: Option<usize>,
    pub max_depth_reached: usize,
    /// Fresh roots drawn after the first tree emptied its hubs.
    pub restarts: usize,
    pub points_evaluated: usize,
    /// Traversed paths too short to hold two samples.
    pub short_paths: usize,
    /// Returned holes on each traversed path, indexed by `path_id`.
    pub hole_counts: Vec<usize>,
    pub interval: f64,
    pub fence: Fence,
    pub pca: PcaModel,
    pub training_size: usize,
    pub config: RunConfig,
    pub meta: RunMeta,
}

impl RunReport {
    /// The report without its `meta` block, for reproducibility comparisons.
    pub fn without_meta(&self) -> RunReport {
        RunReport { meta: RunMeta { wall_time_secs: 0.0, workers: 0 }, ..self.clone() }
    }
}

/// Encoded training set and the derived search geometry.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub pca: PcaModel,
    pub fence: Fence,
    pub interval: f64,
    /// Posterior means of the training set, one row per sample.
    pub means: Matrix,
    pub stds: Matrix,
}

/// Encodes the training set, fits the projection, draws the fence and the step size.
pub fn prepare(config: &RunConfig, model: &dyn ModelOracle, rng: &mut SeededRng) -> Result<Prepared> {
    config.validate()?;
    if model.latent_dim() != config.d {
        return Err(Error::DimensionMismatch { expected: config.d, got: model.latent_dim() });
    }
    let data = model.training_set();
    let n = data.rows();
    if n == 0 {
        return Err(Error::EmptyData { needed: 1, got: 0 });
    }
    let mut means = Matrix::zeros(n, config.d);
    let mut stds = Matrix::zeros(n, config.d);
    for (i, x) in data.iter_rows().enumerate() {
        let g = model.encode(x)?;
        if g.dim() != config.d {
            return Err(Error::DimensionMismatch { expected: config.d, got: g.dim() });
        }
        means.row_mut(i).copy_from_slice(&g.mean);
        stds.row_mut(i).copy_from_slice(&g.std());
    }
    let pca = PcaModel::fit(&means, config.d_r)?;
    let reduced = pca.transform_all(&means)?;
    let fence = build_fence(&reduced, config.d_r, rng)?;
    let interval = interpolation_interval(&stds, config.interval_multiplier)?;
    Ok(Prepared { pca, fence, interval, means, stds })
}

pub fn run_tdc(config: &RunConfig, model: &dyn ModelOracle) -> Result<RunReport> {
    Ok(Search::new(config, model, false)?.run()?.0)
}

/// Like [`run_tdc`], also returning every scored point.
pub fn run_tdc_traced(config: &RunConfig, model: &dyn ModelOracle) -> Result<(RunReport, Vec<TraceRow>)> {
    Search::new(config, model, true)?.run()
}

struct Pending {
    path_id: usize,
    depth: usize,
    tree_id: usize,
    trace: IndicatorTrace,
}

struct Search<'a> {
    config: RunConfig,
    model: &'a dyn ModelOracle,
    prep: Prepared,
    rng: SeededRng,
    keep_trace: bool,
    rows: Vec<TraceRow>,
    pool: Vec<f64>,
    pending: Vec<Pending>,
    holes: Vec<HoleRecord>,
    hubs: Vec<Vec<f64>>,
    points_evaluated: usize,
    paths_traversed: usize,
    short_paths: usize,
}

impl<'a> Search<'a> {
    fn new(config: &RunConfig, model: &'a dyn ModelOracle, keep_trace: bool) -> Result<Self> {
        let config = config.resolved();
        let mut rng = SeededRng::new(config.seed);
        let prep = prepare(&config, model, &mut rng)?;
        Ok(Search {
            config,
            model,
            prep,
            rng,
            keep_trace,
            rows: Vec::new(),
            pool: Vec::new(),
            pending: Vec::new(),
            holes: Vec::new(),
            hubs: Vec::new(),
            points_evaluated: 0,
            paths_traversed: 0,
            short_paths: 0,
        })
    }

    fn run(mut self) -> Result<(RunReport, Vec<TraceRow>)> {
        let started = Instant::now();
        let workers = if self.config.workers == 0 {
            std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
        } else {
            self.config.workers
        };
        let threads = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
        let budget = self.config.path_budget();
        let mut visited = HashSet::new();
        let mut depth = 0;
        let mut tree_id = 0;
        let mut restarts = 0;
        let mut max_depth = 0;
        let mut started_tree = false;

        while self.holes.len() < self.config.n_hole && self.paths_traversed < budget {
            if self.hubs.is_empty() {
                if started_tree {
                    tree_id += 1;
                    restarts += 1;
                }
                started_tree = true;
                depth = 0;
                self.hubs.push(self.prep.fence.sample(&mut self.rng));
            }
            let hubs = std::mem::take(&mut self.hubs);
            let mut paths = enumerate_paths(&hubs, &self.prep.fence, &mut visited)?;
            paths.truncate(budget - self.paths_traversed);
            log::debug!("tree {tree_id} depth {depth}: {} hubs, {} paths", hubs.len(), paths.len());
            if paths.is_empty() {
                continue;
            }

            let (interval, pca, model, sinkhorn) =
                (self.prep.interval, &self.prep.pca, self.model, &self.config.sinkhorn);
            // a fence side shorter than the step holds no pair; such a path counts as
            // traversed but contributes nothing
            let traces: Vec<Option<IndicatorTrace>> = threads.install(|| {
                paths
                    .par_iter()
                    .map(|p| match evaluate_path(p, interval, pca, model, sinkhorn) {
                        Ok(t) => Ok(Some(t)),
                        Err(Error::PathTooShort { .. }) => Ok(None),
                        Err(e) => Err(e),
                    })
                    .collect::<Result<Vec<_>>>()
            })?;
            max_depth = max_depth.max(depth);
            for trace in traces {
                let Some(trace) = trace else {
                    self.short_paths += 1;
                    self.paths_traversed += 1;
                    continue;
                };
                self.pool.extend_from_slice(&trace.values);
                self.points_evaluated += trace.positions.len();
                self.pending.push(Pending { path_id: self.paths_traversed, depth, tree_id, trace });
                self.paths_traversed += 1;
            }
            if self.pool.len() >= self.config.warmup_pool {
                self.classify_pending()?;
            }
            log::info!(
                "tree {tree_id} depth {depth}: {} paths so far, {} holes",
                self.paths_traversed,
                self.holes.len()
            );
            depth += 1;
        }

        // anything still waiting for the warmup pool is reported unflagged
        for p in std::mem::take(&mut self.pending) {
            self.record_rows(&p, &[]);
        }

        let n_hole = self.config.n_hole;
        let status = if self.holes.len() >= n_hole { RunStatus::Halted } else { RunStatus::Exhausted };
        self.holes.truncate(n_hole);
        let paths_to_halt = match status {
            RunStatus::Halted => Some(self.holes[n_hole - 1].path_id + 1),
            RunStatus::Exhausted => None,
        };
        let mut hole_counts = vec![0; self.paths_traversed];
        for h in &self.holes {
            hole_counts[h.path_id] += 1;
        }
        let report = RunReport {
            status,
            holes: self.holes,
            paths_traversed: self.paths_traversed,
            paths_to_halt,
            max_depth_reached: max_depth,
            restarts,
            points_evaluated: self.points_evaluated,
            short_paths: self.short_paths,
            hole_counts,
            interval: self.prep.interval,
            fence: self.prep.fence,
            pca: self.prep.pca,
            training_size: self.model.training_set().rows(),
            config: self.config,
            meta: RunMeta { wall_time_secs: started.elapsed().as_secs_f64(), workers },
        };
        Ok((report, self.rows))
    }

    /// Classifies every waiting trace against the current pool, in path order.
    fn classify_pending(&mut self) -> Result<()> {
        let bound = outlier_fence_floored(&self.pool, self.config.iqr_k, self.config.min_relative_spread)?;
        for p in std::mem::take(&mut self.pending) {
            let flagged: Vec<usize> = (0..p.trace.values.len()).filter(|&i| p.trace.values[i] > bound).collect();
            for (k, &i) in flagged.iter().enumerate() {
                let z_reduced = p.trace.reduced_point(i);
                let z = self.prep.pca.inverse_transform(&z_reduced)?;
                let successor = next_unflagged(&flagged[k + 1..], i, p.trace.positions.len());
                let norm_neighbor = match successor {
                    Some(j) => Some(self.prep.pca.inverse_transform(&p.trace.reduced_point(j))?),
                    None => None,
                };
                self.hubs.push(z_reduced.clone());
                self.holes.push(HoleRecord {
                    z,
                    z_reduced,
                    indicator: p.trace.values[i],
                    fence_bound: bound,
                    path_id: p.path_id,
                    depth: p.depth,
                    tree_id: p.tree_id,
                    discovery_index: self.holes.len(),
                    axis: p.trace.path.axis,
                    point_index: i,
                    norm_neighbor,
                });
            }
            self.record_rows(&p, &flagged);
        }
        Ok(())
    }

    fn record_rows(&mut self, p: &Pending, flagged: &[usize]) {
        if !self.keep_trace {
            return;
        }
        let start = p.trace.path.start;
        for (i, &v) in p.trace.values.iter().enumerate() {
            self.rows.push(TraceRow {
                path_id: p.path_id,
                depth: p.depth,
                tree_id: p.tree_id,
                point_index: i,
                arc_position: p.trace.positions[i] - start,
                indicator: v,
                is_outlier: flagged.binary_search(&i).is_ok(),
            });
        }
    }
}

/// First sample after `i` that is not in `later_flags` (sorted flags beyond `i`).
fn next_unflagged(later_flags: &[usize], i: usize, n_points: usize) -> Option<usize> {
    let mut j = i + 1;
    for &f in later_flags {
        if f == j {
            j += 1;
        } else {
            break;
        }
    }
    (j < n_points).then_some(j)
}
