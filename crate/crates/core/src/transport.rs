//! Wasserstein-1 distance between decoder outputs.
//!
//! Decoder outputs are finite weighted point sets ([`SampleDistribution`]). The ground
//! cost between support points is the L1 distance. [`sinkhorn_w1`] solves the
//! entropy-regularized problem with log-domain Sinkhorn scaling and reports the
//! transport cost of the resulting plan; [`exact_w1_small`] solves the unregularized
//! linear program exactly for small instances and serves as its oracle.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::numerics::{manhattan, median, Matrix};

const WEIGHT_SUM_TOL: f64 = 1e-9;

/// A finite weighted point set in an output embedding space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleDistribution {
    /// `S × k` support points.
    pub support: Matrix,
    pub weights: Vec<f64>,
}

impl SampleDistribution {
    pub fn new(support: Matrix, weights: Vec<f64>) -> Result<Self> {
        if support.rows() == 0 {
            return Err(Error::InvalidDistribution("empty support"));
        }
        check_dim(support.rows(), weights.len())?;
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidDistribution("weights must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidDistribution("weights must sum to one"));
        }
        Ok(SampleDistribution { support, weights })
    }

    pub fn uniform(support: Matrix) -> Result<Self> {
        let s = support.rows();
        SampleDistribution::new(support, vec![1.0 / s.max(1) as f64; s])
    }

    pub fn point(x: &[f64]) -> Result<Self> {
        SampleDistribution::new(Matrix::from_vec(1, x.len(), x.to_vec())?, vec![1.0])
    }

    pub fn len(&self) -> usize {
        self.support.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.support.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.support.cols()
    }

    /// Weighted mean of the support.
    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim()];
        for (r, &w) in self.support.iter_rows().zip(&self.weights) {
            m.iter_mut().zip(r).for_each(|(a, &x)| *a += w * x);
        }
        m
    }
}

/// Pairwise L1 distances between the supports of `p` and `q`.
pub fn ground_cost(p: &SampleDistribution, q: &SampleDistribution) -> Result<Matrix> {
    check_dim(p.dim(), q.dim())?;
    let mut c = Matrix::zeros(p.len(), q.len());
    for (i, a) in p.support.iter_rows().enumerate() {
        for (j, b) in q.support.iter_rows().enumerate() {
            c[(i, j)] = manhattan(a, b);
        }
    }
    Ok(c)
}

/// Sinkhorn solver settings. `eps: None` selects `eps_scale · median(C)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SinkhornConfig {
    pub eps: Option<f64>,
    pub eps_scale: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for SinkhornConfig {
    fn default() -> Self {
        SinkhornConfig { eps: None, eps_scale: 0.01, max_iter: 100_000, tol: 1e-6 }
    }
}

impl SinkhornConfig {
    /// Regularization strength used for the cost matrix `c`.
    pub fn resolve_eps(&self, c: &Matrix) -> f64 {
        if let Some(eps) = self.eps {
            return eps;
        }
        let med = median(c.as_slice()).unwrap_or(0.0);
        let scale = if med > 0.0 { med } else { c.as_slice().iter().sum::<f64>() / c.as_slice().len().max(1) as f64 };
        self.eps_scale * scale
    }

    pub fn distance(&self, p: &SampleDistribution, q: &SampleDistribution) -> Result<f64> {
        let c = ground_cost(p, q)?;
        if p == q || c.as_slice().iter().all(|&v| v == 0.0) {
            return Ok(0.0);
        }
        // a single feasible plan: nothing to regularize
        if p.len() == 1 || q.len() == 1 {
            return Ok(single_plan_cost(p, q, &c));
        }
        sinkhorn_cost(&p.weights, &q.weights, &c, self.resolve_eps(&c), self.max_iter, self.tol)
    }
}

fn single_plan_cost(p: &SampleDistribution, q: &SampleDistribution, c: &Matrix) -> f64 {
    let mut total = 0.0;
    for (i, &a) in p.weights.iter().enumerate() {
        for (j, &b) in q.weights.iter().enumerate() {
            total += a * b * c[(i, j)];
        }
    }
    total
}

/// Entropic transport cost `⟨Γ, C⟩` of the Sinkhorn plan between `p` and `q`.
pub fn sinkhorn_w1(p: &SampleDistribution, q: &SampleDistribution, eps: f64, max_iter: usize, tol: f64) -> Result<f64> {
    if !(eps > 0.0 && eps.is_finite()) || max_iter == 0 || !(tol > 0.0) {
        return Err(Error::InvalidConfig("sinkhorn needs eps > 0, max_iter >= 1, tol > 0".into()));
    }
    let c = ground_cost(p, q)?;
    sinkhorn_cost(&p.weights, &q.weights, &c, eps, max_iter, tol)
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Log-domain Sinkhorn iterations; returns the transport cost of the final plan.
fn sinkhorn_cost(a: &[f64], b: &[f64], c: &Matrix, eps: f64, max_iter: usize, tol: f64) -> Result<f64> {
    // zero-weight support points carry no mass and would produce log(0)
    let rows: Vec<usize> = (0..a.len()).filter(|&i| a[i] > 0.0).collect();
    let cols: Vec<usize> = (0..b.len()).filter(|&j| b[j] > 0.0).collect();
    let mut state = Potentials {
        log_a: rows.iter().map(|&i| a[i].ln()).collect(),
        log_b: cols.iter().map(|&j| b[j].ln()).collect(),
        a: rows.iter().map(|&i| a[i]).collect(),
        cost: Matrix::from_vec(
            rows.len(),
            cols.len(),
            rows.iter().flat_map(|&i| cols.iter().map(move |&j| c[(i, j)])).collect(),
        )?,
        f: vec![0.0; rows.len()],
        g: vec![0.0; cols.len()],
    };

    let mut used = 0;
    let mut violation = f64::INFINITY;
    while used < max_iter {
        used += 1;
        violation = state.sweep(eps)?;
        if violation <= tol {
            return state.transport_cost(eps);
        }
    }
    Err(Error::NoConvergence { iterations: max_iter, violation })
}

struct Potentials {
    log_a: Vec<f64>,
    log_b: Vec<f64>,
    a: Vec<f64>,
    cost: Matrix,
    f: Vec<f64>,
    g: Vec<f64>,
}

impl Potentials {
    /// One row and one column update; returns the L1 row-marginal violation.
    fn sweep(&mut self, eps: f64) -> Result<f64> {
        let (n, m) = self.cost.shape();
        for i in 0..n {
            let row = self.cost.row(i);
            let lse = log_sum_exp((0..m).map(|j| (self.g[j] - row[j]) / eps));
            if !lse.is_finite() {
                return Err(Error::NumericalUnderflow);
            }
            self.f[i] = eps * (self.log_a[i] - lse);
        }
        for j in 0..m {
            let lse = log_sum_exp((0..n).map(|i| (self.f[i] - self.cost[(i, j)]) / eps));
            if !lse.is_finite() {
                return Err(Error::NumericalUnderflow);
            }
            self.g[j] = eps * (self.log_b[j] - lse);
        }
        // columns now match exactly; measure the row marginal
        let mut violation = 0.0;
        for i in 0..n {
            let row = self.cost.row(i);
            let mass: f64 = (0..m).map(|j| ((self.f[i] + self.g[j] - row[j]) / eps).exp()).sum();
            violation += (mass - self.a[i]).abs();
        }
        Ok(violation)
    }

    fn transport_cost(&self, eps: f64) -> Result<f64> {
        let mut total = 0.0;
        for (i, row) in self.cost.iter_rows().enumerate() {
            for (j, &cij) in row.iter().enumerate() {
                total += ((self.f[i] + self.g[j] - cij) / eps).exp() * cij;
            }
        }
        if !total.is_finite() {
            return Err(Error::NumericalUnderflow);
        }
        Ok(total.max(0.0))
    }
}

/// Largest `S_p · S_q` accepted by [`exact_w1_small`].
pub const EXACT_LIMIT: usize = 64;

/// Exact optimal transport cost by successive shortest augmenting paths.
pub fn exact_w1_small(p: &SampleDistribution, q: &SampleDistribution) -> Result<f64> {
    if p.len() * q.len() > EXACT_LIMIT {
        return Err(Error::InstanceTooLarge { rows: p.len(), cols: q.len(), limit: EXACT_LIMIT });
    }
    let c = ground_cost(p, q)?;
    Ok(min_cost_transport(&p.weights, &q.weights, &c))
}

fn min_cost_transport(a: &[f64], b: &[f64], c: &Matrix) -> f64 {
    const EPS: f64 = 1e-14;
    let (m, n) = (a.len(), b.len());
    // nodes: 0 = source, 1..=m supply, m+1..=m+n demand, m+n+1 = sink
    let sink = m + n + 1;
    let node_count = m + n + 2;
    struct Arc {
        to: usize,
        cap: f64,
        cost: f64,
    }
    let mut arcs: Vec<Arc> = Vec::new();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); node_count];
    let add = |arcs: &mut Vec<Arc>, adj: &mut Vec<Vec<usize>>, from: usize, to: usize, cap: f64, cost: f64| {
        adj[from].push(arcs.len());
        arcs.push(Arc { to, cap, cost });
        adj[to].push(arcs.len());
        arcs.push(Arc { to: from, cap: 0.0, cost: -cost });
    };
    for (i, &ai) in a.iter().enumerate() {
        add(&mut arcs, &mut adj, 0, 1 + i, ai, 0.0);
    }
    for i in 0..m {
        for j in 0..n {
            add(&mut arcs, &mut adj, 1 + i, 1 + m + j, f64::INFINITY, c[(i, j)]);
        }
    }
    for (j, &bj) in b.iter().enumerate() {
        add(&mut arcs, &mut adj, 1 + m + j, sink, bj, 0.0);
    }

    let mut total_cost = 0.0;
    loop {
        // Bellman-Ford over the residual graph
        let mut dist = vec![f64::INFINITY; node_count];
        let mut via: Vec<Option<usize>> = vec![None; node_count];
        dist[0] = 0.0;
        for _ in 0..node_count {
            let mut changed = false;
            for u in 0..node_count {
                if dist[u] == f64::INFINITY {
                    continue;
                }
                for &e in &adj[u] {
                    let arc = &arcs[e];
                    if arc.cap > EPS && dist[u] + arc.cost < dist[arc.to] - 1e-15 {
                        dist[arc.to] = dist[u] + arc.cost;
                        via[arc.to] = Some(e);
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        if dist[sink] == f64::INFINITY {
            break;
        }
        let mut push = f64::INFINITY;
        let mut v = sink;
        while let Some(e) = via[v] {
            push = push.min(arcs[e].cap);
            v = arcs[e ^ 1].to;
        }
        if push <= EPS {
            break;
        }
        let mut v = sink;
        while let Some(e) = via[v] {
            arcs[e].cap -= push;
            arcs[e ^ 1].cap += push;
            v = arcs[e ^ 1].to;
        }
        total_cost += push * dist[sink];
    }
    total_cost
}
