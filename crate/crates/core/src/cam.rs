//! Causal additive model (CAM) structure learning on single-level data.
//!
//! Three stages: preliminary neighbourhood selection, greedy edge addition
//! under the Gaussian additive-SEM likelihood, and significance pruning.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gam::{fit_additive, Predictor, SmoothSpec};
use crate::graph::{Dag, NodeCounts, NodeId};
use crate::stats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CamConfig {
    /// Cap on candidate parents kept per node by neighbourhood selection.
    pub pns_max_parents: usize,
    pub prune_alpha: f64,
    pub score_spec: SmoothSpec,
    pub max_edges: Option<usize>,
    /// An edge is added only if its log-likelihood gain exceeds this
    /// multiple of the sample size.
    pub gain_threshold: f64,
    pub min_obs: usize,
}

impl Default for CamConfig {
    fn default() -> Self {
        CamConfig {
            pns_max_parents: 10,
            prune_alpha: 0.001,
            score_spec: SmoothSpec::default(),
            max_edges: None,
            gain_threshold: 1e-3,
            min_obs: 10,
        }
    }
}

impl CamConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pns_max_parents < 1 {
            return Err(Error::usage("pns_max_parents must be at least 1"));
        }
        if !(self.prune_alpha > 0.0 && self.prune_alpha < 1.0) {
            return Err(Error::usage("prune_alpha must lie in (0, 1)"));
        }
        self.score_spec.validate()
    }
}

/// Columns of a single-level data matrix; node `k` is `NodeId::x(k)`.
pub type Columns = [Vec<f64>];

fn counts(p: usize) -> NodeCounts {
    NodeCounts {
        x: p,
        ..Default::default()
    }
}

fn check_data(data: &Columns, config: &CamConfig) -> Result<usize> {
    config.validate()?;
    let n = data.first().map_or(0, Vec::len);
    if data.iter().any(|c| c.len() != n) {
        return Err(Error::usage("columns have different lengths"));
    }
    if data.len() >= 2 && n < config.min_obs {
        return Err(Error::usage(format!(
            "{n} observations, at least {} required",
            config.min_obs
        )));
    }
    for (k, col) in data.iter().enumerate() {
        if stats::unique_sorted(col).len() < 2 {
            return Err(Error::usage(format!("variable {} is constant", NodeId::x(k))));
        }
    }
    Ok(n)
}

/// Candidate parent sets: for each node, the `pns_max_parents` others with
/// the largest contribution in a joint additive regression, closed under
/// symmetry.
pub fn preliminary_neighborhood(data: &Columns, config: &CamConfig) -> Result<Vec<BTreeSet<usize>>> {
    check_data(data, config)?;
    let p = data.len();
    let mut cand: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); p];
    if p < 2 {
        return Ok(cand);
    }
    for k in 0..p {
        let others: Vec<usize> = (0..p).filter(|&j| j != k).collect();
        if others.len() <= config.pns_max_parents {
            cand[k].extend(others);
            continue;
        }
        let preds: Vec<Predictor<'_>> = others
            .iter()
            .map(|&j| Predictor::smooth(NodeId::x(j), &data[j]))
            .collect();
        let fit = fit_additive(&data[k], &preds, None, &config.score_spec)?;
        let mut ranked: Vec<(usize, f64)> = others.iter().zip(&fit.terms).map(|(&j, t)| (j, t.statistic)).collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        cand[k].extend(ranked.iter().take(config.pns_max_parents).map(|r| r.0));
    }
    for k in 0..p {
        for j in cand[k].clone() {
            cand[j].insert(k);
        }
    }
    Ok(cand)
}

/// Memoized node scores `log(sigma^2)` of a node given a parent set.
struct Scorer<'a> {
    data: &'a Columns,
    spec: &'a SmoothSpec,
    cache: BTreeMap<(usize, Vec<usize>), f64>,
}

impl<'a> Scorer<'a> {
    fn log_var(&mut self, node: usize, parents: &BTreeSet<usize>) -> Result<f64> {
        let key = (node, parents.iter().copied().collect::<Vec<_>>());
        if let Some(v) = self.cache.get(&key) {
            return Ok(*v);
        }
        let v = if parents.is_empty() {
            libm::log(stats::pop_variance(&self.data[node]))
        } else {
            let preds: Vec<Predictor<'_>> = parents
                .iter()
                .map(|&j| Predictor::smooth(NodeId::x(j), &self.data[j]))
                .collect();
            let fit = fit_additive(&self.data[node], &preds, None, self.spec)?;
            libm::log(fit.mle_variance().max(f64::MIN_POSITIVE))
        };
        self.cache.insert(key, v);
        Ok(v)
    }
}

/// Gaussian additive-SEM log-likelihood of a DAG, up to constants:
/// `-(n/2) sum_k log(sigma_k^2)`.
pub fn dag_score(data: &Columns, dag: &Dag, spec: &SmoothSpec) -> Result<f64> {
    let n = data.first().map_or(0, Vec::len) as f64;
    let mut scorer = Scorer {
        data,
        spec,
        cache: BTreeMap::new(),
    };
    let mut total = 0.0;
    for k in 0..data.len() {
        let parents: BTreeSet<usize> = dag.parents(NodeId::x(k)).iter().map(|p| p.idx()).collect();
        total += -0.5 * n * scorer.log_var(k, &parents)?;
    }
    Ok(total)
}

/// Trace of an order search, for diagnostics and tests.
#[derive(Debug, Clone, Default)]
pub struct SearchTrace {
    /// Accepted edges with their log-likelihood gains, in order.
    pub steps: Vec<(NodeId, NodeId, f64)>,
}

/// Greedy edge addition: repeatedly add the candidate edge with the largest
/// log-likelihood gain that keeps the graph acyclic.
pub fn greedy_order_search(data: &Columns, candidates: &[BTreeSet<usize>], config: &CamConfig) -> Result<Dag> {
    greedy_order_search_traced(data, candidates, config).map(|(d, _)| d)
}

pub fn greedy_order_search_traced(
    data: &Columns,
    candidates: &[BTreeSet<usize>],
    config: &CamConfig,
) -> Result<(Dag, SearchTrace)> {
    let n = check_data(data, config)? as f64;
    let p = data.len();
    if candidates.len() != p {
        return Err(Error::usage("one candidate set per variable required"));
    }
    let mut dag = Dag::empty(counts(p));
    let mut trace = SearchTrace::default();
    let mut scorer = Scorer {
        data,
        spec: &config.score_spec,
        cache: BTreeMap::new(),
    };
    let threshold = config.gain_threshold * n;
    let mut parents: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); p];
    let mut current: Vec<f64> = (0..p).map(|k| scorer.log_var(k, &parents[k])).collect::<Result<_>>()?;
    // gains[j][k]: gain of adding j -> k given k's current parents.
    let mut gains = vec![vec![f64::NEG_INFINITY; p]; p];
    let refresh = |k: usize,
                   gains: &mut Vec<Vec<f64>>,
                   scorer: &mut Scorer<'_>,
                   parents: &[BTreeSet<usize>],
                   current: &[f64]|
     -> Result<()> {
        for j in 0..p {
            gains[j][k] = f64::NEG_INFINITY;
            if j == k || !candidates[k].contains(&j) || parents[k].contains(&j) {
                continue;
            }
            let mut with = parents[k].clone();
            with.insert(j);
            gains[j][k] = 0.5 * n * (current[k] - scorer.log_var(k, &with)?);
        }
        Ok(())
    };
    for k in 0..p {
        refresh(k, &mut gains, &mut scorer, &parents, &current)?;
    }
    let cap = config.max_edges.unwrap_or(usize::MAX);
    while dag.edge_count() < cap {
        let mut best: Option<(usize, usize, f64)> = None;
        for j in 0..p {
            for k in 0..p {
                let g = gains[j][k];
                if g > threshold && best.is_none_or(|b| g > b.2) && dag.can_add_edge(NodeId::x(j), NodeId::x(k)) {
                    best = Some((j, k, g));
                }
            }
        }
        let Some((j, k, g)) = best else { break };
        dag.add_edge(NodeId::x(j), NodeId::x(k))?;
        debug_assert!(g > 0.0);
        trace.steps.push((NodeId::x(j), NodeId::x(k), g));
        parents[k].insert(j);
        current[k] = scorer.log_var(k, &parents[k])?;
        refresh(k, &mut gains, &mut scorer, &parents, &current)?;
    }
    Ok((dag, trace))
}

/// Remove every parent whose term p-value exceeds `prune_alpha` in a
/// regression of the node on its parents. One pass over the nodes.
pub fn prune(data: &Columns, dag: &Dag, config: &CamConfig) -> Result<Dag> {
    config.validate()?;
    let mut out = dag.clone();
    for k in 0..data.len() {
        let node = NodeId::x(k);
        let parents = dag.parents(node);
        if parents.is_empty() {
            continue;
        }
        let preds: Vec<Predictor<'_>> = parents
            .iter()
            .map(|&pa| Predictor::smooth(pa, &data[pa.idx()]))
            .collect();
        let fit = fit_additive(&data[k], &preds, None, &config.score_spec)?;
        for t in &fit.terms {
            if t.p_value > config.prune_alpha {
                out.remove_edge(t.id, node);
            }
        }
    }
    Ok(out)
}

/// Full CAM: neighbourhood selection, greedy search, pruning. Nodes of the
/// result are `X1..Xp` in column order.
pub fn cam(data: &Columns, config: &CamConfig) -> Result<Dag> {
    if data.len() < 2 {
        return Ok(Dag::empty(counts(data.len())));
    }
    let cand = preliminary_neighborhood(data, config)?;
    let full = greedy_order_search(data, &cand, config)?;
    prune(data, &full, config)
}
