//! Synthetic hierarchical data with known structure and mechanisms.
//!
//! Each level gets `round(k/2)` edges among its `k` variables, oriented by a
//! random permutation. Group-to-unit edges number `round(p/2)` and every
//! latent group confounder gets two unit-level children. Every mechanism is a
//! signed, scaled function from a fixed library applied to the standardized
//! parent.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::HierDataset;
use crate::error::{Error, Result};
use crate::graph::{shd, Dag, Level, NodeCounts, NodeId};
use crate::hscm::{estimate, function_rmse, CausalTruth, EstimateOptions};
use crate::rng::{derive_seed, Stream};
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseFamily {
    #[default]
    GaussianStd,
    /// Uniform on `(-1, 1)`.
    UniformPm1,
}

impl NoiseFamily {
    pub fn name(self) -> &'static str {
        match self {
            NoiseFamily::GaussianStd => "gaussian_std",
            NoiseFamily::UniformPm1 => "uniform_pm1",
        }
    }

    fn draw(self, s: &mut Stream) -> f64 {
        match self {
            NoiseFamily::GaussianStd => s.normal(),
            NoiseFamily::UniformPm1 => s.uniform_range(-1.0, 1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    /// Units per group.
    pub n: usize,
    /// Groups.
    pub m: usize,
    pub p: usize,
    pub q: usize,
    /// Latent group confounders.
    pub r: usize,
    pub noise: NoiseFamily,
    pub group_specific: bool,
    pub second_factor: bool,
    pub standardize: Standardize,
    pub seed: u64,
}

/// Scale used to standardize a unit-level parent before its mechanism is
/// applied. Group-level parents always use their standard deviation across
/// groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Standardize {
    /// Standard deviation over all units.
    Global,
    /// Pooled within-group standard deviation.
    #[default]
    WithinGroup,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n: 25,
            m: 25,
            p: 4,
            q: 4,
            r: 1,
            noise: NoiseFamily::GaussianStd,
            group_specific: false,
            second_factor: false,
            standardize: Standardize::WithinGroup,
            seed: 1,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.p < 2 || self.q < 2 {
            return Err(Error::config("p and q must be at least 2"));
        }
        if self.n < 2 || self.m < 2 {
            return Err(Error::config("n and m must be at least 2"));
        }
        if u32::try_from(self.m.max(self.n).max(self.p)).is_err() {
            return Err(Error::config("dimensions exceed 32-bit indices"));
        }
        Ok(())
    }

    pub fn counts(&self) -> NodeCounts {
        let factors = if self.second_factor { 2 } else { 1 };
        NodeCounts {
            z: self.q,
            w: if self.second_factor { self.q } else { 0 },
            x: self.p,
            u: self.r * factors,
        }
    }

    /// The 32 settings of the standard benchmark grid.
    pub fn paper_grid(seed: u64) -> Vec<SimConfig> {
        let sizes = [25, 50, 100, 250];
        let mut out = Vec::new();
        for (pq, r) in [(4, 1), (10, 2)] {
            for &m in &sizes {
                for &n in &sizes {
                    out.push(SimConfig {
                        n,
                        m,
                        p: pq,
                        q: pq,
                        r,
                        seed,
                        ..Default::default()
                    });
                }
            }
        }
        out
    }
}

/// Number of edges sampled among `k` variables.
pub fn level_edge_count(k: usize) -> usize {
    k.div_ceil(2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Sin,
    Square,
    Cubic,
    Exp,
    Relu,
    Softplus,
}

impl Family {
    pub const ALL: [Family; 6] = [
        Family::Sin,
        Family::Square,
        Family::Cubic,
        Family::Exp,
        Family::Relu,
        Family::Softplus,
    ];

    pub fn apply(self, x: f64) -> f64 {
        match self {
            Family::Sin => libm::sin(x),
            Family::Square => x * x,
            Family::Cubic => x * x * x,
            Family::Exp => libm::exp(x.min(5.0)),
            Family::Relu => x.max(0.0),
            Family::Softplus => x.max(0.0) + libm::log1p(libm::exp(-x.abs())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FuncSpec {
    pub family: Family,
    pub sign: f64,
    pub coefficient: f64,
}

impl FuncSpec {
    pub fn apply(&self, x: f64) -> f64 {
        self.sign * self.coefficient * self.family.apply(x)
    }

    fn draw(s: &mut Stream) -> FuncSpec {
        FuncSpec {
            family: Family::ALL[s.index(Family::ALL.len())],
            sign: s.sign(),
            coefficient: s.uniform_range(0.5, 2.0),
        }
    }
}

/// The mechanism of one edge: `func((x - center) / scale)`, multiplied per
/// group by `1 + sign_j * coefficient_j` when group-specific.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeMechanism {
    pub from: NodeId,
    pub to: NodeId,
    pub func: FuncSpec,
    pub center: f64,
    pub scale: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group_factors: Option<Vec<f64>>,
}

impl EdgeMechanism {
    pub fn eval(&self, group: usize, x: f64) -> f64 {
        let base = self.func.apply((x - self.center) / self.scale);
        match &self.group_factors {
            Some(f) => base * f[group],
            None => base,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub config: SimConfig,
    /// Full graph including latent nodes.
    pub dag: Dag,
    pub mechanisms: Vec<EdgeMechanism>,
    pub data: HierDataset,
    /// Latent confounder values, one column of length `m` per `U`.
    pub latent: Vec<Vec<f64>>,
}

impl GroundTruth {
    pub fn mechanism(&self, from: NodeId, to: NodeId) -> Option<&EdgeMechanism> {
        self.mechanisms.iter().find(|e| e.from == from && e.to == to)
    }
}

impl CausalTruth for GroundTruth {
    fn observed_edges(&self) -> Vec<(NodeId, NodeId)> {
        self.dag.without_latent().edges().collect()
    }

    fn is_group_specific(&self, from: NodeId, to: NodeId) -> bool {
        self.mechanism(from, to).is_some_and(|e| e.group_factors.is_some())
    }

    fn eval(&self, from: NodeId, to: NodeId, group: usize, x: f64) -> f64 {
        self.mechanism(from, to).map_or(0.0, |e| e.eval(group, x))
    }
}

const DAG_STREAM: u64 = 1;
const FUNC_STREAM: u64 = 2;
const DATA_STREAM: u64 = 3;

fn within_level(s: &mut Stream, level: Level, k: usize, dag: &mut Dag) -> Result<()> {
    let e = level_edge_count(k);
    let mut order: Vec<usize> = (0..k).collect();
    s.shuffle(&mut order);
    let pairs: Vec<(usize, usize)> = (0..k).flat_map(|a| (a + 1..k).map(move |b| (a, b))).collect();
    if e > pairs.len() {
        return Err(Error::config(format!("{e} edges requested among {k} variables")));
    }
    for i in s.sample_without_replacement(pairs.len(), e) {
        let (a, b) = pairs[i];
        let node = |j: usize| NodeId {
            level,
            index: order[j] as u32,
        };
        dag.add_edge(node(a), node(b))?;
    }
    Ok(())
}

fn across_levels(s: &mut Stream, level: Level, k: usize, p: usize, e: usize, dag: &mut Dag) -> Result<()> {
    if e > k * p {
        return Err(Error::config(format!(
            "{e} edges requested from {k} {level:?} variables"
        )));
    }
    for i in s.sample_without_replacement(k * p, e) {
        dag.add_edge(
            NodeId {
                level,
                index: (i / p) as u32,
            },
            NodeId::x(i % p),
        )?;
    }
    Ok(())
}

/// Sample the full graph, latent confounders included.
pub fn gen_dag(config: &SimConfig) -> Result<Dag> {
    config.validate()?;
    let counts = config.counts();
    let mut s = Stream::new(config.seed, DAG_STREAM);
    let mut dag = Dag::empty(counts);
    within_level(&mut s, Level::GroupZ, config.q, &mut dag)?;
    within_level(&mut s, Level::Unit, config.p, &mut dag)?;
    across_levels(
        &mut s,
        Level::GroupZ,
        config.q,
        config.p,
        level_edge_count(config.p),
        &mut dag,
    )?;
    for u in 0..counts.u {
        for x in s.sample_without_replacement(config.p, 2) {
            dag.add_edge(NodeId::u(u), NodeId::x(x))?;
        }
    }
    if config.second_factor {
        within_level(&mut s, Level::GroupW, config.q, &mut dag)?;
        across_levels(
            &mut s,
            Level::GroupW,
            config.q,
            config.p,
            level_edge_count(config.p),
            &mut dag,
        )?;
    }
    Ok(dag)
}

/// Simulate data on a graph from [`gen_dag`].
pub fn gen_data(dag: &Dag, config: &SimConfig) -> Result<GroundTruth> {
    config.validate()?;
    if dag.counts() != config.counts() {
        return Err(Error::config("graph does not match configuration"));
    }
    let (m, n) = (config.m, config.n);
    let mut fs = Stream::new(config.seed, FUNC_STREAM);
    let mut specs: Vec<(NodeId, NodeId, FuncSpec, Option<Vec<f64>>)> = Vec::new();
    for (a, b) in dag.edges() {
        let func = FuncSpec::draw(&mut fs);
        let factors = (config.group_specific && a.level == Level::Unit && b.level == Level::Unit)
            .then(|| (0..m).map(|_| 1.0 + fs.sign() * fs.uniform_range(0.5, 2.0)).collect());
        specs.push((a, b, func, factors));
    }

    let mut ds = Stream::new(config.seed, DATA_STREAM);
    let counts = dag.counts();
    let mut values: alloc::collections::BTreeMap<NodeId, Vec<f64>> = Default::default();
    let mut mechanisms = Vec::new();
    let group: Vec<usize> = (0..m * n).map(|i| i / n).collect();
    for node in dag.topological_order() {
        let rows = if node.level == Level::Unit { m * n } else { m };
        let mut col: Vec<f64> = (0..rows).map(|_| config.noise.draw(&mut ds)).collect();
        for (a, _, func, factors) in specs.iter().filter(|s| s.1 == node) {
            let parent = &values[a];
            let mech = EdgeMechanism {
                from: *a,
                to: node,
                func: *func,
                center: stats::mean(parent),
                scale: if a.level == Level::Unit && config.standardize == Standardize::WithinGroup {
                    within_group_sd(parent, &group, m)
                } else {
                    stats::std_dev(parent)
                }
                .max(f64::MIN_POSITIVE),
                group_factors: factors.clone(),
            };
            for (i, v) in col.iter_mut().enumerate() {
                let (g, pv) = if a.level == Level::Unit {
                    (group[i], parent[i])
                } else if node.level == Level::Unit {
                    (group[i], parent[group[i]])
                } else {
                    (i, parent[i])
                };
                *v += mech.eval(g, pv);
            }
            mechanisms.push(mech);
        }
        values.insert(node, col);
    }
    let take = |level: Level, k: usize| -> Vec<Vec<f64>> {
        (0..k)
            .map(|i| values[&NodeId { level, index: i as u32 }].clone())
            .collect()
    };
    let data = HierDataset::new(
        take(Level::GroupZ, counts.z),
        config.second_factor.then(|| take(Level::GroupW, counts.w)),
        take(Level::Unit, counts.x),
        group,
        m,
    )?;
    Ok(GroundTruth {
        config: config.clone(),
        dag: dag.clone(),
        mechanisms,
        data,
        latent: take(Level::LatentU, counts.u),
    })
}

/// Pooled within-group standard deviation.
fn within_group_sd(values: &[f64], group: &[usize], m: usize) -> f64 {
    let mut sums = vec![0.0; m];
    let mut sizes = vec![0.0; m];
    for (&v, &g) in values.iter().zip(group) {
        sums[g] += v;
        sizes[g] += 1.0;
    }
    let ss: f64 = values
        .iter()
        .zip(group)
        .map(|(&v, &g)| {
            let d = v - sums[g] / sizes[g];
            d * d
        })
        .sum();
    libm::sqrt(ss / (values.len() - m) as f64)
}

pub fn generate(config: &SimConfig) -> Result<GroundTruth> {
    gen_data(&gen_dag(config)?, config)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicateOutcome {
    pub shd: usize,
    pub rmse: Option<f64>,
}

/// The estimation options a benchmark uses for a configuration.
pub fn benchmark_options(config: &SimConfig, base: &EstimateOptions) -> EstimateOptions {
    EstimateOptions {
        second_factor: config.second_factor,
        group_specific_functions: config.group_specific,
        ..base.clone()
    }
}

/// The configuration of replicate `index`, with its own derived seed.
pub fn replicate_config(config: &SimConfig, index: usize) -> SimConfig {
    SimConfig {
        seed: derive_seed(config.seed, index as u64),
        ..config.clone()
    }
}

pub const RMSE_GRID: usize = 200;

/// Generate, estimate and score one replicate.
pub fn run_replicate(config: &SimConfig, index: usize, base: &EstimateOptions) -> Result<ReplicateOutcome> {
    let cfg = replicate_config(config, index);
    let truth = generate(&cfg)?;
    let model = estimate(&truth.data, &benchmark_options(config, base))?;
    Ok(ReplicateOutcome {
        shd: shd(&model.full_dag(), &truth.dag.without_latent())?,
        rmse: function_rmse(&model, &truth.data, &truth, RMSE_GRID)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub config: SimConfig,
    pub replicates: usize,
    pub failures: usize,
    pub shd_mean: f64,
    pub shd_se: f64,
    /// Over replicates with at least one correctly recovered edge.
    pub rmse_mean: Option<f64>,
    pub rmse_se: Option<f64>,
}

/// Mean and standard error over successful replicates.
pub fn aggregate(config: &SimConfig, outcomes: &[Result<ReplicateOutcome>]) -> BenchmarkRow {
    let ok: Vec<&ReplicateOutcome> = outcomes.iter().filter_map(|o| o.as_ref().ok()).collect();
    let shds: Vec<f64> = ok.iter().map(|o| o.shd as f64).collect();
    let rmses: Vec<f64> = ok.iter().filter_map(|o| o.rmse).collect();
    let mean_se = |v: &[f64]| -> (f64, f64) {
        match v.len() {
            0 => (f64::NAN, f64::NAN),
            1 => (v[0], f64::NAN),
            _ => (stats::mean(v), stats::std_err(v)),
        }
    };
    let (shd_mean, shd_se) = mean_se(&shds);
    let (rm, rs) = mean_se(&rmses);
    BenchmarkRow {
        config: config.clone(),
        replicates: outcomes.len(),
        failures: outcomes.len() - ok.len(),
        shd_mean,
        shd_se,
        rmse_mean: (!rmses.is_empty()).then_some(rm),
        rmse_se: (rmses.len() > 1).then_some(rs),
    }
}

/// Sequential benchmark over configurations.
pub fn run_benchmark(configs: &[SimConfig], replicates: usize, base: &EstimateOptions) -> Result<Vec<BenchmarkRow>> {
    if replicates < 2 {
        return Err(Error::usage("at least two replicates required"));
    }
    Ok(configs
        .iter()
        .map(|c| {
            let outcomes: Vec<_> = (0..replicates).map(|i| run_replicate(c, i, base)).collect();
            aggregate(c, &outcomes)
        })
        .collect())
}
