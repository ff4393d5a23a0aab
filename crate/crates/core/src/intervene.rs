//! Simulation of hard interventions on an estimated model.
//!
//! Every random draw is addressed by `(variable, group, subgroup, replicate)`
//! through a counter-based generator, so a variable that does not descend
//! from the target is simulated bit-for-bit identically with and without
//! the intervention.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::HierDataset;
use crate::error::{Error, Result};
use crate::graph::{Level, NodeId};
use crate::hscm::{HscmModel, VariableModel};
use crate::rng::Philox;
use crate::stats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterventionRequest {
    pub target: NodeId,
    pub value: f64,
    /// Simulated subgroups per original group.
    pub subgroups: usize,
    /// Simulated units per subgroup.
    pub replicates: usize,
    pub seed: u64,
}

/// Level of the outcome variables a summary is requested for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeLevel {
    Group,
    Unit,
}

pub const SUMMARY_PROBS: [f64; 7] = [0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSummary {
    pub variable: NodeId,
    pub mean: f64,
    pub sd: f64,
    /// Quantiles at [`SUMMARY_PROBS`].
    pub quantiles: Vec<(f64, f64)>,
}

/// Simulated group-level and unit-level tables. Group rows are ordered by
/// (group, subgroup); unit rows by (group, subgroup, replicate).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterventionResult {
    pub target: Option<(NodeId, f64)>,
    pub groups: usize,
    pub subgroups: usize,
    pub replicates: usize,
    pub group_nodes: Vec<NodeId>,
    /// One column per entry of `group_nodes`, `groups * subgroups` rows.
    pub group_values: Vec<Vec<f64>>,
    /// One column per unit variable, `groups * subgroups * replicates` rows.
    pub unit_values: Vec<Vec<f64>>,
}

impl InterventionResult {
    pub fn group_rows(&self) -> usize {
        self.groups * self.subgroups
    }

    pub fn unit_rows(&self) -> usize {
        self.group_rows() * self.replicates
    }

    /// `(group, subgroup)` of a group-level row.
    pub fn group_row_tag(&self, row: usize) -> (usize, usize) {
        (row / self.subgroups, row % self.subgroups)
    }

    /// `(group, subgroup, replicate)` of a unit-level row.
    pub fn unit_row_tag(&self, row: usize) -> (usize, usize, usize) {
        let slot = row / self.replicates;
        (slot / self.subgroups, slot % self.subgroups, row % self.replicates)
    }

    pub fn values(&self, node: NodeId) -> Option<&[f64]> {
        match node.level {
            Level::Unit => self.unit_values.get(node.idx()).map(Vec::as_slice),
            _ => self
                .group_nodes
                .iter()
                .position(|&n| n == node)
                .map(|i| self.group_values[i].as_slice()),
        }
    }

    /// Mean, standard deviation and quantiles of every variable at `level`.
    /// Group-level outcomes are refused after an intervention on a
    /// unit-level variable: such an intervention does not act on group-level
    /// quantities.
    pub fn summary(&self, level: OutcomeLevel) -> Result<Vec<VariableSummary>> {
        if let (OutcomeLevel::Group, Some((t, _))) = (level, self.target) {
            if t.level == Level::Unit {
                return Err(Error::usage(format!(
                    "group-level outcomes are undefined under an intervention on unit-level variable {t}"
                )));
            }
        }
        let nodes: Vec<NodeId> = match level {
            OutcomeLevel::Group => self.group_nodes.clone(),
            OutcomeLevel::Unit => (0..self.unit_values.len()).map(NodeId::x).collect(),
        };
        Ok(nodes
            .into_iter()
            .map(|v| {
                let vals = self.values(v).expect("listed above");
                let sorted = stats::sorted(vals);
                VariableSummary {
                    variable: v,
                    mean: stats::mean(vals),
                    sd: if vals.len() > 1 { stats::std_dev(vals) } else { 0.0 },
                    quantiles: SUMMARY_PROBS
                        .iter()
                        .map(|&p| (p, stats::quantile_sorted(&sorted, p)))
                        .collect(),
                }
            })
            .collect())
    }
}

fn var_code(node: NodeId) -> u32 {
    let level = match node.level {
        Level::GroupZ => 0,
        Level::GroupW => 1,
        Level::LatentU => 2,
        Level::Unit => 3,
    };
    (level << 24) | node.index
}

/// Simulate from the model under `do(target = value)`.
pub fn do_intervention(model: &HscmModel, data: &HierDataset, req: &InterventionRequest) -> Result<InterventionResult> {
    if req.target.level == Level::LatentU {
        return Err(Error::usage("latent variables cannot be intervened on"));
    }
    if !model.counts.contains(req.target) {
        let names: Vec<_> = model.counts.nodes().iter().map(|n| format!("{n}")).collect();
        return Err(Error::usage(format!(
            "unknown target {}; valid variables: {}",
            req.target,
            names.join(", ")
        )));
    }
    if !req.value.is_finite() {
        return Err(Error::usage("intervention value must be finite"));
    }
    simulate(
        model,
        data,
        Some((req.target, req.value)),
        req.subgroups,
        req.replicates,
        req.seed,
    )
}

/// Simulate from the model, optionally under a hard intervention.
pub fn simulate(
    model: &HscmModel,
    data: &HierDataset,
    target: Option<(NodeId, f64)>,
    subgroups: usize,
    replicates: usize,
    seed: u64,
) -> Result<InterventionResult> {
    if subgroups == 0 || replicates == 0 {
        return Err(Error::usage("subgroups and replicates must be positive"));
    }
    let counts = data.counts();
    if counts.z != model.counts.z || counts.x != model.counts.x || (model.counts.w > 0 && counts.w != model.counts.w) {
        return Err(Error::usage("dataset variables do not match the model"));
    }
    if model.unit_models.len() != counts.x {
        return Err(Error::usage("model has no structural equation for some unit variables"));
    }
    let gen = Philox::new(seed);
    let m = data.m();
    let slots = m * subgroups;
    let order = model.full_dag().topological_order();
    let target_of = |node: NodeId| target.filter(|(t, _)| *t == node).map(|(_, v)| v);

    let group_nodes: Vec<NodeId> = model.group_models.iter().map(|v| v.node).collect();
    let mut group_values: Vec<Vec<f64>> = vec![Vec::new(); group_nodes.len()];
    let group_pos = |node: NodeId| group_nodes.iter().position(|&n| n == node);

    for &node in order.iter().filter(|n| n.level.is_group()) {
        let Some(pos) = group_pos(node) else { continue };
        let col = if let Some(y) = target_of(node) {
            vec![y; slots]
        } else {
            let vm = &model.group_models[pos];
            let parents = vm.parents();
            let observed = data.column(node)?;
            let code = var_code(node);
            let mut buf = vec![0.0; parents.len()];
            (0..slots)
                .map(|s| {
                    let ctr = [code, (s / subgroups) as u32, (s % subgroups) as u32, 0];
                    if parents.is_empty() {
                        observed[gen.index(ctr, observed.len())]
                    } else {
                        for (b, pa) in buf.iter_mut().zip(&parents) {
                            *b = group_values[group_pos(*pa).expect("parent modelled")][s];
                        }
                        vm.mean(&buf, None) + vm.noise_sd * gen.normal(ctr)
                    }
                })
                .collect()
        };
        group_values[pos] = col;
    }

    let rows = slots * replicates;
    let group_rows: Vec<Vec<usize>> = (0..m).map(|g| data.rows_of_group(g)).collect();
    let mut unit_values: Vec<Vec<f64>> = vec![Vec::new(); counts.x];
    for &node in order.iter().filter(|n| n.level == Level::Unit) {
        let k = node.idx();
        let col = if let Some(y) = target_of(node) {
            vec![y; rows]
        } else {
            simulate_unit(
                &model.unit_models[k],
                &data.x[k],
                &group_rows,
                &group_nodes,
                &group_values,
                &unit_values,
                &gen,
                (subgroups, replicates),
            )
        };
        unit_values[k] = col;
    }

    Ok(InterventionResult {
        target,
        groups: m,
        subgroups,
        replicates,
        group_nodes,
        group_values,
        unit_values,
    })
}

#[allow(clippy::too_many_arguments)]
fn simulate_unit(
    vm: &VariableModel,
    observed: &[f64],
    group_rows: &[Vec<usize>],
    group_nodes: &[NodeId],
    group_values: &[Vec<f64>],
    unit_values: &[Vec<f64>],
    gen: &Philox,
    (subgroups, replicates): (usize, usize),
) -> Vec<f64> {
    let parents = vm.parents();
    let sources: Vec<&[f64]> = parents
        .iter()
        .map(|pa| match pa.level {
            Level::Unit => unit_values[pa.idx()].as_slice(),
            _ => {
                let pos = group_nodes.iter().position(|n| n == pa).expect("parent modelled");
                group_values[pos].as_slice()
            }
        })
        .collect();
    let code = var_code(vm.node);
    let rows = group_rows.len() * subgroups * replicates;
    let mut buf = vec![0.0; parents.len()];
    (0..rows)
        .map(|r| {
            let slot = r / replicates;
            let (g, j, rep) = (slot / subgroups, slot % subgroups, r % replicates);
            let ctr = [code, g as u32, j as u32, rep as u32];
            if parents.is_empty() {
                let own = &group_rows[g];
                observed[own[gen.index(ctr, own.len())]]
            } else {
                for ((b, pa), src) in buf.iter_mut().zip(&parents).zip(&sources) {
                    *b = if pa.level == Level::Unit { src[r] } else { src[slot] };
                }
                vm.mean(&buf, Some(g)) + vm.noise_sd * gen.normal(ctr)
            }
        })
        .collect()
}
