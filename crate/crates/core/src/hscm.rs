//! Hierarchical structure estimation: a DAG over group-level variables, a
//! DAG over unit-level variables learned inside one group, group-to-unit
//! edges chosen by significance in a regression with group intercepts, and a
//! final refit of all causal functions on the estimated structure.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::cam::{cam, CamConfig};
use crate::data::HierDataset;
use crate::error::{Error, Result};
use crate::gam::{
    fit_additive, fit_additive_full, AdditiveFit, FitWarning, GroupIndex, Predictor, TermKind, TermShape,
};
use crate::graph::{Dag, Level, NodeCounts, NodeId};
use crate::stats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimateOptions {
    /// Significance level for group-to-unit edges.
    pub alpha: f64,
    /// Do not learn edges among group-level variables.
    pub skip_group_dag: bool,
    pub group_specific_functions: bool,
    /// Use the dataset's second grouping factor `W`.
    pub second_factor: bool,
    pub cam_config: CamConfig,
    /// How group-level parents enter unit-level regressions.
    pub group_term_kind: TermKind,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        EstimateOptions {
            alpha: 0.001,
            skip_group_dag: false,
            group_specific_functions: false,
            second_factor: false,
            cam_config: CamConfig::default(),
            group_term_kind: TermKind::Smooth,
        }
    }
}

impl EstimateOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::usage("alpha must lie in (0, 1)"));
        }
        self.cam_config.validate()
    }
}

/// Per-group deviation smooths for one unit-to-unit edge. `None` means the
/// group uses the global function only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deviation {
    pub parent: NodeId,
    pub per_group: Vec<Option<TermShape>>,
}

impl Deviation {
    pub fn eval(&self, group: usize, x: f64) -> f64 {
        match self.per_group.get(group) {
            Some(Some(s)) => s.eval(x),
            _ => 0.0,
        }
    }
}

/// The structural equation of one variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableModel {
    pub node: NodeId,
    /// Intercept, one term per parent, group intercepts for unit variables.
    pub fit: AdditiveFit,
    #[serde(default)]
    pub deviations: Vec<Deviation>,
    pub noise_sd: f64,
}

impl VariableModel {
    pub fn parents(&self) -> Vec<NodeId> {
        self.fit.term_ids()
    }

    /// Conditional mean given parent values in `parents()` order.
    pub fn mean(&self, parent_values: &[f64], group: Option<usize>) -> f64 {
        let mut v = self.fit.predict_point(parent_values, group);
        if let Some(g) = group {
            for d in &self.deviations {
                if let Some(pos) = self.fit.terms.iter().position(|t| t.id == d.parent) {
                    v += d.eval(g, parent_values[pos]);
                }
            }
        }
        v
    }

    /// The causal function of `parent`, including the deviation of `group`.
    pub fn edge_function(&self, parent: NodeId, group: Option<usize>, x: f64) -> Option<f64> {
        let term = self.fit.term(parent)?;
        let mut v = term.shape.eval(x);
        if let Some(g) = group {
            if let Some(d) = self.deviations.iter().find(|d| d.parent == parent) {
                v += d.eval(g, x);
            }
        }
        Some(v)
    }
}

/// Result of hierarchical estimation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HscmModel {
    pub counts: NodeCounts,
    pub d_z: Option<Dag>,
    pub d_w: Option<Dag>,
    pub d_x: Dag,
    /// Group used to learn `d_x` (0-based).
    pub selection_group: usize,
    /// Group-level parents of each unit variable.
    pub z_parents: Vec<Vec<NodeId>>,
    /// Regressions used to select group-level parents, one per unit variable.
    pub selection_fits: Vec<AdditiveFit>,
    /// Structural equations of `Z` then `W` variables.
    pub group_models: Vec<VariableModel>,
    pub unit_models: Vec<VariableModel>,
    pub options: EstimateOptions,
}

impl HscmModel {
    /// Union of all estimated edges.
    pub fn full_dag(&self) -> Dag {
        let mut dag = Dag::empty(self.counts);
        let all = self
            .d_z
            .iter()
            .chain(self.d_w.iter())
            .chain(core::iter::once(&self.d_x))
            .flat_map(|d| d.edges().collect::<Vec<_>>());
        for (a, b) in all {
            dag.add_edge(a, b).expect("levels are typed");
        }
        for (k, parents) in self.z_parents.iter().enumerate() {
            for &pa in parents {
                dag.add_edge(pa, NodeId::x(k)).expect("levels are typed");
            }
        }
        dag
    }

    pub fn variable(&self, node: NodeId) -> Option<&VariableModel> {
        match node.level {
            Level::Unit => self.unit_models.get(node.idx()),
            Level::GroupZ | Level::GroupW => self.group_models.iter().find(|v| v.node == node),
            Level::LatentU => None,
        }
    }

    /// Group-level parents implied by the stored selection fits.
    pub fn selected_parents(&self, k: usize) -> Vec<NodeId> {
        self.selection_fits[k]
            .terms
            .iter()
            .filter(|t| t.id.level.is_group() && t.p_value <= self.options.alpha)
            .map(|t| t.id)
            .collect()
    }

    pub fn warnings(&self) -> Vec<(NodeId, FitWarning)> {
        self.group_models
            .iter()
            .chain(&self.unit_models)
            .flat_map(|v| v.fit.warnings.iter().map(move |w| (v.node, w.clone())))
            .collect()
    }
}

fn learn_group_dag(cols: &[Vec<f64>], level: Level, counts: NodeCounts, cfg: &CamConfig) -> Result<Dag> {
    let d = cam(cols, cfg).map_err(|e| match e {
        Error::Usage(msg) => Error::Estimation(format!("group-level discovery of {} variables: {msg}", level.prefix())),
        other => other,
    })?;
    d.relabel(counts, |n| NodeId { level, index: n.index })
}

/// Estimate a hierarchical structural causal model.
pub fn estimate(data: &HierDataset, opts: &EstimateOptions) -> Result<HscmModel> {
    opts.validate()?;
    data.validate()?;
    if opts.second_factor && data.w.is_none() {
        return Err(Error::usage("second_factor requested but the dataset has no W"));
    }
    let mut counts = data.counts();
    if !opts.second_factor {
        counts.w = 0;
    }
    let m = data.m();
    let spec = &opts.cam_config.score_spec;

    let mut d_w = None;
    if opts.second_factor && counts.w > 0 {
        let w = data.w.as_ref().expect("checked");
        d_w = Some(learn_group_dag(w, Level::GroupW, counts, &opts.cam_config)?);
    }
    let d_z = if opts.skip_group_dag || counts.z == 0 {
        None
    } else {
        if m < 2 {
            return Err(Error::Estimation(
                "group-level discovery needs at least two groups".into(),
            ));
        }
        Some(learn_group_dag(&data.z, Level::GroupZ, counts, &opts.cam_config)?)
    };

    let selection_group = data.largest_group();
    let local = data.units_in_group(selection_group);
    let n_sel = local.first().map_or(0, Vec::len);
    if data.p() >= 2 && n_sel < opts.cam_config.min_obs {
        return Err(Error::Estimation(format!(
            "largest group has {n_sel} units, at least {} required for unit-level discovery",
            opts.cam_config.min_obs
        )));
    }
    let d_x = cam(&local, &opts.cam_config)
        .map_err(|e| match e {
            Error::Usage(msg) => Error::Estimation(format!(
                "unit-level discovery in group {}: {msg}",
                data.group_labels[selection_group]
            )),
            other => other,
        })?
        .relabel(counts, |n| n)?;

    let group_cols: Vec<(NodeId, Vec<f64>)> = group_level_nodes(counts)
        .into_iter()
        .map(|id| Ok((id, data.unit_aligned(id)?)))
        .collect::<Result<_>>()?;
    let groups = (m >= 2).then(|| GroupIndex {
        labels: &data.group,
        count: m,
    });

    let mut selection_fits = Vec::with_capacity(data.p());
    let mut z_parents = Vec::with_capacity(data.p());
    for k in 0..data.p() {
        let mut preds: Vec<Predictor<'_>> = group_cols
            .iter()
            .map(|(id, v)| Predictor {
                id: *id,
                values: v,
                kind: opts.group_term_kind,
            })
            .collect();
        for pa in d_x.parents(NodeId::x(k)) {
            preds.push(Predictor::smooth(pa, &data.x[pa.idx()]));
        }
        let fit = fit_additive(&data.x[k], &preds, groups, spec)?;
        let parents = fit
            .terms
            .iter()
            .filter(|t| t.id.level.is_group() && t.p_value <= opts.alpha)
            .map(|t| t.id)
            .collect();
        z_parents.push(parents);
        selection_fits.push(fit);
    }

    let mut group_models = Vec::new();
    for (dag, cols) in [(&d_z, Some(&data.z)), (&d_w, data.w.as_ref())] {
        let Some(cols) = cols else { continue };
        let level = if core::ptr::eq(cols, &data.z) {
            Level::GroupZ
        } else {
            Level::GroupW
        };
        if counts.get(level) == 0 {
            continue;
        }
        for (j, col) in cols.iter().enumerate() {
            let node = NodeId { level, index: j as u32 };
            let parents = dag.as_ref().map(|d| d.parents(node)).unwrap_or_default();
            let preds: Vec<Predictor<'_>> = parents
                .iter()
                .map(|pa| Predictor::smooth(*pa, &cols[pa.idx()]))
                .collect();
            let fit = fit_additive(col, &preds, None, spec)?;
            let noise_sd = libm::sqrt(fit.residual_variance);
            group_models.push(VariableModel {
                node,
                fit,
                deviations: Vec::new(),
                noise_sd,
            });
        }
    }

    let mut unit_models = Vec::with_capacity(data.p());
    for k in 0..data.p() {
        let node = NodeId::x(k);
        let mut preds: Vec<Predictor<'_>> = Vec::new();
        for &pa in &z_parents[k] {
            let (_, v) = group_cols
                .iter()
                .find(|(id, _)| *id == pa)
                .expect("selected from these");
            preds.push(Predictor {
                id: pa,
                values: v,
                kind: opts.group_term_kind,
            });
        }
        let x_parents = d_x.parents(node);
        for &pa in &x_parents {
            preds.push(Predictor::smooth(pa, &data.x[pa.idx()]));
        }
        let out = fit_additive_full(&data.x[k], &preds, groups, spec)?;
        let mut vm = VariableModel {
            node,
            noise_sd: libm::sqrt(out.fit.residual_variance),
            fit: out.fit,
            deviations: Vec::new(),
        };
        if opts.group_specific_functions && !x_parents.is_empty() && m >= 2 {
            let mut resid = out.residuals;
            let mut dev_edf = 0.0;
            for &pa in &x_parents {
                let (dev, edf) = fit_deviation(data, &mut resid, pa, spec, &mut vm.fit.warnings)?;
                dev_edf += edf;
                vm.deviations.push(dev);
            }
            let df = resid.len() as f64 - vm.fit.edf - dev_edf;
            if df > 0.0 {
                let rss: f64 = resid.iter().map(|r| r * r).sum();
                vm.noise_sd = libm::sqrt(rss / df);
            }
        }
        unit_models.push(vm);
    }

    Ok(HscmModel {
        counts,
        d_z,
        d_w,
        d_x,
        selection_group,
        z_parents,
        selection_fits,
        group_models,
        unit_models,
        options: opts.clone(),
    })
}

fn group_level_nodes(counts: NodeCounts) -> Vec<NodeId> {
    counts
        .nodes()
        .into_iter()
        .filter(|n| n.level.is_group() && n.level != Level::LatentU)
        .collect()
}

/// Fit per-group smooths of `parent` to `resid` and subtract them in place.
/// Returns the deviation and its total effective degrees of freedom.
fn fit_deviation(
    data: &HierDataset,
    resid: &mut [f64],
    parent: NodeId,
    spec: &crate::gam::SmoothSpec,
    warnings: &mut Vec<FitWarning>,
) -> Result<(Deviation, f64)> {
    let x = data.column(parent)?;
    // Deviations shrink to zero, linear part included, when the data do not
    // support them.
    let spec = &crate::gam::SmoothSpec {
        shrink_null_space: true,
        ..spec.clone()
    };
    let mut per_group = vec![None; data.m()];
    let mut edf = 0.0;
    for (g, slot) in per_group.iter_mut().enumerate() {
        let rows = data.rows_of_group(g);
        let xs: Vec<f64> = rows.iter().map(|&i| x[i]).collect();
        if rows.len() < spec.n_basis || stats::unique_sorted(&xs).len() < 4 {
            warnings.push(FitWarning::DeviationSkipped {
                group: g,
                observations: rows.len(),
            });
            continue;
        }
        let ys: Vec<f64> = rows.iter().map(|&i| resid[i]).collect();
        let fit = fit_additive(&ys, &[Predictor::smooth(parent, &xs)], None, spec)?;
        let term = &fit.terms[0];
        edf += term.edf;
        for (&i, &xv) in rows.iter().zip(&xs) {
            resid[i] -= term.shape.eval(xv);
        }
        *slot = Some(term.shape.clone());
    }
    Ok((Deviation { parent, per_group }, edf))
}

/// Fit group-specific deviations for one unit-to-unit edge of an estimated
/// model, replacing any existing deviation for that edge.
pub fn fit_group_specific(data: &HierDataset, model: &mut HscmModel, parent: NodeId, child: NodeId) -> Result<()> {
    if child.level != Level::Unit || parent.level != Level::Unit || !model.d_x.has_edge(parent, child) {
        return Err(Error::usage(format!(
            "{parent} -> {child} is not a unit-level edge of the model"
        )));
    }
    let spec = model.options.cam_config.score_spec.clone();
    let vm = &mut model.unit_models[child.idx()];
    vm.deviations.retain(|d| d.parent != parent);
    let mut resid = residuals(data, vm)?;
    let (dev, _) = fit_deviation(data, &mut resid, parent, &spec, &mut vm.fit.warnings)?;
    vm.deviations.push(dev);
    Ok(())
}

fn residuals(data: &HierDataset, vm: &VariableModel) -> Result<Vec<f64>> {
    let parents = vm.parents();
    let cols: Vec<Vec<f64>> = parents.iter().map(|&p| data.unit_aligned(p)).collect::<Result<_>>()?;
    let y = data.column(vm.node)?;
    let mut buf = vec![0.0; parents.len()];
    Ok((0..data.n_units())
        .map(|i| {
            for (b, c) in buf.iter_mut().zip(&cols) {
                *b = c[i];
            }
            y[i] - vm.mean(&buf, Some(data.group[i]))
        })
        .collect())
}

/// Known causal functions, for evaluating estimates on simulated data.
pub trait CausalTruth {
    /// Edges among observed variables.
    fn observed_edges(&self) -> Vec<(NodeId, NodeId)>;
    /// Whether the edge's function differs between groups.
    fn is_group_specific(&self, _from: NodeId, _to: NodeId) -> bool {
        false
    }
    /// The edge's function at `x`, for `group` when group-specific.
    fn eval(&self, from: NodeId, to: NodeId, group: usize, x: f64) -> f64;
}

/// Mean over common edges of the RMSE between centered true and estimated
/// functions on an equally spaced grid between the 1st and 99th percentiles
/// of the parent. `None` when model and truth share no edge.
pub fn function_rmse(
    model: &HscmModel,
    data: &HierDataset,
    truth: &dyn CausalTruth,
    grid_size: usize,
) -> Result<Option<f64>> {
    if grid_size < 2 {
        return Err(Error::usage("grid_size must be at least 2"));
    }
    let est = model.full_dag();
    let mut total = 0.0;
    let mut count = 0usize;
    for (from, to) in truth.observed_edges() {
        if !est.has_edge(from, to) {
            continue;
        }
        let vm = model.variable(to).expect("edge target is modelled");
        let parent_values = data.column(from)?;
        let rmse = if truth.is_group_specific(from, to) {
            let mut acc = 0.0;
            for g in 0..data.m() {
                let vals: Vec<f64> = if from.level == Level::Unit {
                    data.rows_of_group(g).iter().map(|&i| parent_values[i]).collect()
                } else {
                    parent_values.to_vec()
                };
                acc += edge_rmse(
                    &vals,
                    grid_size,
                    |x| truth.eval(from, to, g, x),
                    |x| vm.edge_function(from, Some(g), x).expect("term exists"),
                );
            }
            acc / data.m() as f64
        } else {
            edge_rmse(
                parent_values,
                grid_size,
                |x| truth.eval(from, to, 0, x),
                |x| vm.edge_function(from, None, x).expect("term exists"),
            )
        };
        total += rmse;
        count += 1;
    }
    Ok((count > 0).then(|| total / count as f64))
}

fn edge_rmse(values: &[f64], grid_size: usize, f: impl Fn(f64) -> f64, g: impl Fn(f64) -> f64) -> f64 {
    let sorted = stats::sorted(values);
    let lo = stats::quantile_sorted(&sorted, 0.01);
    let hi = stats::quantile_sorted(&sorted, 0.99);
    let grid: Vec<f64> = (0..grid_size)
        .map(|i| lo + (hi - lo) * i as f64 / (grid_size - 1) as f64)
        .collect();
    let a: Vec<f64> = grid.iter().map(|&x| f(x)).collect();
    let b: Vec<f64> = grid.iter().map(|&x| g(x)).collect();
    let (ma, mb) = (stats::mean(&a), stats::mean(&b));
    let mse = a
        .iter()
        .zip(&b)
        .map(|(u, v)| {
            let d = (u - ma) - (v - mb);
            d * d
        })
        .sum::<f64>()
        / grid_size as f64;
    libm::sqrt(mse)
}
