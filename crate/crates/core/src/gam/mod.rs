//! Penalized-spline additive regression.
//!
//! Fits `y = intercept + sum_t f_t(x_t) + xi_g + e` by penalized least
//! squares. Smooth terms use a cubic B-spline basis with a difference penalty
//! and a sum-to-zero constraint; linear terms are centered and unpenalized.
//! Group intercepts `xi_g` are a ridge-penalized block, i.e. random
//! intercepts, so group-constant predictors stay identifiable. Smoothing
//! parameters are picked by REML (default) or GCV over a log grid, one
//! parameter at a time; the group ridge is then refined by golden-section
//! search between its grid neighbours.
//!
//! Each term carries an approximate F-test of `f_t == 0`: the Wald statistic
//! of its coefficients against the Bayesian covariance, on the reference df
//! `tr(2F - F^2)`. Terms constant within every group are tested against the
//! between-group residual df rather than the unit-level one.

mod basis;
mod design;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub use basis::{eval_spline, DEGREE};
pub use design::{Design, Lambdas, Solution};

use crate::error::{Error, Result};
use crate::graph::NodeId;
use crate::special::f_sf;
use design::BlockShape;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TermKind {
    #[serde(rename = "nonlinear_smooth")]
    Smooth,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KnotPlacement {
    Quantile,
    Uniform,
}

/// Smoother configuration shared by every smooth term of a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SmoothSpec {
    pub n_basis: usize,
    pub penalty_order: usize,
    /// Relative smoothing parameters; each term's penalty is scaled to the
    /// size of its Gram block, so the grid is independent of sample size.
    pub lambda_grid: Vec<f64>,
    pub knot_placement: KnotPlacement,
    pub max_sweeps: usize,
    pub criterion: Criterion,
    /// Also penalize the polynomial null space of the difference penalty, so
    /// a large smoothing parameter shrinks the whole function to zero.
    pub shrink_null_space: bool,
}

/// Smoothing-parameter selection criterion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    /// Generalized cross-validation.
    Gcv,
    /// Restricted maximum likelihood, treating penalized coefficients and
    /// group intercepts as Gaussian random effects.
    #[default]
    Reml,
}

impl Default for SmoothSpec {
    fn default() -> Self {
        SmoothSpec {
            n_basis: 10,
            penalty_order: 2,
            lambda_grid: log_grid(1e-8, 1e4, 25),
            knot_placement: KnotPlacement::Quantile,
            max_sweeps: 100,
            criterion: Criterion::Reml,
            shrink_null_space: false,
        }
    }
}

impl SmoothSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_basis < 4 {
            return Err(Error::usage("n_basis must be at least 4"));
        }
        if self.penalty_order == 0 {
            return Err(Error::usage("penalty_order must be positive"));
        }
        if self.lambda_grid.is_empty() {
            return Err(Error::usage("lambda_grid is empty"));
        }
        if self.lambda_grid.iter().any(|l| !(*l >= 0.0) || !l.is_finite()) {
            return Err(Error::usage("lambda_grid values must be finite and nonnegative"));
        }
        if self.lambda_grid.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::usage("lambda_grid must be sorted ascending"));
        }
        Ok(())
    }

    /// Same spec with a single fixed smoothing parameter.
    pub fn fixed(&self, lambda: f64) -> Self {
        SmoothSpec {
            lambda_grid: vec![lambda],
            ..self.clone()
        }
    }
}

/// `count` log-spaced values in `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (libm::log10(lo), libm::log10(hi));
    (0..count)
        .map(|i| libm::pow(10.0, a + (b - a) * i as f64 / (count - 1) as f64))
        .collect()
}

/// One predictor column of an additive regression.
#[derive(Debug, Clone, Copy)]
pub struct Predictor<'a> {
    pub id: NodeId,
    pub values: &'a [f64],
    pub kind: TermKind,
}

impl<'a> Predictor<'a> {
    pub fn smooth(id: NodeId, values: &'a [f64]) -> Self {
        Predictor {
            id,
            values,
            kind: TermKind::Smooth,
        }
    }

    pub fn linear(id: NodeId, values: &'a [f64]) -> Self {
        Predictor {
            id,
            values,
            kind: TermKind::Linear,
        }
    }
}

/// Dense 0-based group labels.
#[derive(Debug, Clone, Copy)]
pub struct GroupIndex<'a> {
    pub labels: &'a [usize],
    pub count: usize,
}

/// How group intercepts enter a prediction.
#[derive(Debug, Clone, Copy)]
pub enum GroupMode<'a> {
    /// Omit group intercepts (prediction for an unseen group).
    Global,
    /// Add the intercept of each row's group.
    Groups(&'a [usize]),
}

/// A fitted term function, centered over its training values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TermShape {
    Linear { center: f64, slope: f64 },
    Smooth { knots: Vec<f64>, coefs: Vec<f64> },
}

impl TermShape {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            TermShape::Linear { center, slope } => slope * (x - center),
            TermShape::Smooth { knots, coefs } => eval_spline(knots, coefs, x),
        }
    }

    pub fn zero_like(&self) -> TermShape {
        match self {
            TermShape::Linear { center, .. } => TermShape::Linear {
                center: *center,
                slope: 0.0,
            },
            TermShape::Smooth { knots, coefs } => TermShape::Smooth {
                knots: knots.clone(),
                coefs: vec![0.0; coefs.len()],
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedTerm {
    pub id: NodeId,
    pub kind: TermKind,
    pub shape: TermShape,
    /// Chosen relative smoothing parameter (smooth terms only).
    pub lambda: Option<f64>,
    pub edf: f64,
    /// Increase in penalized RSS when the term is dropped.
    pub statistic: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "warning", rename_all = "snake_case")]
pub enum FitWarning {
    /// The smoothing-parameter search hit its sweep cap.
    NotConverged { sweeps: usize },
    /// A group with a single observation: its intercept is that
    /// observation's residual, shrunk by the ridge penalty.
    DegenerateGroup { group: usize },
    /// The group-specific deviation for this group was set to zero.
    DeviationSkipped { group: usize, observations: usize },
}

/// A fitted additive regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdditiveFit {
    pub intercept: f64,
    pub terms: Vec<FittedTerm>,
    /// Per-group intercepts, weighted to mean zero over observations.
    pub group_intercepts: Option<Vec<f64>>,
    pub group_lambda: Option<f64>,
    pub residual_variance: f64,
    pub rss: f64,
    pub n_obs: usize,
    pub edf: f64,
    pub gcv: f64,
    pub sweeps: usize,
    #[serde(default)]
    pub warnings: Vec<FitWarning>,
}

/// A fit together with its in-sample fitted values and residuals.
#[derive(Debug, Clone)]
pub struct FitOutput {
    pub fit: AdditiveFit,
    pub fitted: Vec<f64>,
    pub residuals: Vec<f64>,
}

pub fn fit_additive(
    y: &[f64],
    predictors: &[Predictor<'_>],
    groups: Option<GroupIndex<'_>>,
    spec: &SmoothSpec,
) -> Result<AdditiveFit> {
    fit_additive_full(y, predictors, groups, spec).map(|o| o.fit)
}

pub fn fit_additive_full(
    y: &[f64],
    predictors: &[Predictor<'_>],
    groups: Option<GroupIndex<'_>>,
    spec: &SmoothSpec,
) -> Result<FitOutput> {
    spec.validate()?;
    let design = Design::build(y, predictors, groups, spec)?;
    let (lambdas, sweeps, converged) = design.search(&spec.lambda_grid, spec.max_sweeps, spec.criterion)?;
    let mut out = finish(&design, &lambdas, sweeps)?;
    if !converged {
        out.fit.warnings.push(FitWarning::NotConverged { sweeps });
    }
    Ok(out)
}

/// Assemble the fit at the given smoothing parameters.
pub fn finish(design: &Design, lambdas: &Lambdas, sweeps: usize) -> Result<FitOutput> {
    let sol = design.solve(lambdas).map_err(|t| Error::Fit {
        term: design
            .blocks
            .get(t)
            .map(|b| format!("{}", b.id))
            .unwrap_or_else(|| "intercept".into()),
        reason: "rank-deficient design after centering".into(),
    })?;
    let n = design.n_obs();
    let fitted_c = design.fitted(&sol);
    let residuals: Vec<f64> = fitted_c
        .iter()
        .zip(&design.y)
        .map(|(f, y)| y - design.y_mean - f)
        .collect();
    let rss: f64 = residuals.iter().map(|r| r * r).sum();
    let resid_df = n as f64 - sol.edf;
    let sigma2_test = if resid_df > 0.0 { rss / resid_df } else { f64::NAN };
    let residual_variance = if resid_df > 0.0 { rss / resid_df } else { rss / n as f64 };

    // Terms constant within groups are tested against between-group
    // residual degrees of freedom.
    let between_df = design.groups.as_ref().map(|g| {
        let observed = g.sizes.iter().filter(|&&s| s > 0.0).count() as f64;
        let used: f64 = design
            .blocks
            .iter()
            .enumerate()
            .filter(|(_, b)| b.group_level)
            .map(|(t, _)| sol.edf_terms[t])
            .sum();
        observed - 1.0 - used
    });

    let mut terms = Vec::with_capacity(design.blocks.len());
    for (t, b) in design.blocks.iter().enumerate() {
        let coef: Vec<f64> = sol.beta[b.cols.clone()].to_vec();
        let shape = match &b.shape {
            BlockShape::Linear { center } => TermShape::Linear {
                center: *center,
                slope: coef[0],
            },
            BlockShape::Smooth { knots, constraint } => TermShape::Smooth {
                knots: knots.clone(),
                coefs: constraint.expand(&coef),
            },
        };
        let edf = sol.edf_terms[t];
        let statistic = design.wald(&sol, t);
        let ref_df = design.reference_df(&sol, lambdas, t).max(edf);
        let test_df = match between_df {
            Some(df) if b.group_level => df,
            _ => resid_df,
        };
        let p_value = term_test(statistic, ref_df, sigma2_test, test_df);
        terms.push(FittedTerm {
            id: b.id,
            kind: b.kind,
            shape,
            lambda: b.penalty.as_ref().map(|_| lambdas.terms[t]),
            edf,
            statistic,
            p_value,
        });
    }

    let mut intercept = design.y_mean + sol.beta[0];
    let mut warnings = Vec::new();
    let group_intercepts = match (&sol.xi, &design.groups) {
        (Some(xi), Some(g)) => {
            let total: f64 = g.sizes.iter().sum();
            let shift = xi.iter().zip(&g.sizes).map(|(x, s)| x * s).sum::<f64>() / total;
            intercept += shift;
            for (l, s) in g.sizes.iter().enumerate() {
                if *s == 1.0 {
                    warnings.push(FitWarning::DegenerateGroup { group: l });
                }
            }
            Some(xi.iter().map(|x| x - shift).collect())
        }
        _ => None,
    };
    let fitted = fitted_c.iter().map(|f| f + design.y_mean).collect();
    Ok(FitOutput {
        fit: AdditiveFit {
            intercept,
            terms,
            group_intercepts,
            group_lambda: design.has_groups().then_some(lambdas.group),
            residual_variance,
            rss,
            n_obs: n,
            edf: sol.edf,
            gcv: sol.gcv,
            sweeps,
            warnings,
        },
        fitted,
        residuals,
    })
}

fn term_test(statistic: f64, edf: f64, sigma2: f64, resid_df: f64) -> f64 {
    if !(resid_df > 0.0) || !(edf > 1e-8) || sigma2.is_nan() {
        return 1.0;
    }
    let f = if sigma2 > 0.0 {
        statistic / edf / sigma2
    } else if statistic > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    let p = f_sf(f, edf, resid_df);
    if p.is_nan() {
        1.0
    } else {
        p
    }
}

impl AdditiveFit {
    /// A fit assembled from known parts, e.g. a hand-specified mechanism.
    pub fn from_parts(
        intercept: f64,
        terms: Vec<(NodeId, TermShape)>,
        group_intercepts: Option<Vec<f64>>,
        residual_variance: f64,
    ) -> Self {
        AdditiveFit {
            intercept,
            terms: terms
                .into_iter()
                .map(|(id, shape)| FittedTerm {
                    id,
                    kind: match shape {
                        TermShape::Linear { .. } => TermKind::Linear,
                        TermShape::Smooth { .. } => TermKind::Smooth,
                    },
                    shape,
                    lambda: None,
                    edf: 0.0,
                    statistic: 0.0,
                    p_value: 1.0,
                })
                .collect(),
            group_intercepts,
            group_lambda: None,
            residual_variance,
            rss: 0.0,
            n_obs: 0,
            edf: 0.0,
            gcv: 0.0,
            sweeps: 0,
            warnings: Vec::new(),
        }
    }

    pub fn term(&self, id: NodeId) -> Option<&FittedTerm> {
        self.terms.iter().find(|t| t.id == id)
    }

    pub fn term_ids(&self) -> Vec<NodeId> {
        self.terms.iter().map(|t| t.id).collect()
    }

    pub fn term_pvalue(&self, id: NodeId) -> Result<f64> {
        self.term(id)
            .map(|t| t.p_value)
            .ok_or_else(|| Error::usage(format!("no term {id} in fit")))
    }

    /// Maximum-likelihood residual variance `RSS / n`.
    pub fn mle_variance(&self) -> f64 {
        self.rss / self.n_obs as f64
    }

    pub fn group_intercept(&self, group: usize) -> f64 {
        self.group_intercepts
            .as_ref()
            .and_then(|g| g.get(group).copied())
            .unwrap_or(0.0)
    }

    /// Evaluate the model. `inputs` must name every term of the fit.
    pub fn predict(&self, inputs: &[(NodeId, &[f64])], groups: GroupMode<'_>) -> Result<Vec<f64>> {
        for (id, _) in inputs {
            if self.term(*id).is_none() {
                return Err(Error::usage(format!("unknown term {id}")));
            }
        }
        let n = match (inputs.first(), groups) {
            (Some((_, v)), _) => v.len(),
            (None, GroupMode::Groups(g)) => g.len(),
            (None, GroupMode::Global) => 1,
        };
        let mut out = vec![self.intercept; n];
        for term in &self.terms {
            let (_, values) = inputs
                .iter()
                .find(|(id, _)| *id == term.id)
                .ok_or_else(|| Error::usage(format!("missing values for term {}", term.id)))?;
            if values.len() != n {
                return Err(Error::usage(format!(
                    "term {} has {} values, expected {n}",
                    term.id,
                    values.len()
                )));
            }
            for (o, &x) in out.iter_mut().zip(values.iter()) {
                *o += term.shape.eval(x);
            }
        }
        if let (GroupMode::Groups(labels), Some(xi)) = (groups, &self.group_intercepts) {
            if labels.len() != n {
                return Err(Error::usage("group labels length mismatch"));
            }
            for (o, &l) in out.iter_mut().zip(labels) {
                *o += *xi.get(l).ok_or_else(|| Error::usage(format!("unknown group {l}")))?;
            }
        }
        Ok(out)
    }

    /// Evaluate at a single point given per-term values in term order.
    pub fn predict_point(&self, values: &[f64], group: Option<usize>) -> f64 {
        let mut v = self.intercept;
        for (t, x) in self.terms.iter().zip(values) {
            v += t.shape.eval(*x);
        }
        if let Some(g) = group {
            v += self.group_intercept(g);
        }
        v
    }
}

#[cfg(test)]
mod tests;
