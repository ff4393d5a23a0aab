//! Penalized least squares on a Gram-matrix representation of the design.
//!
//! Columns are `[intercept, term blocks...]`. Group intercepts, when present,
//! form a ridge-penalized block that is eliminated analytically through its
//! Schur complement, so the cost of a solve does not grow with the number of
//! groups beyond one pass over per-group column sums.

use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use super::basis::{self, SumToZero};
use super::{Criterion, GroupIndex, Predictor, SmoothSpec, TermKind};
use crate::error::{Error, Result};
use crate::graph::NodeId;
use crate::linalg::{dot, Cholesky, Mat};
use crate::stats;

const PIVOT_TOL: f64 = 1e-11;

#[derive(Debug, Clone)]
pub(crate) enum BlockShape {
    Linear { center: f64 },
    Smooth { knots: Vec<f64>, constraint: SumToZero },
}

#[derive(Debug, Clone)]
pub(crate) struct Block {
    pub id: NodeId,
    pub kind: TermKind,
    pub cols: Range<usize>,
    /// Penalty scaled so that the smoothing parameter is relative to the
    /// block's Gram matrix.
    pub penalty: Option<Mat>,
    /// Rank of `penalty`.
    pub penalty_rank: usize,
    pub shape: BlockShape,
    /// Constant within every group, so informed only by between-group
    /// variation.
    pub group_level: bool,
}

#[derive(Debug, Clone)]
pub(crate) struct GroupSums {
    pub count: usize,
    pub sizes: Vec<f64>,
    /// Per-group column sums of the design, `count x k`.
    pub colsums: Vec<Vec<f64>>,
    pub ysums: Vec<f64>,
    /// Scale of the ridge parameter: mean group size.
    pub scale: f64,
}

/// Design matrix with its sufficient statistics.
#[derive(Debug, Clone)]
pub struct Design {
    pub(crate) n: usize,
    pub(crate) k: usize,
    pub(crate) blocks: Vec<Block>,
    pub(crate) rows: Vec<f64>,
    pub(crate) y: Vec<f64>,
    pub(crate) y_mean: f64,
    pub(crate) gram: Mat,
    pub(crate) xty: Vec<f64>,
    pub(crate) yty: f64,
    pub(crate) groups: Option<GroupSums>,
    pub(crate) group_labels: Option<Vec<usize>>,
}

/// Smoothing parameters: one per term block (ignored for unpenalized terms)
/// plus the group-intercept ridge parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct Lambdas {
    pub terms: Vec<f64>,
    pub group: f64,
}

/// Solution of the penalized normal equations at fixed smoothing parameters.
#[derive(Debug, Clone)]
pub struct Solution {
    pub beta: Vec<f64>,
    pub xi: Option<Vec<f64>>,
    pub rss: f64,
    /// Penalty `sum_t lambda_t b_t' S_t b_t + lambda_g |xi|^2` at the solution.
    pub penalty: f64,
    pub edf: f64,
    pub edf_terms: Vec<f64>,
    pub edf_groups: f64,
    pub gcv: f64,
    /// Profiled restricted log-likelihood criterion, up to a constant
    /// (smaller is better).
    pub reml: f64,
    pub(crate) schur_inv: Mat,
}

impl Solution {
    pub fn criterion(&self, c: Criterion) -> f64 {
        match c {
            Criterion::Gcv => self.gcv,
            Criterion::Reml => self.reml,
        }
    }
}

fn frobenius(m: &Mat) -> f64 {
    libm::sqrt(m.data.iter().map(|v| v * v).sum::<f64>())
}

fn constant_within(values: &[f64], groups: &GroupIndex<'_>) -> bool {
    let mut first: Vec<Option<f64>> = vec![None; groups.count];
    values.iter().zip(groups.labels).all(|(&v, &l)| match first[l] {
        Some(f) => f == v,
        None => {
            first[l] = Some(v);
            true
        }
    })
}

impl Design {
    pub fn build(
        y: &[f64],
        predictors: &[Predictor<'_>],
        groups: Option<GroupIndex<'_>>,
        spec: &SmoothSpec,
    ) -> Result<Design> {
        let n = y.len();
        if n == 0 {
            return Err(Error::usage("empty response"));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::usage("response contains non-finite values"));
        }
        for p in predictors {
            if p.values.len() != n {
                return Err(Error::usage(format!(
                    "predictor {} has {} values, response has {}",
                    p.id,
                    p.values.len(),
                    n
                )));
            }
            if p.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::usage(format!("predictor {} contains non-finite values", p.id)));
            }
            if stats::unique_sorted(p.values).len() < 2 {
                return Err(Error::usage(format!(
                    "predictor {} has fewer than 2 distinct values",
                    p.id
                )));
            }
        }
        for (i, p) in predictors.iter().enumerate() {
            if predictors[..i].iter().any(|q| q.id == p.id) {
                return Err(Error::usage(format!("predictor {} given twice", p.id)));
            }
        }
        if let Some(g) = &groups {
            if g.labels.len() != n {
                return Err(Error::usage(format!(
                    "{} group labels for {} observations",
                    g.labels.len(),
                    n
                )));
            }
            if let Some(&bad) = g.labels.iter().find(|&&l| l >= g.count) {
                return Err(Error::usage(format!("group label {bad} out of range 0..{}", g.count)));
            }
        }

        // Column layout.
        let mut blocks = Vec::with_capacity(predictors.len());
        let mut k = 1;
        for p in predictors {
            let (shape, width) = match p.kind {
                TermKind::Linear => (
                    BlockShape::Linear {
                        center: stats::mean(p.values),
                    },
                    1,
                ),
                TermKind::Smooth => {
                    let knots = basis::make_knots(p.values, spec.n_basis, spec.knot_placement);
                    let nb = basis::n_basis(&knots);
                    let mut colsums = vec![0.0; nb];
                    let mut row = vec![0.0; nb];
                    for &x in p.values {
                        basis::basis_row(&knots, x, &mut row);
                        for (c, r) in colsums.iter_mut().zip(&row) {
                            *c += r;
                        }
                    }
                    (
                        BlockShape::Smooth {
                            knots,
                            constraint: SumToZero::new(&colsums),
                        },
                        nb - 1,
                    )
                }
            };
            blocks.push(Block {
                id: p.id,
                kind: p.kind,
                cols: k..k + width,
                penalty: None,
                penalty_rank: 0,
                shape,
                group_level: groups.as_ref().is_some_and(|g| constant_within(p.values, g)),
            });
            k += width;
        }

        // Rows of the design.
        let mut rows = vec![0.0; n * k];
        let mut scratch = Vec::new();
        for i in 0..n {
            rows[i * k] = 1.0;
        }
        for (b, p) in blocks.iter().zip(predictors) {
            match &b.shape {
                BlockShape::Linear { center } => {
                    for i in 0..n {
                        rows[i * k + b.cols.start] = p.values[i] - center;
                    }
                }
                BlockShape::Smooth { knots, constraint } => {
                    let nb = basis::n_basis(knots);
                    for i in 0..n {
                        scratch.clear();
                        scratch.resize(nb, 0.0);
                        basis::basis_row(knots, p.values[i], &mut scratch);
                        constraint.constrain_row(&mut scratch);
                        rows[i * k + b.cols.start..i * k + b.cols.end].copy_from_slice(&scratch);
                    }
                }
            }
        }

        let y_mean = stats::mean(y);
        let yc: Vec<f64> = y.iter().map(|v| v - y_mean).collect();
        let mut gram = Mat::zeros(k, k);
        let mut xty = vec![0.0; k];
        for i in 0..n {
            let r = &rows[i * k..(i + 1) * k];
            let yi = yc[i];
            for a in 0..k {
                let ra = r[a];
                if ra == 0.0 {
                    continue;
                }
                xty[a] += ra * yi;
                let g = &mut gram.data[a * k..(a + 1) * k];
                for b in a..k {
                    g[b] += ra * r[b];
                }
            }
        }
        for a in 0..k {
            for b in 0..a {
                gram[(a, b)] = gram[(b, a)];
            }
        }
        let yty = dot(&yc, &yc);

        // Penalties, scaled relative to each block's Gram matrix.
        for b in blocks.iter_mut() {
            if let BlockShape::Smooth { knots, constraint } = &b.shape {
                let nb = basis::n_basis(knots);
                let mut raw = basis::difference_penalty(nb, spec.penalty_order);
                if spec.shrink_null_space {
                    let p = basis::null_space_projector(nb, spec.penalty_order);
                    let w = frobenius(&raw) / frobenius(&p);
                    raw.data.iter_mut().zip(&p.data).for_each(|(r, v)| *r += w * v);
                }
                let s = constraint.constrain_penalty(&raw);
                let idx: Vec<usize> = b.cols.clone().collect();
                let g = gram.select(&idx, &idx);
                let (gs, ss) = (frobenius(&g), frobenius(&s));
                let scale = if ss > 0.0 && gs > 0.0 { gs / ss } else { 1.0 };
                let mut s = s;
                s.data.iter_mut().for_each(|v| *v *= scale);
                b.penalty = Some(s);
                // Null space: polynomials below the penalty order, minus the
                // constant removed by the centering constraint.
                b.penalty_rank = if spec.shrink_null_space {
                    b.cols.len()
                } else {
                    b.cols.len().saturating_sub(spec.penalty_order - 1)
                };
            }
        }

        let group_sums = groups.as_ref().map(|g| {
            let mut sizes = vec![0.0; g.count];
            let mut colsums = vec![vec![0.0; k]; g.count];
            let mut ysums = vec![0.0; g.count];
            for i in 0..n {
                let l = g.labels[i];
                sizes[l] += 1.0;
                ysums[l] += yc[i];
                for (c, r) in colsums[l].iter_mut().zip(&rows[i * k..(i + 1) * k]) {
                    *c += r;
                }
            }
            GroupSums {
                count: g.count,
                sizes,
                colsums,
                ysums,
                scale: n as f64 / g.count as f64,
            }
        });

        Ok(Design {
            n,
            k,
            blocks,
            rows,
            y: y.to_vec(),
            y_mean,
            gram,
            xty,
            yty,
            groups: group_sums,
            group_labels: groups.map(|g| g.labels.to_vec()),
        })
    }

    pub fn n_obs(&self) -> usize {
        self.n
    }

    pub fn n_terms(&self) -> usize {
        self.blocks.len()
    }

    pub fn has_groups(&self) -> bool {
        self.groups.is_some()
    }

    /// Indices of term blocks that carry a smoothing parameter.
    pub fn penalized_terms(&self) -> Vec<usize> {
        (0..self.blocks.len())
            .filter(|&t| self.blocks[t].penalty.is_some())
            .collect()
    }

    /// Per-group matrices `sum_g h_g h_g' / d_g^p` for `p = 1, 2`.
    fn group_products(&self, lambda_group: f64) -> Option<(Mat, Mat, Vec<f64>)> {
        let g = self.groups.as_ref()?;
        let k = self.k;
        let lam = lambda_group * g.scale;
        let mut k1 = Mat::zeros(k, k);
        let mut k2 = Mat::zeros(k, k);
        let d: Vec<f64> = g.sizes.iter().map(|s| s + lam).collect();
        for (h, &dg) in g.colsums.iter().zip(&d) {
            if dg <= 0.0 {
                continue;
            }
            for a in 0..k {
                if h[a] == 0.0 {
                    continue;
                }
                let f1 = h[a] / dg;
                let f2 = f1 / dg;
                for b in 0..k {
                    k1[(a, b)] += f1 * h[b];
                    k2[(a, b)] += f2 * h[b];
                }
            }
        }
        Some((k1, k2, d))
    }

    /// Solves the penalized normal equations. Fails with the index of the
    /// term owning the first non-positive pivot.
    pub fn solve(&self, lambdas: &Lambdas) -> core::result::Result<Solution, usize> {
        let products = self.group_products(lambdas.group);
        self.solve_with(lambdas, products.as_ref())
    }

    fn penalty_matrix(&self, lambdas: &Lambdas) -> Mat {
        let mut s = Mat::zeros(self.k, self.k);
        for (t, b) in self.blocks.iter().enumerate() {
            if let Some(p) = &b.penalty {
                let lam = lambdas.terms[t];
                let w = b.cols.len();
                for i in 0..w {
                    for j in 0..w {
                        s[(b.cols.start + i, b.cols.start + j)] += lam * p[(i, j)];
                    }
                }
            }
        }
        s
    }

    fn owner_of_column(&self, col: usize) -> usize {
        self.blocks
            .iter()
            .position(|b| b.cols.contains(&col))
            .unwrap_or(usize::MAX)
    }

    fn solve_with(
        &self,
        lambdas: &Lambdas,
        products: Option<&(Mat, Mat, Vec<f64>)>,
    ) -> core::result::Result<Solution, usize> {
        let k = self.k;
        let n = self.n as f64;
        let s = self.penalty_matrix(lambdas);
        let mut schur = self.gram.clone();
        for (a, v) in schur.data.iter_mut().zip(&s.data) {
            *a += v;
        }
        let mut rhs = self.xty.clone();
        if let (Some(g), Some((k1, _, d))) = (&self.groups, products) {
            for (a, v) in schur.data.iter_mut().zip(&k1.data) {
                *a -= v;
            }
            for (h, (&ys, &dg)) in g.colsums.iter().zip(g.ysums.iter().zip(d)) {
                if dg > 0.0 {
                    for a in 0..k {
                        rhs[a] -= h[a] * ys / dg;
                    }
                }
            }
        }
        let chol = Cholesky::new(&schur, PIVOT_TOL).map_err(|e| self.owner_of_column(e.0))?;
        let beta = chol.solve(&rhs);
        let inv = chol.inverse();
        let mut log_det_a = chol.log_det();
        let mut log_det_s = 0.0;
        let mut penalized_dims = 0usize;
        for (t, b) in self.blocks.iter().enumerate() {
            let lam = lambdas.terms.get(t).copied().unwrap_or(0.0);
            if b.penalty.is_some() && lam > 0.0 {
                log_det_s += b.penalty_rank as f64 * libm::log(lam);
                penalized_dims += b.penalty_rank;
            }
        }

        let mut edf_terms = vec![0.0; self.blocks.len()];
        let mut edf_x = 0.0;
        for j in 0..k {
            // (Schur^{-1} S)_jj
            let sj: f64 = (0..k).map(|l| inv[(j, l)] * s[(l, j)]).sum();
            let e = 1.0 - sj;
            edf_x += e;
            let t = self.owner_of_column(j);
            if t != usize::MAX {
                edf_terms[t] += e;
            }
        }

        let mut rss = self.yty - 2.0 * dot(&beta, &self.xty) + self.gram.quad(&beta);
        let mut penalty = s.quad(&beta);
        let mut xi = None;
        let mut edf_groups = 0.0;
        if let (Some(g), Some((_, k2, d))) = (&self.groups, products) {
            let lam = lambdas.group * g.scale;
            let mut xs = vec![0.0; g.count];
            for (l, x) in xs.iter_mut().enumerate() {
                let dg = d[l];
                if dg > 0.0 {
                    let h = &g.colsums[l];
                    *x = (g.ysums[l] - dot(h, &beta)) / dg;
                    rss += -2.0 * *x * g.ysums[l] + 2.0 * *x * dot(h, &beta) + g.sizes[l] * *x * *x;
                    edf_groups += 1.0 - lam / dg;
                }
            }
            // lam * tr(Schur^{-1} K2) from the coupling between blocks.
            let tr: f64 = (0..k)
                .map(|a| (0..k).map(|b| inv[(a, b)] * k2[(b, a)]).sum::<f64>())
                .sum();
            edf_groups -= lam * tr;
            penalty += lam * xs.iter().map(|v| v * v).sum::<f64>();
            log_det_a += d.iter().filter(|&&v| v > 0.0).map(|&v| libm::log(v)).sum::<f64>();
            if lam > 0.0 {
                log_det_s += g.count as f64 * libm::log(lam);
                penalized_dims += g.count;
            }
            xi = Some(xs);
        }
        let rss = rss.max(0.0);
        let edf = edf_x + edf_groups;
        let resid_df = n - edf;
        let gcv = if resid_df > 1e-8 {
            n * rss / (resid_df * resid_df)
        } else {
            f64::INFINITY
        };
        // Unpenalized dimensions, counting the group block.
        let free = (k + self.groups.as_ref().map_or(0, |g| g.count)) as f64 - penalized_dims as f64;
        let reml_df = n - free;
        let reml = if reml_df > 0.0 {
            0.5 * reml_df * libm::log((rss + penalty).max(f64::MIN_POSITIVE)) + 0.5 * log_det_a - 0.5 * log_det_s
        } else {
            f64::INFINITY
        };
        Ok(Solution {
            beta,
            xi,
            rss,
            penalty,
            edf,
            edf_terms,
            edf_groups,
            gcv,
            reml,
            schur_inv: inv,
        })
    }

    /// Coordinate search over the grid, one smoothing parameter at a time
    /// until no parameter moves. Returns the chosen parameters, the number of
    /// sweeps and whether the search converged within `max_sweeps`.
    pub fn search(&self, grid: &[f64], max_sweeps: usize, criterion: Criterion) -> Result<(Lambdas, usize, bool)> {
        let start = grid
            .iter()
            .enumerate()
            .min_by(|a, b| libm::fabs(libm::log(*a.1 + 1e-300)).total_cmp(&libm::fabs(libm::log(*b.1 + 1e-300))))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let penalized = self.penalized_terms();
        let mut idx_terms = vec![start; self.blocks.len()];
        let mut idx_group = start;
        let lambdas_of = |it: &[usize], ig: usize| Lambdas {
            terms: it.iter().map(|&i| grid[i]).collect(),
            group: grid[ig],
        };
        let mut products = self.group_products(grid[idx_group]);
        let mut best = match self.solve_with(&lambdas_of(&idx_terms, idx_group), products.as_ref()) {
            Ok(s) => s.criterion(criterion),
            Err(_) => f64::INFINITY,
        };
        let n_params = penalized.len() + usize::from(self.groups.is_some());
        if n_params == 0 || grid.len() == 1 {
            self.check_solvable(&lambdas_of(&idx_terms, idx_group))?;
            return Ok((lambdas_of(&idx_terms, idx_group), 0, true));
        }
        let mut sweeps = 0;
        let mut converged = false;
        while sweeps < max_sweeps {
            sweeps += 1;
            let mut moved = false;
            for &t in &penalized {
                let current = idx_terms[t];
                let mut choice = current;
                for cand in 0..grid.len() {
                    if cand == current {
                        continue;
                    }
                    idx_terms[t] = cand;
                    let score = self
                        .solve_with(&lambdas_of(&idx_terms, idx_group), products.as_ref())
                        .map(|s| s.criterion(criterion))
                        .unwrap_or(f64::INFINITY);
                    if score < best {
                        best = score;
                        choice = cand;
                    }
                }
                idx_terms[t] = choice;
                moved |= choice != current;
            }
            if self.groups.is_some() {
                let current = idx_group;
                let mut choice = current;
                for cand in 0..grid.len() {
                    if cand == current {
                        continue;
                    }
                    let p = self.group_products(grid[cand]);
                    let score = self
                        .solve_with(&lambdas_of(&idx_terms, cand), p.as_ref())
                        .map(|s| s.criterion(criterion))
                        .unwrap_or(f64::INFINITY);
                    if score < best {
                        best = score;
                        choice = cand;
                    }
                }
                if choice != current {
                    idx_group = choice;
                    products = self.group_products(grid[idx_group]);
                    moved = true;
                }
            }
            if !moved {
                converged = true;
                break;
            }
        }
        let mut lambdas = lambdas_of(&idx_terms, idx_group);
        if self.groups.is_some() {
            let lo = grid[idx_group.saturating_sub(1)];
            let hi = grid[(idx_group + 1).min(grid.len() - 1)];
            lambdas.group = self.refine_group(&lambdas, lo, hi, best, criterion);
        }
        self.check_solvable(&lambdas)?;
        Ok((lambdas, sweeps, converged))
    }

    /// Golden-section search for the group ridge parameter on a log scale
    /// between two grid neighbours. The group variance is a variance
    /// component rather than a smoothness choice, and the tests of
    /// group-constant terms are sensitive to it.
    fn refine_group(&self, lambdas: &Lambdas, lo: f64, hi: f64, at_grid: f64, criterion: Criterion) -> f64 {
        if !(lo > 0.0) || hi <= lo {
            return lambdas.group;
        }
        let score = |log_l: f64| {
            let group = libm::exp(log_l);
            let l = Lambdas {
                terms: lambdas.terms.clone(),
                group,
            };
            self.solve_with(&l, self.group_products(group).as_ref())
                .map(|s| s.criterion(criterion))
                .unwrap_or(f64::INFINITY)
        };
        let ratio = (libm::sqrt(5.0) - 1.0) / 2.0;
        let (mut a, mut b) = (libm::log(lo), libm::log(hi));
        let mut c = b - ratio * (b - a);
        let mut d = a + ratio * (b - a);
        let (mut fc, mut fd) = (score(c), score(d));
        for _ in 0..16 {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - ratio * (b - a);
                fc = score(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + ratio * (b - a);
                fd = score(d);
            }
        }
        let (x, fx) = if fc < fd { (c, fc) } else { (d, fd) };
        if fx < at_grid {
            libm::exp(x)
        } else {
            lambdas.group
        }
    }

    fn check_solvable(&self, lambdas: &Lambdas) -> Result<()> {
        match self.solve(lambdas) {
            Ok(_) => Ok(()),
            Err(t) => Err(Error::Fit {
                term: if t == usize::MAX {
                    "intercept".to_string()
                } else {
                    self.blocks[t].id.to_string()
                },
                reason: "rank-deficient design after centering".to_string(),
            }),
        }
    }

    /// Fitted values (without re-adding the response mean) computed row by row.
    pub(crate) fn fitted(&self, sol: &Solution) -> Vec<f64> {
        let k = self.k;
        (0..self.n)
            .map(|i| {
                let mut v = dot(&self.rows[i * k..(i + 1) * k], &sol.beta);
                if let (Some(xi), Some(labels)) = (&sol.xi, &self.group_labels) {
                    v += xi[labels[i]];
                }
                v
            })
            .collect()
    }

    /// Reference degrees of freedom `tr(2F - F^2)` of term `t`, where
    /// `F = A^{-1} X'X` is the influence of the data on the coefficients.
    /// At least the term's edf; it accounts for the spread a data-driven
    /// smoothing parameter adds to the test statistic.
    pub(crate) fn reference_df(&self, sol: &Solution, lambdas: &Lambdas, t: usize) -> f64 {
        let s = self.penalty_matrix(lambdas);
        let k = self.k;
        let f = |a: usize, b: usize| -> f64 {
            let is: f64 = (0..k).map(|l| sol.schur_inv[(a, l)] * s[(l, b)]).sum();
            if a == b {
                1.0 - is
            } else {
                -is
            }
        };
        let mut df = 0.0;
        for j in self.blocks[t].cols.clone() {
            let fjj = f(j, j);
            let ff: f64 = (0..k).map(|l| f(j, l) * f(l, j)).sum();
            df += 2.0 * fjj - ff;
        }
        df
    }

    /// Wald statistic `b_t' [(A^{-1})_tt]^{-1} b_t`. It equals the increase in
    /// the penalized residual sum of squares when the term is dropped with
    /// all smoothing parameters held fixed.
    pub(crate) fn wald(&self, sol: &Solution, t: usize) -> f64 {
        let idx: Vec<usize> = self.blocks[t].cols.clone().collect();
        let v = sol.schur_inv.select(&idx, &idx);
        let b: Vec<f64> = idx.iter().map(|&j| sol.beta[j]).collect();
        match Cholesky::new(&v, 1e-14) {
            Ok(ch) => dot(&b, &ch.solve(&b)).max(0.0),
            Err(_) => 0.0,
        }
    }
}
