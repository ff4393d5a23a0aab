//! Cubic B-spline bases with a sum-to-zero constraint and difference penalties.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::KnotPlacement;
use crate::linalg::Mat;
use crate::stats;

pub const DEGREE: usize = 3;

/// Clamped knot vector for `n_basis` cubic B-splines over the range of `x`.
/// The effective basis size shrinks when `x` has few distinct values.
pub fn make_knots(x: &[f64], n_basis: usize, placement: KnotPlacement) -> Vec<f64> {
    let u = stats::unique_sorted(x);
    let (a, b) = (u[0], u[u.len() - 1]);
    let nb = n_basis.min(u.len() + 2).max(DEGREE + 1);
    let interior = nb - DEGREE - 1;
    let mut knots = vec![a; DEGREE + 1];
    for j in 1..=interior {
        let p = j as f64 / (interior + 1) as f64;
        knots.push(match placement {
            KnotPlacement::Quantile => stats::quantile_sorted(&u, p),
            KnotPlacement::Uniform => a + p * (b - a),
        });
    }
    knots.extend(core::iter::repeat_n(b, DEGREE + 1));
    knots
}

pub fn n_basis(knots: &[f64]) -> usize {
    knots.len() - DEGREE - 1
}

/// Index `s` of the knot span containing `x`, clamped to the valid range.
fn find_span(knots: &[f64], x: f64) -> usize {
    let nb = n_basis(knots);
    let hi = nb - 1;
    if x >= knots[nb] {
        return hi;
    }
    if x <= knots[DEGREE] {
        return DEGREE;
    }
    // Largest s in [DEGREE, hi] with knots[s] <= x.
    let (mut lo, mut up) = (DEGREE, nb);
    while up - lo > 1 {
        let mid = (lo + up) / 2;
        if knots[mid] <= x {
            lo = mid;
        } else {
            up = mid;
        }
    }
    lo
}

/// Nonzero basis functions of the given degree on span `s`: entries
/// correspond to basis indices `s - degree ..= s`.
fn basis_funs(knots: &[f64], s: usize, x: f64, degree: usize) -> [f64; DEGREE + 1] {
    let mut n = [0.0; DEGREE + 1];
    let mut left = [0.0; DEGREE + 1];
    let mut right = [0.0; DEGREE + 1];
    n[0] = 1.0;
    for j in 1..=degree {
        left[j] = x - knots[s + 1 - j];
        right[j] = knots[s + j] - x;
        let mut saved = 0.0;
        for r in 0..j {
            let den = right[r + 1] + left[j - r];
            let temp = if den != 0.0 { n[r] / den } else { 0.0 };
            n[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        n[j] = saved;
    }
    n
}

/// Fill `out` (length `n_basis`) with the basis evaluated at `x`, which must
/// lie inside the knot range.
pub fn basis_row(knots: &[f64], x: f64, out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    let s = find_span(knots, x);
    let vals = basis_funs(knots, s, x, DEGREE);
    for (r, v) in vals.iter().enumerate() {
        out[s - DEGREE + r] = *v;
    }
}

fn eval_inside(knots: &[f64], coefs: &[f64], x: f64) -> f64 {
    let s = find_span(knots, x);
    let vals = basis_funs(knots, s, x, DEGREE);
    vals.iter().enumerate().map(|(r, v)| v * coefs[s - DEGREE + r]).sum()
}

fn derivative_inside(knots: &[f64], coefs: &[f64], x: f64) -> f64 {
    let s = find_span(knots, x);
    let vals = basis_funs(knots, s, x, DEGREE - 1);
    let mut d = 0.0;
    // Degree-2 functions on span s have indices s-2 ..= s.
    for (r, v) in vals.iter().take(DEGREE).enumerate() {
        let i = s - (DEGREE - 1) + r;
        let den = knots[i + DEGREE] - knots[i];
        if i >= 1 && den > 0.0 {
            d += v * DEGREE as f64 * (coefs[i] - coefs[i - 1]) / den;
        }
    }
    d
}

/// Spline value with linear continuation outside the knot range.
pub fn eval_spline(knots: &[f64], coefs: &[f64], x: f64) -> f64 {
    let a = knots[0];
    let b = knots[knots.len() - 1];
    if x < a {
        eval_inside(knots, coefs, a) + derivative_inside(knots, coefs, a) * (x - a)
    } else if x > b {
        eval_inside(knots, coefs, b) + derivative_inside(knots, coefs, b) * (x - b)
    } else {
        eval_inside(knots, coefs, x)
    }
}

/// `D'D` for the `order`-th difference matrix on `nb` coefficients.
pub fn difference_penalty(nb: usize, order: usize) -> Mat {
    let order = order.min(nb - 1);
    // Rows of the difference operator.
    let mut d: Vec<Vec<f64>> = (0..nb)
        .map(|i| {
            let mut r = vec![0.0; nb];
            r[i] = 1.0;
            r
        })
        .collect();
    for _ in 0..order {
        d = d
            .windows(2)
            .map(|w| w[1].iter().zip(&w[0]).map(|(a, b)| a - b).collect())
            .collect();
    }
    let mut s = Mat::zeros(nb, nb);
    for row in &d {
        for i in 0..nb {
            for j in 0..nb {
                s[(i, j)] += row[i] * row[j];
            }
        }
    }
    s
}

/// Orthogonal projector onto the null space of [`difference_penalty`]:
/// coefficient vectors that are polynomials of degree below `order` in the
/// coefficient index.
pub fn null_space_projector(nb: usize, order: usize) -> Mat {
    let order = order.min(nb - 1);
    let mid = (nb as f64 - 1.0) / 2.0;
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(order);
    for e in 0..order {
        let mut v: Vec<f64> = (0..nb)
            .map(|j| libm::pow((j as f64 - mid) / nb as f64, e as f64))
            .collect();
        for u in &q {
            let c: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(u).for_each(|(a, b)| *a -= c * b);
        }
        let norm = libm::sqrt(v.iter().map(|a| a * a).sum::<f64>());
        v.iter_mut().for_each(|a| *a /= norm);
        q.push(v);
    }
    let mut p = Mat::zeros(nb, nb);
    for u in &q {
        for a in 0..nb {
            for b in 0..nb {
                p[(a, b)] += u[a] * u[b];
            }
        }
    }
    p
}

/// Householder reparametrization onto the complement of the column-sum
/// vector, which makes every fitted curve sum to zero over the training data.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SumToZero {
    v: Vec<f64>,
    vtv: f64,
}

impl SumToZero {
    pub fn new(colsums: &[f64]) -> Self {
        let norm = libm::sqrt(colsums.iter().map(|c| c * c).sum::<f64>());
        let mut v = colsums.to_vec();
        v[0] += if colsums[0] >= 0.0 { norm } else { -norm };
        let vtv = v.iter().map(|a| a * a).sum();
        SumToZero { v, vtv }
    }

    fn reflect(&self, x: &mut [f64]) {
        if self.vtv == 0.0 {
            return;
        }
        let s = 2.0 * x.iter().zip(&self.v).map(|(a, b)| a * b).sum::<f64>() / self.vtv;
        for (xi, vi) in x.iter_mut().zip(&self.v) {
            *xi -= s * vi;
        }
    }

    /// Constrained row: `b H` with the first entry dropped.
    pub fn constrain_row(&self, row: &mut Vec<f64>) {
        self.reflect(row);
        row.remove(0);
    }

    /// Full coefficients `H [0; beta]` from constrained ones.
    pub fn expand(&self, beta: &[f64]) -> Vec<f64> {
        let mut full = Vec::with_capacity(beta.len() + 1);
        full.push(0.0);
        full.extend_from_slice(beta);
        self.reflect(&mut full);
        full
    }

    /// `Z' S Z` where `Z` holds the last `nb - 1` columns of `H`.
    pub fn constrain_penalty(&self, s: &Mat) -> Mat {
        let nb = s.rows;
        // H S H, computed column by column then row by row.
        let mut hs = s.clone();
        for j in 0..nb {
            let mut col: Vec<f64> = (0..nb).map(|i| hs[(i, j)]).collect();
            self.reflect(&mut col);
            for i in 0..nb {
                hs[(i, j)] = col[i];
            }
        }
        for i in 0..nb {
            let mut row: Vec<f64> = hs.row(i).to_vec();
            self.reflect(&mut row);
            hs.data[i * nb..(i + 1) * nb].copy_from_slice(&row);
        }
        let idx: Vec<usize> = (1..nb).collect();
        hs.select(&idx, &idx)
    }
}
