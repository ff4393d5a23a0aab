//! Measurements and independent oracles shared by the property tests and the
//! acceptance gate. Each function returns what it measured so callers can
//! report it as well as assert on it.
#![allow(dead_code)]

pub mod cam;
pub mod gam;
pub mod graph;
pub mod intervene;

use hscm_core::graph::NodeCounts;
use hscm_core::rng::Stream;

pub fn unit_counts(p: usize) -> NodeCounts {
    NodeCounts { z: 0, w: 0, x: p, u: 0 }
}

pub fn normals(s: &mut Stream, n: usize) -> Vec<f64> {
    (0..n).map(|_| s.normal()).collect()
}

pub fn uniform(s: &mut Stream, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| s.uniform_range(lo, hi)).collect()
}

pub fn standardized(x: &[f64]) -> Vec<f64> {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let sd = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    x.iter().map(|v| (v - mean) / sd).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
