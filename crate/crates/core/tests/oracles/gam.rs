use hscm_core::gam::{eval_spline, fit_additive, fit_additive_full, Criterion, Predictor, SmoothSpec, TermShape};
use hscm_core::rng::Stream;
use hscm_core::NodeId;

use super::{dot, norm, uniform};

/// Basis column `j` of a fitted smooth, evaluated at `x`.
pub fn basis_column(knots: &[f64], nb: usize, j: usize, x: &[f64]) -> Vec<f64> {
    let mut e = vec![0.0; nb];
    e[j] = 1.0;
    x.iter().map(|&v| eval_spline(knots, &e, v)).collect()
}

pub fn smooth_parts(shape: &TermShape) -> (&[f64], &[f64]) {
    match shape {
        TermShape::Smooth { knots, coefs } => (knots, coefs),
        TermShape::Linear { .. } => panic!("expected a smooth term"),
    }
}

pub fn kolmogorov_uniform(p: &mut [f64]) -> f64 {
    p.sort_by(f64::total_cmp);
    let n = p.len() as f64;
    p.iter()
        .enumerate()
        .map(|(i, &v)| (v - i as f64 / n).abs().max(((i + 1) as f64 / n - v).abs()))
        .fold(0.0, f64::max)
}

/// p-value of a smooth of pure noise on an unrelated uniform predictor.
pub fn null_pvalue(seed: u64, n: usize) -> f64 {
    let mut s = Stream::new(seed, 0);
    let x = uniform(&mut s, n, -2.0, 2.0);
    let y: Vec<f64> = (0..n).map(|_| s.normal()).collect();
    fit_additive(&y, &[Predictor::smooth(NodeId::x(0), &x)], None, &SmoothSpec::default())
        .unwrap()
        .terms[0]
        .p_value
}

/// Kolmogorov distance of null p-values from uniform, n = 200.
pub fn null_ks(reps: u64) -> f64 {
    let mut p: Vec<f64> = (0..reps).map(|rep| null_pvalue(1000 + rep, 200)).collect();
    kolmogorov_uniform(&mut p)
}

/// Largest absolute mean of a fitted smooth over its training values.
pub fn centering_error(seeds: u64) -> f64 {
    let mut worst: f64 = 0.0;
    for seed in 0..seeds {
        let mut s = Stream::new(seed, 9);
        let a = uniform(&mut s, 120, -1.0, 4.0);
        let b = uniform(&mut s, 120, -5.0, 5.0);
        let y: Vec<f64> = (0..120)
            .map(|i| a[i].exp().min(20.0) + b[i].abs() + s.normal())
            .collect();
        let pred = [Predictor::smooth(NodeId::x(0), &a), Predictor::smooth(NodeId::x(1), &b)];
        let fit = fit_additive(&y, &pred, None, &SmoothSpec::default()).unwrap();
        for (t, x) in fit.terms.iter().zip([&a, &b]) {
            let mean = x.iter().map(|&v| t.shape.eval(v)).sum::<f64>() / x.len() as f64;
            worst = worst.max(mean.abs());
        }
    }
    worst
}

/// Largest relative inner product between residuals and any column of the
/// unpenalized design (intercept, linear term, raw spline bases).
pub fn orthogonality_error() -> f64 {
    let mut s = Stream::new(5, 0);
    let a = uniform(&mut s, 300, -2.0, 2.0);
    let b = uniform(&mut s, 300, 0.0, 5.0);
    let c = uniform(&mut s, 300, -1.0, 1.0);
    let y: Vec<f64> = (0..300)
        .map(|i| a[i].sin() + (b[i] / 2.0).cos() + 0.5 * c[i] + 0.2 * s.normal())
        .collect();
    let spec = SmoothSpec::default().fixed(0.0);
    let pred = [
        Predictor::smooth(NodeId::x(0), &a),
        Predictor::smooth(NodeId::x(1), &b),
        Predictor::linear(NodeId::x(2), &c),
    ];
    let out = fit_additive_full(&y, &pred, None, &spec).unwrap();
    let r = &out.residuals;
    let ones = vec![1.0; r.len()];
    let rel = |col: &[f64]| dot(r, col).abs() / (norm(r) * norm(col));
    let mut worst = rel(&ones).max(rel(&c));
    for (t, x) in out.fit.terms.iter().take(2).zip([&a, &b]) {
        let (knots, coefs) = smooth_parts(&t.shape);
        for j in 0..coefs.len() {
            worst = worst.max(rel(&basis_column(knots, coefs.len(), j, x)));
        }
    }
    worst
}

/// Seeds where the GCV-selected fit does not attain the minimum GCV over a
/// scan of fixed smoothing parameters.
pub fn gcv_grid_misses(seeds: u64) -> usize {
    (0..seeds)
        .filter(|&seed| {
            let mut s = Stream::new(seed, 3);
            let x = uniform(&mut s, 150, -3.0, 3.0);
            let y: Vec<f64> = x.iter().map(|&v| v.sin() + 0.5 * s.normal()).collect();
            let spec = SmoothSpec {
                criterion: Criterion::Gcv,
                ..SmoothSpec::default()
            };
            let pred = [Predictor::smooth(NodeId::x(0), &x)];
            let chosen = fit_additive(&y, &pred, None, &spec).unwrap();
            let scan = spec
                .lambda_grid
                .iter()
                .map(|&l| fit_additive(&y, &pred, None, &spec.fixed(l)).unwrap().gcv)
                .fold(f64::INFINITY, f64::min);
            chosen.gcv > scan * (1.0 + 1e-12)
        })
        .count()
}

/// Largest prediction error when fitting noiseless `y = 1.5 - 2 x1 + 0.5 x2`
/// with one smooth and one linear term.
pub fn noiseless_linear_error() -> f64 {
    let mut s = Stream::new(8, 0);
    let n = 200;
    let a = uniform(&mut s, n, -3.0, 3.0);
    let b = uniform(&mut s, n, 0.0, 10.0);
    let truth = |u: f64, v: f64| 1.5 - 2.0 * u + 0.5 * v;
    let y: Vec<f64> = a.iter().zip(&b).map(|(&u, &v)| truth(u, v)).collect();
    let pred = [Predictor::smooth(NodeId::x(0), &a), Predictor::linear(NodeId::x(1), &b)];
    let fit = fit_additive(&y, &pred, None, &SmoothSpec::default()).unwrap();
    let grid: Vec<f64> = (0..50).map(|i| -3.0 + 6.0 * i as f64 / 49.0).collect();
    grid.iter()
        .flat_map(|&u| [0.0, 5.0, 10.0].map(|v| (u, v)))
        .map(|(u, v)| (fit.predict_point(&[u, v], None) - truth(u, v)).abs())
        .fold(0.0, f64::max)
}
