use alloc::vec;
use alloc::vec::Vec;

use super::*;
use crate::rng::Stream;

fn normals(seed: u64, n: usize) -> Vec<f64> {
    let mut s = Stream::new(seed, 0);
    (0..n).map(|_| s.normal()).collect()
}

#[test]
fn noiseless_linear_recovery() {
    let x: Vec<f64> = (0..100).map(|i| (i as f64 - 50.0) / 7.0).collect();
    let fit = fit_additive(&x, &[Predictor::linear(NodeId::x(0), &x)], None, &SmoothSpec::default()).unwrap();
    let pred = fit.predict(&[(NodeId::x(0), &x)], GroupMode::Global).unwrap();
    for (p, y) in pred.iter().zip(&x) {
        assert!((p - y).abs() < 1e-6);
    }
    // Closed-form least squares: slope 1, intercept 0 on centered x.
    match &fit.terms[0].shape {
        TermShape::Linear { slope, .. } => assert!((slope - 1.0).abs() < 1e-10),
        other => panic!("{other:?}"),
    }
}

#[test]
fn constant_response_gives_zero_terms() {
    let x = normals(1, 60);
    let z = normals(2, 60);
    let y = vec![5.0; 60];
    let fit = fit_additive(
        &y,
        &[Predictor::smooth(NodeId::x(0), &x), Predictor::linear(NodeId::x(1), &z)],
        None,
        &SmoothSpec::default(),
    )
    .unwrap();
    assert!((fit.intercept - 5.0).abs() < 1e-12);
    for v in x.iter().chain(&z) {
        for t in &fit.terms {
            assert!(t.shape.eval(*v).abs() < 1e-8);
        }
    }
}

#[test]
fn predict_at_training_points_matches_fitted() {
    let x = normals(3, 120);
    let e = normals(4, 120);
    let labels: Vec<usize> = (0..120).map(|i| i % 6).collect();
    let y: Vec<f64> = x
        .iter()
        .zip(&e)
        .zip(&labels)
        .map(|((a, b), &g)| libm::sin(*a) + 0.3 * b + g as f64 * 0.2)
        .collect();
    let out = fit_additive_full(
        &y,
        &[Predictor::smooth(NodeId::x(0), &x)],
        Some(GroupIndex {
            labels: &labels,
            count: 6,
        }),
        &SmoothSpec::default(),
    )
    .unwrap();
    let pred = out
        .fit
        .predict(&[(NodeId::x(0), &x)], GroupMode::Groups(&labels))
        .unwrap();
    for (p, f) in pred.iter().zip(&out.fitted) {
        assert!((p - f).abs() < 1e-10);
    }
}

#[test]
fn centering_of_smooth_terms() {
    let x = normals(5, 200);
    let y: Vec<f64> = x.iter().map(|v| v * v + libm::exp(*v / 2.0)).collect();
    let fit = fit_additive(&y, &[Predictor::smooth(NodeId::x(0), &x)], None, &SmoothSpec::default()).unwrap();
    let mean: f64 = x.iter().map(|v| fit.terms[0].shape.eval(*v)).sum::<f64>() / x.len() as f64;
    assert!(mean.abs() < 1e-8, "{mean}");
}

#[test]
fn length_mismatch_and_bad_terms_are_usage_errors() {
    let x = normals(6, 30);
    let y = normals(7, 31);
    assert!(matches!(
        fit_additive(&y, &[Predictor::smooth(NodeId::x(0), &x)], None, &SmoothSpec::default()),
        Err(Error::Usage(_))
    ));
    let c = vec![1.0; 30];
    assert!(matches!(
        fit_additive(&x, &[Predictor::smooth(NodeId::x(1), &c)], None, &SmoothSpec::default()),
        Err(Error::Usage(_))
    ));
}

#[test]
fn collinear_linear_terms_name_the_offending_term() {
    let x = normals(8, 50);
    let x2: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
    let y = normals(9, 50);
    let err = fit_additive(
        &y,
        &[
            Predictor::linear(NodeId::x(0), &x),
            Predictor::linear(NodeId::x(1), &x2),
        ],
        None,
        &SmoothSpec::default(),
    )
    .unwrap_err();
    match err {
        Error::Fit { term, .. } => assert_eq!(term, "X2"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn unknown_term_in_predict_is_rejected() {
    let x = normals(10, 40);
    let fit = fit_additive(&x, &[Predictor::linear(NodeId::x(0), &x)], None, &SmoothSpec::default()).unwrap();
    assert!(fit.predict(&[(NodeId::x(5), &x)], GroupMode::Global).is_err());
    assert!(fit.term_pvalue(NodeId::x(5)).is_err());
}

#[test]
fn constant_fit_predicts_constant() {
    let y = vec![2.5; 10];
    let fit = fit_additive(&y, &[], None, &SmoothSpec::default()).unwrap();
    assert_eq!(fit.predict(&[], GroupMode::Global).unwrap(), vec![2.5]);
    assert!(fit.residual_variance.abs() < 1e-20);
}

#[test]
fn self_regression_is_perfectly_significant() {
    let y = normals(11, 100);
    let fit = fit_additive(&y, &[Predictor::linear(NodeId::x(0), &y)], None, &SmoothSpec::default()).unwrap();
    assert!(fit.terms[0].p_value < 1e-12);
}

#[test]
fn wald_statistic_equals_penalized_rss_increase() {
    let x1 = normals(12, 150);
    let x2 = normals(13, 150);
    let e = normals(14, 150);
    let labels: Vec<usize> = (0..150).map(|i| i % 5).collect();
    let y: Vec<f64> = (0..150)
        .map(|i| libm::sin(2.0 * x1[i]) + 0.4 * x2[i] + 0.5 * e[i])
        .collect();
    let groups = Some(GroupIndex {
        labels: &labels,
        count: 5,
    });
    let spec = SmoothSpec::default();
    let preds = [
        Predictor::smooth(NodeId::x(0), &x1),
        Predictor::smooth(NodeId::x(1), &x2),
    ];
    let full = Design::build(&y, &preds, groups, &spec).unwrap();
    let lam = Lambdas {
        terms: vec![0.3, 2.0],
        group: 0.1,
    };
    let sol = full.solve(&lam).unwrap();
    for drop in 0..2 {
        let keep = [preds[1 - drop]];
        let reduced = Design::build(&y, &keep, groups, &spec).unwrap();
        let rsol = reduced
            .solve(&Lambdas {
                terms: vec![lam.terms[1 - drop]],
                group: lam.group,
            })
            .unwrap();
        let delta = (rsol.rss + rsol.penalty) - (sol.rss + sol.penalty);
        let wald = full.wald(&sol, drop);
        assert!(
            (delta - wald).abs() < 1e-7 * (1.0 + wald),
            "term {drop}: {delta} vs {wald}"
        );
    }
}

#[test]
fn group_intercepts_absorb_group_shifts() {
    let m = 8;
    let n = 40;
    let x = normals(15, m * n);
    let e = normals(16, m * n);
    let labels: Vec<usize> = (0..m * n).map(|i| i / n).collect();
    let shift: Vec<f64> = (0..m).map(|g| g as f64 - 3.5).collect();
    let y: Vec<f64> = (0..m * n).map(|i| 0.7 * x[i] + shift[labels[i]] + 0.2 * e[i]).collect();
    let fit = fit_additive(
        &y,
        &[Predictor::linear(NodeId::x(0), &x)],
        Some(GroupIndex {
            labels: &labels,
            count: m,
        }),
        &SmoothSpec::default(),
    )
    .unwrap();
    let xi = fit.group_intercepts.as_ref().unwrap();
    for g in 0..m {
        assert!((xi[g] - shift[g]).abs() < 0.15, "group {g}: {} vs {}", xi[g], shift[g]);
    }
    let weighted: f64 = xi.iter().sum::<f64>();
    assert!(weighted.abs() < 1e-9);
}

#[test]
fn degenerate_group_is_flagged() {
    let x = normals(17, 21);
    let labels: Vec<usize> = (0..21).map(|i| if i == 20 { 2 } else { i % 2 }).collect();
    let fit = fit_additive(
        &x,
        &[],
        Some(GroupIndex {
            labels: &labels,
            count: 3,
        }),
        &SmoothSpec::default(),
    )
    .unwrap();
    assert!(fit.warnings.contains(&FitWarning::DegenerateGroup { group: 2 }));
}
