mod oracles;

use std::collections::BTreeSet;

use hscm_core::cam::{cam, greedy_order_search_traced, preliminary_neighborhood, prune, CamConfig};
use hscm_core::gam::{fit_additive, Predictor};
use hscm_core::graph::NodeCounts;
use hscm_core::rng::Stream;
use hscm_core::simgen::{Family, FuncSpec};
use hscm_core::{shd, Dag, NodeId};
use oracles::{normals, standardized};
use proptest::prelude::*;

fn counts(p: usize) -> NodeCounts {
    oracles::unit_counts(p)
}

#[test]
fn sine_direction_is_recovered() {
    let out = oracles::cam::sine_direction(20);
    assert_eq!(out.oracle_disagreements, 0);
    assert!(out.correct >= 18, "{}/20", out.correct);
}

#[test]
fn null_data_yields_few_edges() {
    let mean = oracles::cam::null_edge_mean(50);
    assert!(mean <= 0.3, "mean edges {mean}");
}

#[test]
fn null_search_edges_clear_threshold_and_are_pruned() {
    let config = CamConfig::default();
    let mut before = 0;
    let mut after = 0;
    for seed in 0..20 {
        let mut s = Stream::new(seed, 42);
        let n = 500;
        let data: Vec<Vec<f64>> = (0..4).map(|_| normals(&mut s, n)).collect();
        let cand = preliminary_neighborhood(&data, &config).unwrap();
        let (full, trace) = greedy_order_search_traced(&data, &cand, &config).unwrap();
        assert!(trace.steps.iter().all(|st| st.2 > config.gain_threshold * n as f64));
        before += full.edge_count();
        after += prune(&data, &full, &config).unwrap().edge_count();
    }
    eprintln!("null edges over 20 seeds: {before} before pruning, {after} after");
    assert!(after <= 2, "{after} edges survive pruning");
}

#[test]
fn three_node_greedy_beats_empty_graph() {
    let out = oracles::cam::three_node_greedy(50);
    eprintln!("largest greedy-to-optimum log-likelihood gap: {:.3}", out.worst_gap);
    assert_eq!(out.below_empty, 0);
}

#[test]
fn chain_neighbourhood_follows_deviance_ranking() {
    let mut s = Stream::new(3, 44);
    let n = 500;
    let x1 = normals(&mut s, n);
    let x2: Vec<f64> = x1.iter().map(|&v| 2.0 * v.sin() + 0.3 * s.normal()).collect();
    let x3: Vec<f64> = x2.iter().map(|&v| v * v / 2.0 + 0.3 * s.normal()).collect();
    let data = vec![x1, x2, x3];
    let config = CamConfig {
        pns_max_parents: 1,
        ..CamConfig::default()
    };
    let cand = preliminary_neighborhood(&data, &config).unwrap();
    assert!(cand[1].contains(&0) && cand[1].contains(&2));
    // Oracle: the kept predictor of each node is the one whose removal
    // increases the residual sum of squares most.
    for k in 0..3 {
        let others: Vec<usize> = (0..3).filter(|&j| j != k).collect();
        let full = fit_additive(
            &data[k],
            &others
                .iter()
                .map(|&j| Predictor::smooth(NodeId::x(j), &data[j]))
                .collect::<Vec<_>>(),
            None,
            &config.score_spec,
        )
        .unwrap();
        let drop_cost = |j: usize| {
            let keep = others.iter().find(|&&o| o != j).copied().unwrap();
            fit_additive(
                &data[k],
                &[Predictor::smooth(NodeId::x(keep), &data[keep])],
                None,
                &config.score_spec,
            )
            .unwrap()
            .rss - full.rss
        };
        let top = if drop_cost(others[0]) >= drop_cost(others[1]) {
            others[0]
        } else {
            others[1]
        };
        assert!(cand[k].contains(&top), "node {k}");
    }
}

#[test]
fn injected_noise_parent_is_pruned() {
    let config = CamConfig::default();
    let mut removed = 0;
    for seed in 0..200 {
        let mut s = Stream::new(seed, 45);
        let n = 200;
        let x1 = normals(&mut s, n);
        let noise = normals(&mut s, n);
        let y: Vec<f64> = x1.iter().map(|&v| 2.0 * v.sin() + 0.5 * s.normal()).collect();
        let data = vec![x1, noise, y];
        let dag = Dag::from_edges(counts(3), [(NodeId::x(0), NodeId::x(2)), (NodeId::x(1), NodeId::x(2))]).unwrap();
        let pruned = prune(&data, &dag, &config).unwrap();
        assert!(pruned.has_edge(NodeId::x(0), NodeId::x(2)), "seed {seed}");
        if !pruned.has_edge(NodeId::x(1), NodeId::x(2)) {
            removed += 1;
        }
    }
    assert!(removed >= 198, "{removed}/200");
}

#[test]
fn strong_four_variable_sem_is_recovered() {
    let config = CamConfig::default();
    let mut exact = 0;
    for seed in 0..20 {
        let mut s = Stream::new(seed, 46);
        let n = 2000;
        let mut order = [0usize, 1, 2, 3];
        s.shuffle(&mut order);
        let mut edges = Vec::new();
        let mut cols = vec![Vec::new(); 4];
        for i in 0..4 {
            let node = order[i];
            let mut col: Vec<f64> = (0..n).map(|_| 0.5 * s.normal()).collect();
            if i > 0 {
                let parent = order[s.index(i)];
                let f = FuncSpec {
                    family: [Family::Sin, Family::Square, Family::Cubic][s.index(3)],
                    sign: s.sign(),
                    coefficient: s.uniform_range(1.0, 2.0),
                };
                let src = standardized(&cols[parent]);
                for (c, v) in col.iter_mut().zip(&src) {
                    *c += f.apply(*v);
                }
                edges.push((NodeId::x(parent), NodeId::x(node)));
            }
            cols[node] = col;
        }
        let truth = Dag::from_edges(counts(4), edges).unwrap();
        let est = cam(&cols, &config).unwrap();
        if shd(&est, &truth).unwrap() == 0 {
            exact += 1;
        }
    }
    assert!(exact >= 16, "{exact}/20 exact");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn search_is_acyclic_and_pruning_only_removes(seed in 0u64..100_000) {
        let mut s = Stream::new(seed, 47);
        let n = 120;
        let x0 = normals(&mut s, n);
        let x1: Vec<f64> = x0.iter().map(|&v| v.sin() + 0.5 * s.normal()).collect();
        let x2: Vec<f64> = x1.iter().map(|&v| v * v + 0.5 * s.normal()).collect();
        let x3 = normals(&mut s, n);
        let data = vec![x0, x1, x2, x3];
        let config = CamConfig::default();
        let cand = preliminary_neighborhood(&data, &config).unwrap();
        for k in 0..4 {
            for &j in &cand[k] {
                prop_assert!(cand[j].contains(&k));
            }
        }
        let (full, trace) = greedy_order_search_traced(&data, &cand, &config).unwrap();
        let mut replay = Dag::empty(counts(4));
        for &(a, b, gain) in &trace.steps {
            prop_assert!(gain > 0.0);
            replay.add_edge(a, b).unwrap();
            prop_assert_eq!(replay.topological_order().len(), 4);
        }
        prop_assert_eq!(&replay, &full);
        let pruned = prune(&data, &full, &config).unwrap();
        let kept: BTreeSet<_> = pruned.edges().collect();
        let before: BTreeSet<_> = full.edges().collect();
        prop_assert!(kept.is_subset(&before));
    }
}
