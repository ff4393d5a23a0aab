use hscm_core::cam::{cam, dag_score, greedy_order_search, preliminary_neighborhood, CamConfig};
use hscm_core::rng::Stream;
use hscm_core::simgen::{Family, FuncSpec};
use hscm_core::{Dag, NodeId};

use super::{graph::all_dags, normals, standardized, unit_counts};

pub fn sine_pair(s: &mut Stream, n: usize) -> Vec<Vec<f64>> {
    let x1 = normals(s, n);
    let x2 = x1.iter().map(|&v| (2.0 * v).sin() + 0.3 * s.normal()).collect();
    vec![x1, x2]
}

pub struct DirectionOutcome {
    pub correct: usize,
    pub seeds: usize,
    /// Seeds where the chosen edge disagrees with the exhaustive two-DAG scores.
    pub oracle_disagreements: usize,
}

/// X1 -> X2 through a sine at n = 500.
pub fn sine_direction(seeds: u64) -> DirectionOutcome {
    let config = CamConfig::default();
    let forward = Dag::from_edges(unit_counts(2), [(NodeId::x(0), NodeId::x(1))]).unwrap();
    let backward = Dag::from_edges(unit_counts(2), [(NodeId::x(1), NodeId::x(0))]).unwrap();
    let mut out = DirectionOutcome {
        correct: 0,
        seeds: seeds as usize,
        oracle_disagreements: 0,
    };
    for seed in 0..seeds {
        let data = sine_pair(&mut Stream::new(seed, 40), 500);
        let d = cam(&data, &config).unwrap();
        let f = dag_score(&data, &forward, &config.score_spec).unwrap();
        let b = dag_score(&data, &backward, &config.score_spec).unwrap();
        let chose_forward = d.has_edge(NodeId::x(0), NodeId::x(1));
        let chose_backward = d.has_edge(NodeId::x(1), NodeId::x(0));
        if chose_forward {
            out.correct += 1;
        }
        if (chose_forward || chose_backward) && chose_forward != (f > b) {
            out.oracle_disagreements += 1;
        }
    }
    out
}

/// Mean number of edges CAM returns on four independent normals, n = 200.
pub fn null_edge_mean(seeds: u64) -> f64 {
    let config = CamConfig::default();
    let total: usize = (0..seeds)
        .map(|seed| {
            let mut s = Stream::new(seed, 41);
            let data: Vec<Vec<f64>> = (0..4).map(|_| normals(&mut s, 200)).collect();
            cam(&data, &config).unwrap().edge_count()
        })
        .sum();
    total as f64 / seeds as f64
}

/// A random, possibly weak, 3-variable additive model.
pub fn three_node_instance(seed: u64, n: usize) -> Vec<Vec<f64>> {
    let mut s = Stream::new(seed, 43);
    let mut order = [0usize, 1, 2];
    s.shuffle(&mut order);
    let mut cols = vec![Vec::new(); 3];
    cols[order[0]] = normals(&mut s, n);
    for i in 1..3 {
        let parent = order[s.index(i)];
        let f = FuncSpec {
            family: Family::ALL[s.index(6)],
            sign: s.sign(),
            coefficient: s.uniform_range(0.0, 2.0),
        };
        let src = standardized(&cols[parent]);
        cols[order[i]] = src.iter().map(|&v| f.apply(v) + s.normal()).collect();
    }
    cols
}

pub struct GreedyOutcome {
    /// Instances where the greedy DAG scores below the empty graph.
    pub below_empty: usize,
    pub instances: usize,
    /// Largest log-likelihood gap between the best of all 25 DAGs and greedy.
    pub worst_gap: f64,
}

pub fn three_node_greedy(instances: u64) -> GreedyOutcome {
    let config = CamConfig::default();
    let dags = all_dags(3);
    assert_eq!(dags.len(), 25);
    let empty = Dag::empty(unit_counts(3));
    let mut out = GreedyOutcome {
        below_empty: 0,
        instances: instances as usize,
        worst_gap: 0.0,
    };
    for seed in 0..instances {
        let cols = three_node_instance(seed, 150);
        let cand = preliminary_neighborhood(&cols, &config).unwrap();
        let greedy = greedy_order_search(&cols, &cand, &config).unwrap();
        let g = dag_score(&cols, &greedy, &config.score_spec).unwrap();
        let e = dag_score(&cols, &empty, &config.score_spec).unwrap();
        if g < e {
            out.below_empty += 1;
        }
        let best = dags
            .iter()
            .map(|d| dag_score(&cols, d, &config.score_spec).unwrap())
            .fold(f64::NEG_INFINITY, f64::max);
        out.worst_gap = out.worst_gap.max(best - g);
    }
    out
}
