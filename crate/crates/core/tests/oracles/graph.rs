use std::collections::{HashMap, VecDeque};

use hscm_core::{shd, Dag, NodeId};

use super::unit_counts;

/// Edge state of every unordered pair: 0 absent, 1 forward, 2 backward.
pub type State = Vec<u8>;

pub fn pairs(p: usize) -> Vec<(usize, usize)> {
    (0..p).flat_map(|a| (a + 1..p).map(move |b| (a, b))).collect()
}

pub fn to_dag(p: usize, state: &State) -> Option<Dag> {
    let edges = pairs(p).into_iter().zip(state).filter_map(|((a, b), &st)| match st {
        1 => Some((NodeId::x(a), NodeId::x(b))),
        2 => Some((NodeId::x(b), NodeId::x(a))),
        _ => None,
    });
    Dag::from_edges(unit_counts(p), edges).ok()
}

pub fn state_of(p: usize, dag: &Dag) -> State {
    pairs(p)
        .into_iter()
        .map(|(a, b)| {
            if dag.has_edge(NodeId::x(a), NodeId::x(b)) {
                1
            } else if dag.has_edge(NodeId::x(b), NodeId::x(a)) {
                2
            } else {
                0
            }
        })
        .collect()
}

/// Every DAG over `p` unit nodes.
pub fn all_dags(p: usize) -> Vec<Dag> {
    let m = pairs(p).len();
    (0..3usize.pow(m as u32))
        .filter_map(|mut code| {
            let state: State = (0..m)
                .map(|_| {
                    let v = (code % 3) as u8;
                    code /= 3;
                    v
                })
                .collect();
            to_dag(p, &state)
        })
        .collect()
}

/// Breadth-first edit distance through DAGs only, where one edit inserts,
/// deletes or reverses a single edge.
pub fn edit_distance(p: usize, from: &State, to: &State) -> usize {
    let mut seen: HashMap<State, usize> = HashMap::new();
    let mut queue = VecDeque::new();
    seen.insert(from.clone(), 0);
    queue.push_back(from.clone());
    while let Some(s) = queue.pop_front() {
        let d = seen[&s];
        if &s == to {
            return d;
        }
        for i in 0..s.len() {
            for v in 0..3u8 {
                if v == s[i] {
                    continue;
                }
                let mut next = s.clone();
                next[i] = v;
                if !seen.contains_key(&next) && to_dag(p, &next).is_some() {
                    seen.insert(next.clone(), d + 1);
                    queue.push_back(next);
                }
            }
        }
    }
    unreachable!("every DAG is reachable through the empty graph")
}

/// Number of ordered pairs of 3-node DAGs where `shd` and the edit-distance
/// oracle disagree, and the number of pairs checked.
pub fn shd_disagreements_on_three_nodes() -> (usize, usize) {
    let dags = all_dags(3);
    let mut bad = 0;
    for a in &dags {
        for b in &dags {
            if shd(a, b).unwrap() != edit_distance(3, &state_of(3, a), &state_of(3, b)) {
                bad += 1;
            }
        }
    }
    (bad, dags.len() * dags.len())
}
