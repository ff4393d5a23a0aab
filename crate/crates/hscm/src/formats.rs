//! Graph exports: Graphviz DOT and a JSON edge list.

use std::fmt::Write as _;

use hscm_core::{Dag, Level, NodeId};

use crate::error::{AppError, Result};

fn cluster(out: &mut String, name: &str, label: &str, nodes: &[NodeId], shape: &str) {
    if nodes.is_empty() {
        return;
    }
    let _ = writeln!(out, "  subgraph cluster_{name} {{");
    let _ = writeln!(out, "    label=\"{label}\";");
    let _ = writeln!(out, "    node [shape={shape}];");
    for n in nodes {
        let _ = writeln!(out, "    {n};");
    }
    out.push_str("  }\n");
}

/// DOT rendering with one cluster per level; latent nodes are dashed.
pub fn to_dot(dag: &Dag) -> String {
    let nodes = dag.nodes();
    let of =
        |levels: &[Level]| -> Vec<NodeId> { nodes.iter().copied().filter(|n| levels.contains(&n.level)).collect() };
    let mut out = String::from("digraph hscm {\n  rankdir=TB;\n");
    cluster(
        &mut out,
        "group",
        "group level",
        &of(&[Level::GroupZ, Level::GroupW]),
        "box",
    );
    cluster(
        &mut out,
        "latent",
        "latent",
        &of(&[Level::LatentU]),
        "box, style=dashed",
    );
    cluster(&mut out, "unit", "unit level", &of(&[Level::Unit]), "ellipse");
    for (a, b) in dag.edges() {
        let _ = writeln!(out, "  {a} -> {b};");
    }
    out.push_str("}\n");
    out
}

/// Edges of a DOT document written by [`to_dot`] or any digraph using plain
/// `A -> B;` statements.
pub fn parse_dot_edges(text: &str) -> Result<Vec<(NodeId, NodeId)>> {
    let body = text.trim();
    if !body.starts_with("digraph") || !body.ends_with('}') {
        return Err(AppError::Usage("not a DOT digraph".into()));
    }
    let mut edges = Vec::new();
    for stmt in body.split([';', '\n']) {
        let Some((a, b)) = stmt.split_once("->") else {
            continue;
        };
        let a: NodeId = a.trim().parse()?;
        let b: NodeId = b.trim().trim_end_matches('}').trim().parse()?;
        edges.push((a, b));
    }
    Ok(edges)
}

pub fn to_graph_json(dag: &Dag) -> String {
    serde_json::to_string_pretty(dag).expect("graphs always serialize") + "\n"
}

pub fn from_graph_json(text: &str) -> Result<Dag> {
    serde_json::from_str(text).map_err(|e| AppError::Usage(format!("invalid graph JSON: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use hscm_core::graph::NodeCounts;

    fn sample() -> Dag {
        let counts = NodeCounts { z: 2, w: 1, x: 3, u: 1 };
        Dag::from_edges(
            counts,
            [
                (NodeId::z(0), NodeId::z(1)),
                (NodeId::z(1), NodeId::x(0)),
                (NodeId::u(0), NodeId::x(2)),
                (NodeId::x(0), NodeId::x(1)),
            ],
        )
        .unwrap()
    }

    #[test]
    fn dot_round_trips_edges() {
        let d = sample();
        let dot = to_dot(&d);
        let mut parsed = parse_dot_edges(&dot).unwrap();
        let mut expected: Vec<_> = d.edges().collect();
        parsed.sort();
        expected.sort();
        assert_eq!(parsed, expected);
        assert!(dot.contains("style=dashed"));
    }

    #[test]
    fn json_round_trips() {
        let d = sample();
        assert_eq!(from_graph_json(&to_graph_json(&d)).unwrap(), d);
    }

    #[test]
    fn json_rejects_cycles() {
        let text = r#"{"levels":{"z":0,"w":0,"x":2},"edges":[["X1","X2"],["X2","X1"]]}"#;
        assert!(from_graph_json(text).is_err());
    }
}
