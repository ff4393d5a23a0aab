//! Leveled DAGs over group-level, unit-level and latent nodes.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Level of a node. The declaration order is the tie-break order used by
/// [`Dag::topological_order`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Level {
    GroupZ,
    GroupW,
    LatentU,
    Unit,
}

impl Level {
    pub fn prefix(self) -> char {
        match self {
            Level::GroupZ => 'Z',
            Level::GroupW => 'W',
            Level::LatentU => 'U',
            Level::Unit => 'X',
        }
    }

    pub fn is_group(self) -> bool {
        matches!(self, Level::GroupZ | Level::GroupW | Level::LatentU)
    }
}

/// A node: its level and a 0-based index within that level.
///
/// Displays and serializes 1-based, e.g. `Z3` is `NodeId::z(2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId {
    pub level: Level,
    pub index: u32,
}

impl NodeId {
    pub const fn new(level: Level, index: usize) -> Self {
        NodeId {
            level,
            index: index as u32,
        }
    }
    pub const fn z(index: usize) -> Self {
        NodeId::new(Level::GroupZ, index)
    }
    pub const fn w(index: usize) -> Self {
        NodeId::new(Level::GroupW, index)
    }
    pub const fn x(index: usize) -> Self {
        NodeId::new(Level::Unit, index)
    }
    pub const fn u(index: usize) -> Self {
        NodeId::new(Level::LatentU, index)
    }

    pub fn idx(self) -> usize {
        self.index as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.level.prefix(), self.index + 1)
    }
}

impl FromStr for NodeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut chars = s.chars();
        let level = match chars.next() {
            Some('Z') => Level::GroupZ,
            Some('W') => Level::GroupW,
            Some('U') => Level::LatentU,
            Some('X') => Level::Unit,
            _ => return Err(Error::usage(format!("bad node name {s:?}"))),
        };
        let rest = chars.as_str();
        let n: u32 = rest
            .parse()
            .ok()
            .filter(|&n| n >= 1 && !rest.starts_with('0') && !rest.starts_with('+'))
            .ok_or_else(|| Error::usage(format!("bad node name {s:?}")))?;
        Ok(NodeId { level, index: n - 1 })
    }
}

impl Serialize for NodeId {
    fn serialize<S: Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for NodeId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        let s = alloc::string::String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Number of nodes per level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct NodeCounts {
    pub z: usize,
    pub w: usize,
    pub x: usize,
    #[serde(default)]
    pub u: usize,
}

impl NodeCounts {
    pub fn get(&self, level: Level) -> usize {
        match level {
            Level::GroupZ => self.z,
            Level::GroupW => self.w,
            Level::LatentU => self.u,
            Level::Unit => self.x,
        }
    }

    pub fn total(&self) -> usize {
        self.z + self.w + self.u + self.x
    }

    /// All nodes in canonical (level, index) order.
    pub fn nodes(&self) -> Vec<NodeId> {
        [Level::GroupZ, Level::GroupW, Level::LatentU, Level::Unit]
            .into_iter()
            .flat_map(|l| (0..self.get(l)).map(move |i| NodeId::new(l, i)))
            .collect()
    }

    pub fn contains(&self, node: NodeId) -> bool {
        node.idx() < self.get(node.level)
    }
}

/// Directed acyclic graph over a leveled node set.
///
/// Every constructor and mutator maintains the invariants: no cycles, no
/// self-loops or duplicate edges, no unit-to-group edges and no edges into
/// latent nodes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "DagRepr", into = "DagRepr")]
pub struct Dag {
    counts: NodeCounts,
    edges: BTreeSet<(NodeId, NodeId)>,
}

/// Serialized form: `{"levels": {"z":..,"w":..,"x":..,"u":..}, "edges": [["Z1","X2"], ..]}`.
#[derive(Serialize, Deserialize)]
struct DagRepr {
    levels: NodeCounts,
    edges: Vec<(NodeId, NodeId)>,
}

impl TryFrom<DagRepr> for Dag {
    type Error = Error;
    fn try_from(r: DagRepr) -> Result<Dag> {
        Dag::from_edges(r.levels, r.edges)
    }
}

impl From<Dag> for DagRepr {
    fn from(d: Dag) -> DagRepr {
        DagRepr {
            levels: d.counts,
            edges: d.edges.into_iter().collect(),
        }
    }
}

impl Dag {
    pub fn empty(counts: NodeCounts) -> Self {
        Dag {
            counts,
            edges: BTreeSet::new(),
        }
    }

    pub fn from_edges(counts: NodeCounts, edges: impl IntoIterator<Item = (NodeId, NodeId)>) -> Result<Self> {
        let mut dag = Dag::empty(counts);
        for (a, b) in edges {
            dag.add_edge(a, b)?;
        }
        Ok(dag)
    }

    pub fn counts(&self) -> NodeCounts {
        self.counts
    }

    pub fn nodes(&self) -> Vec<NodeId> {
        self.counts.nodes()
    }

    pub fn node_count(&self) -> usize {
        self.counts.total()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.edges.iter().copied()
    }

    pub fn has_edge(&self, from: NodeId, to: NodeId) -> bool {
        self.edges.contains(&(from, to))
    }

    pub fn parents(&self, node: NodeId) -> Vec<NodeId> {
        self.edges.iter().filter(|e| e.1 == node).map(|e| e.0).collect()
    }

    pub fn children(&self, node: NodeId) -> Vec<NodeId> {
        self.edges
            .range((node, NodeId::new(Level::GroupZ, 0))..)
            .take_while(|e| e.0 == node)
            .map(|e| e.1)
            .collect()
    }

    fn check_edge(&self, from: NodeId, to: NodeId) -> Result<()> {
        let bad = |reason| Err(Error::InvalidEdge { from, to, reason });
        if !self.counts.contains(from) || !self.counts.contains(to) {
            return bad("node outside the declared node set");
        }
        if from == to {
            return bad("self-loop");
        }
        if to.level == Level::LatentU {
            return bad("latent nodes have no parents");
        }
        if from.level == Level::Unit && to.level.is_group() {
            return bad("units cannot cause group-level variables");
        }
        if self.edges.contains(&(from, to)) {
            return bad("duplicate edge");
        }
        Ok(())
    }

    /// Would adding `from -> to` keep the graph acyclic and well typed?
    pub fn can_add_edge(&self, from: NodeId, to: NodeId) -> bool {
        self.check_edge(from, to).is_ok() && !self.reaches(to, from)
    }

    pub fn add_edge(&mut self, from: NodeId, to: NodeId) -> Result<()> {
        self.check_edge(from, to)?;
        if self.reaches(to, from) {
            return Err(Error::Cycle { from, to });
        }
        self.edges.insert((from, to));
        Ok(())
    }

    pub fn remove_edge(&mut self, from: NodeId, to: NodeId) -> bool {
        self.edges.remove(&(from, to))
    }

    /// Is there a directed path from `a` to `b` (including `a == b`)?
    pub fn reaches(&self, a: NodeId, b: NodeId) -> bool {
        if a == b {
            return true;
        }
        let mut seen = BTreeSet::new();
        let mut stack = alloc::vec![a];
        while let Some(v) = stack.pop() {
            for c in self.children(v) {
                if c == b {
                    return true;
                }
                if seen.insert(c) {
                    stack.push(c);
                }
            }
        }
        false
    }

    /// All nodes reachable from `node`, excluding `node` itself.
    pub fn descendants(&self, node: NodeId) -> BTreeSet<NodeId> {
        let mut seen = BTreeSet::new();
        let mut stack = alloc::vec![node];
        while let Some(v) = stack.pop() {
            for c in self.children(v) {
                if seen.insert(c) {
                    stack.push(c);
                }
            }
        }
        seen
    }

    pub fn topological_order(&self) -> Vec<NodeId> {
        let edges: Vec<_> = self.edges().collect();
        topological_sort(&self.nodes(), &edges).expect("Dag invariant: acyclic")
    }

    /// The same graph without latent nodes and their edges.
    pub fn without_latent(&self) -> Dag {
        Dag {
            counts: NodeCounts { u: 0, ..self.counts },
            edges: self
                .edges
                .iter()
                .copied()
                .filter(|(a, b)| a.level != Level::LatentU && b.level != Level::LatentU)
                .collect(),
        }
    }

    /// Edges with both endpoints at `level`.
    pub fn edges_within(&self, level: Level) -> Vec<(NodeId, NodeId)> {
        self.edges()
            .filter(|(a, b)| a.level == level && b.level == level)
            .collect()
    }

    /// Map nodes of one level to another (e.g. a CAM result over "unit"
    /// indices into group-level nodes).
    pub fn relabel(&self, counts: NodeCounts, map: impl Fn(NodeId) -> NodeId) -> Result<Dag> {
        Dag::from_edges(counts, self.edges().map(|(a, b)| (map(a), map(b))))
    }
}

/// Kahn's algorithm with a (level, index) tie-break among ready nodes.
pub fn topological_sort(nodes: &[NodeId], edges: &[(NodeId, NodeId)]) -> Result<Vec<NodeId>> {
    let mut indeg: BTreeMap<NodeId, usize> = nodes.iter().map(|&n| (n, 0)).collect();
    let mut out_edges: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
    for &(a, b) in edges {
        *indeg
            .get_mut(&b)
            .ok_or_else(|| Error::usage(format!("edge target {b} not in node set")))? += 1;
        if !indeg.contains_key(&a) {
            return Err(Error::usage(format!("edge source {a} not in node set")));
        }
        out_edges.entry(a).or_default().push(b);
    }
    let mut ready: BTreeSet<NodeId> = indeg.iter().filter(|(_, &d)| d == 0).map(|(&n, _)| n).collect();
    let mut order = Vec::with_capacity(nodes.len());
    while let Some(n) = ready.pop_first() {
        order.push(n);
        for &c in out_edges.get(&n).map(Vec::as_slice).unwrap_or(&[]) {
            let d = indeg.get_mut(&c).unwrap();
            *d -= 1;
            if *d == 0 {
                ready.insert(c);
            }
        }
    }
    if order.len() < indeg.len() {
        let placed: BTreeSet<NodeId> = order.iter().copied().collect();
        let &(from, to) = edges
            .iter()
            .find(|(a, b)| !placed.contains(a) && !placed.contains(b))
            .expect("unplaced nodes lie on a cycle");
        return Err(Error::Cycle { from, to });
    }
    Ok(order)
}

/// Structural Hamming distance: the number of edge insertions, deletions and
/// reversals turning `estimated` into `truth`. A reversal counts once.
/// Latent nodes and their edges are ignored.
pub fn shd(estimated: &Dag, truth: &Dag) -> Result<usize> {
    let (ca, cb) = (estimated.counts, truth.counts);
    if (ca.z, ca.w, ca.x) != (cb.z, cb.w, cb.x) {
        return Err(Error::usage(format!("SHD needs identical node sets: {ca:?} vs {cb:?}")));
    }
    let key = |(a, b): (NodeId, NodeId)| if a < b { (a, b) } else { (b, a) };
    let observed = |&(a, b): &(NodeId, NodeId)| a.level != Level::LatentU && b.level != Level::LatentU;
    let mut pairs: BTreeMap<(NodeId, NodeId), (Option<bool>, Option<bool>)> = BTreeMap::new();
    for e in estimated.edges.iter().filter(|e| observed(e)) {
        pairs.entry(key(*e)).or_default().0 = Some(e.0 < e.1);
    }
    for e in truth.edges.iter().filter(|e| observed(e)) {
        pairs.entry(key(*e)).or_default().1 = Some(e.0 < e.1);
    }
    Ok(pairs.values().filter(|(a, b)| a != b).count())
}

impl fmt::Display for Dag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.edges().map(|(a, b)| format!("{a}->{b}")).collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}
