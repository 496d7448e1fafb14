//! Architecture DAG: blocks arranged in levels, joined by gated edges that only
//! point from a lower level to a higher one.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

mod dot;
pub mod params;
mod table;

pub use dot::export_dot;
pub use params::{parameter_count, ParameterBreakdown};
pub use table::{decode_table, encode_table, TABLE5};

pub const MAX_LEVEL: u8 = 4;
pub const RESOLUTIONS: [u32; 4] = [1, 2, 4, 8];
pub const STRIDES: [u32; 3] = [1, 2, 4];
/// Spatial stride of every stem (stride-2 conv followed by stride-2 pooling).
pub const STEM_STRIDE: u32 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NodeKind {
    AppearanceStem,
    MotionStem,
    Intermediate,
}

impl NodeKind {
    pub fn is_stem(self) -> bool {
        !matches!(self, NodeKind::Intermediate)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlockNode {
    pub id: NodeId,
    pub level: u8,
    pub kind: NodeKind,
    /// Filter-count parameter C.
    pub channels: u32,
    /// Temporal dilation r.
    pub resolution: u32,
    pub stride: u32,
}

impl BlockNode {
    pub fn is_stem(&self) -> bool {
        self.kind.is_stem()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub src: NodeId,
    pub dst: NodeId,
    /// Pre-sigmoid gate weight.
    pub logit: f64,
}

impl Edge {
    pub fn gate(&self) -> f64 {
        sigmoid(self.logit)
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Sum of C that the blocks of each level (1..=4) must add up to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelBudget(pub [u32; 4]);

impl ChannelBudget {
    pub const DESK: ChannelBudget = ChannelBudget([16, 32, 64, 128]);
    /// Level sums of the 50-layer reference model.
    pub const FULL_SCALE: ChannelBudget = ChannelBudget([128, 256, 512, 512]);

    pub fn level(&self, level: u8) -> u32 {
        match level {
            1..=4 => self.0[level as usize - 1],
            _ => 0,
        }
    }
}

impl Default for ChannelBudget {
    fn default() -> Self {
        Self::DESK
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ArchitectureGraph {
    nodes: BTreeMap<NodeId, BlockNode>,
    edges: BTreeMap<(NodeId, NodeId), f64>,
    budget: ChannelBudget,
    next_id: u32,
}

impl ArchitectureGraph {
    pub fn new(budget: ChannelBudget) -> Self {
        ArchitectureGraph { nodes: BTreeMap::new(), edges: BTreeMap::new(), budget, next_id: 0 }
    }

    pub fn budget(&self) -> ChannelBudget {
        self.budget
    }

    pub fn set_budget(&mut self, budget: ChannelBudget) {
        self.budget = budget;
    }

    /// Adds a node with the next free id. No validation happens here.
    pub fn add_node(&mut self, level: u8, kind: NodeKind, channels: u32, resolution: u32, stride: u32) -> NodeId {
        let id = NodeId(self.next_id);
        self.next_id += 1;
        self.nodes.insert(id, BlockNode { id, level, kind, channels, resolution, stride });
        id
    }

    pub fn add_stem(&mut self, kind: NodeKind, channels: u32, resolution: u32) -> NodeId {
        self.add_node(0, kind, channels, resolution, STEM_STRIDE)
    }

    pub fn add_block(&mut self, level: u8, channels: u32, resolution: u32, stride: u32) -> NodeId {
        self.add_node(level, NodeKind::Intermediate, channels, resolution, stride)
    }

    /// Inserts or overwrites the edge `src -> dst`.
    pub fn add_edge(&mut self, src: NodeId, dst: NodeId, logit: f64) {
        self.edges.insert((src, dst), logit);
    }

    pub fn remove_edge(&mut self, src: NodeId, dst: NodeId) -> Option<f64> {
        self.edges.remove(&(src, dst))
    }

    pub fn has_edge(&self, src: NodeId, dst: NodeId) -> bool {
        self.edges.contains_key(&(src, dst))
    }

    pub fn logit(&self, src: NodeId, dst: NodeId) -> Option<f64> {
        self.edges.get(&(src, dst)).copied()
    }

    pub fn set_logit(&mut self, src: NodeId, dst: NodeId, logit: f64) -> bool {
        match self.edges.get_mut(&(src, dst)) {
            Some(w) => {
                *w = logit;
                true
            }
            None => false,
        }
    }

    /// Removes a node together with every edge touching it.
    pub fn remove_node(&mut self, id: NodeId) -> Option<BlockNode> {
        let node = self.nodes.remove(&id)?;
        self.edges.retain(|&(s, d), _| s != id && d != id);
        Some(node)
    }

    pub fn node(&self, id: NodeId) -> Option<&BlockNode> {
        self.nodes.get(&id)
    }

    pub fn node_mut(&mut self, id: NodeId) -> Option<&mut BlockNode> {
        self.nodes.get_mut(&id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &BlockNode> + '_ {
        self.nodes.values()
    }

    pub fn node_ids(&self) -> Vec<NodeId> {
        self.nodes.keys().copied().collect()
    }

    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.edges.iter().map(|(&(src, dst), &logit)| Edge { src, dst, logit })
    }

    pub fn edge_keys(&self) -> Vec<(NodeId, NodeId)> {
        self.edges.keys().copied().collect()
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn level_of(&self, id: NodeId) -> Option<u8> {
        self.nodes.get(&id).map(|n| n.level)
    }

    pub fn nodes_at_level(&self, level: u8) -> Vec<NodeId> {
        self.nodes.values().filter(|n| n.level == level).map(|n| n.id).collect()
    }

    pub fn stems(&self) -> Vec<NodeId> {
        self.nodes.values().filter(|n| n.is_stem()).map(|n| n.id).collect()
    }

    pub fn intermediates(&self) -> Vec<NodeId> {
        self.nodes.values().filter(|n| !n.is_stem()).map(|n| n.id).collect()
    }

    pub fn inputs_of(&self, id: NodeId) -> Vec<NodeId> {
        self.edges.keys().filter(|&&(_, d)| d == id).map(|&(s, _)| s).collect()
    }

    pub fn outputs_of(&self, id: NodeId) -> Vec<NodeId> {
        self.edges.keys().filter(|&&(s, _)| s == id).map(|&(_, d)| d).collect()
    }

    pub fn channel_sum(&self, level: u8) -> u32 {
        self.nodes.values().filter(|n| n.level == level).map(|n| n.channels).sum()
    }

    /// Every admissible edge over the current node set (E_*): all pairs with
    /// `level(src) < level(dst)`, skip-level pairs included.
    pub fn possible_edges(&self) -> Vec<(NodeId, NodeId)> {
        let mut out = Vec::new();
        for src in self.nodes.values() {
            for dst in self.nodes.values() {
                if src.level < dst.level {
                    out.push((src.id, dst.id));
                }
            }
        }
        out
    }

    /// Node ids sorted by (level, id); a valid topological order.
    pub fn topological_order(&self) -> Vec<NodeId> {
        let mut ids: Vec<&BlockNode> = self.nodes.values().collect();
        ids.sort_by_key(|n| (n.level, n.id));
        ids.into_iter().map(|n| n.id).collect()
    }

    /// Relabels nodes to `0..n` in (level, id) order. Mutation operators return
    /// canonical graphs, and `decode_table(encode_table(g)) == g.canonicalized()`.
    pub fn canonicalized(&self) -> ArchitectureGraph {
        let order = self.topological_order();
        let remap: BTreeMap<NodeId, NodeId> =
            order.iter().enumerate().map(|(i, &old)| (old, NodeId(i as u32))).collect();
        let mut out = ArchitectureGraph::new(self.budget);
        for old in &order {
            let n = &self.nodes[old];
            out.add_node(n.level, n.kind, n.channels, n.resolution, n.stride);
        }
        for (&(s, d), &w) in &self.edges {
            if let (Some(&s2), Some(&d2)) = (remap.get(&s), remap.get(&d)) {
                out.add_edge(s2, d2, w);
            }
        }
        out
    }

    pub fn is_canonical(&self) -> bool {
        self.topological_order().iter().enumerate().all(|(i, id)| id.0 == i as u32)
    }

    pub fn validate(&self) -> ValidationReport {
        validate_graph(self)
    }
}

impl Serialize for ArchitectureGraph {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut s = String::new();
        let b = self.budget.0;
        s.push_str(&format!("# budget {} {} {} {}\n", b[0], b[1], b[2], b[3]));
        s.push_str(&encode_table(self));
        serializer.serialize_str(&s)
    }
}

impl<'de> Deserialize<'de> for ArchitectureGraph {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        let mut g = decode_table(&text).map_err(serde::de::Error::custom)?;
        if let Some(line) = text.lines().next().and_then(|l| l.strip_prefix("# budget ")) {
            let vals: Vec<u32> = line
                .split_whitespace()
                .map(|v| v.parse().map_err(serde::de::Error::custom))
                .collect::<Result<_, _>>()?;
            if vals.len() == 4 {
                g.set_budget(ChannelBudget([vals[0], vals[1], vals[2], vals[3]]));
            }
        }
        Ok(g)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    LevelOutOfRange { node: NodeId, level: u8 },
    StemLevelMismatch { node: NodeId },
    InvalidResolution { node: NodeId, resolution: u32 },
    InvalidStride { node: NodeId, stride: u32 },
    ZeroChannels { node: NodeId },
    DanglingEdge { src: NodeId, dst: NodeId },
    EdgeReversesLevelOrdering { src: NodeId, dst: NodeId },
    ChannelBudget { level: u8, expected: u32, actual: u32 },
    NoInput { node: NodeId },
    NoOutput { node: NodeId },
    NoStem,
    NoLevelFour,
    InsufficientDepth { depth: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Violation::*;
        match self {
            LevelOutOfRange { node, level } => write!(f, "node {node}: level {level} out of range 0..=4"),
            StemLevelMismatch { node } => write!(f, "node {node}: stems must sit at level 0 and only stems may"),
            InvalidResolution { node, resolution } => {
                write!(f, "node {node}: temporal resolution {resolution} not in {{1,2,4,8}}")
            }
            InvalidStride { node, stride } => write!(f, "node {node}: spatial stride {stride} not allowed"),
            ZeroChannels { node } => write!(f, "node {node}: channel count must be positive"),
            DanglingEdge { src, dst } => write!(f, "edge {src}->{dst}: endpoint does not exist"),
            EdgeReversesLevelOrdering { src, dst } => write!(f, "edge {src}->{dst}: edge reverses level ordering"),
            ChannelBudget { level, expected, actual } => {
                write!(f, "level {level}: channel budget {expected} but nodes sum to {actual}")
            }
            NoInput { node } => write!(f, "node {node}: intermediate node has no incoming edge"),
            NoOutput { node } => write!(f, "node {node}: intermediate node has no outgoing edge"),
            NoStem => write!(f, "graph has no stem"),
            NoLevelFour => write!(f, "graph has no level-4 node"),
            InsufficientDepth { depth } => write!(f, "graph depth {depth} < 4"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> crate::Result<()> {
        if self.is_ok() {
            Ok(())
        } else {
            Err(crate::Error::InvalidGraph(self.to_string()))
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return write!(f, "ok");
        }
        let msgs: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", msgs.join("; "))
    }
}

/// Checks every structural invariant and reports all violations found.
pub fn validate_graph(g: &ArchitectureGraph) -> ValidationReport {
    let mut v = Vec::new();
    let mut structural_ok = true;
    for n in g.nodes() {
        if n.level > MAX_LEVEL {
            v.push(Violation::LevelOutOfRange { node: n.id, level: n.level });
            structural_ok = false;
        }
        if n.is_stem() != (n.level == 0) {
            v.push(Violation::StemLevelMismatch { node: n.id });
        }
        if !RESOLUTIONS.contains(&n.resolution) {
            v.push(Violation::InvalidResolution { node: n.id, resolution: n.resolution });
        }
        let stride_ok = if n.is_stem() { n.stride == STEM_STRIDE } else { STRIDES.contains(&n.stride) };
        if !stride_ok {
            v.push(Violation::InvalidStride { node: n.id, stride: n.stride });
        }
        if n.channels == 0 {
            v.push(Violation::ZeroChannels { node: n.id });
        }
    }
    for e in g.edges() {
        match (g.level_of(e.src), g.level_of(e.dst)) {
            (Some(ls), Some(ld)) => {
                if ls >= ld {
                    v.push(Violation::EdgeReversesLevelOrdering { src: e.src, dst: e.dst });
                    structural_ok = false;
                }
            }
            _ => {
                v.push(Violation::DanglingEdge { src: e.src, dst: e.dst });
                structural_ok = false;
            }
        }
    }
    for level in 1..=MAX_LEVEL {
        let expected = g.budget.level(level);
        let actual = g.channel_sum(level);
        if expected != actual {
            v.push(Violation::ChannelBudget { level, expected, actual });
        }
    }
    for n in g.nodes().filter(|n| !n.is_stem()) {
        if g.inputs_of(n.id).is_empty() {
            v.push(Violation::NoInput { node: n.id });
        }
        if n.level < MAX_LEVEL && g.outputs_of(n.id).is_empty() {
            v.push(Violation::NoOutput { node: n.id });
        }
    }
    if g.stems().is_empty() {
        v.push(Violation::NoStem);
    }
    if g.nodes_at_level(MAX_LEVEL).is_empty() {
        v.push(Violation::NoLevelFour);
    }
    if structural_ok {
        let depth = longest_path_depth(g);
        if depth < 4 {
            v.push(Violation::InsufficientDepth { depth });
        }
    }
    ValidationReport { violations: v }
}

/// Edge count of the longest path from any stem to any level-4 node; 0 when no
/// level-4 node is reachable from a stem.
pub fn longest_path_depth(g: &ArchitectureGraph) -> usize {
    let mut dist: BTreeMap<NodeId, usize> = BTreeMap::new();
    for id in g.topological_order() {
        let node = g.node(id).expect("id from topological order");
        if node.is_stem() {
            dist.insert(id, 0);
            continue;
        }
        let best = g
            .inputs_of(id)
            .into_iter()
            .filter(|s| g.level_of(*s).is_some_and(|l| l < node.level))
            .filter_map(|s| dist.get(&s).map(|d| d + 1))
            .max();
        if let Some(d) = best {
            dist.insert(id, d);
        }
    }
    g.nodes_at_level(MAX_LEVEL).iter().filter_map(|id| dist.get(id)).copied().max().unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(levels: &[u8]) -> ArchitectureGraph {
        let mut g = ArchitectureGraph::new(ChannelBudget([8, 8, 8, 8]));
        let mut prev = g.add_stem(NodeKind::AppearanceStem, 8, 1);
        for &l in levels {
            let n = g.add_block(l, 8, 1, 1);
            g.add_edge(prev, n, 0.0);
            prev = n;
        }
        g
    }

    #[test]
    fn chain_depth_is_four() {
        let g = chain(&[1, 2, 3, 4]);
        assert_eq!(longest_path_depth(&g), 4);
        assert!(validate_graph(&g).is_ok(), "{}", validate_graph(&g));
    }

    #[test]
    fn skip_connections_shorten_path() {
        let mut g = ArchitectureGraph::new(ChannelBudget([0, 8, 0, 8]));
        let s = g.add_stem(NodeKind::AppearanceStem, 8, 1);
        let a = g.add_block(2, 8, 1, 1);
        let b = g.add_block(4, 8, 1, 1);
        g.add_edge(s, a, 0.0);
        g.add_edge(a, b, 0.0);
        assert_eq!(longest_path_depth(&g), 2);
        let report = validate_graph(&g);
        assert!(report.violations.contains(&Violation::InsufficientDepth { depth: 2 }));
    }

    #[test]
    fn unreachable_level_four_reports_zero() {
        let mut g = chain(&[1, 2, 3]);
        g.add_block(4, 8, 1, 1);
        assert_eq!(longest_path_depth(&g), 0);
    }

    #[test]
    fn reversed_edge_is_reported() {
        let mut g = chain(&[1, 2, 3, 4]);
        let l3 = g.nodes_at_level(3)[0];
        let l1 = g.nodes_at_level(1)[0];
        g.add_edge(l3, l1, 0.0);
        let report = validate_graph(&g);
        assert!(report.violations.contains(&Violation::EdgeReversesLevelOrdering { src: l3, dst: l1 }));
        assert!(report.to_string().contains("edge reverses level ordering"));
    }

    #[test]
    fn channel_budget_mismatch_is_reported() {
        let mut g = chain(&[1, 2, 3, 4]);
        g.set_budget(ChannelBudget([8, 64, 8, 8]));
        let l1 = g.nodes_at_level(1)[0];
        let l3 = g.nodes_at_level(3)[0];
        g.node_mut(g.nodes_at_level(2)[0]).unwrap().channels = 40;
        let extra = g.add_block(2, 40, 1, 1);
        g.add_edge(l1, extra, 0.0);
        g.add_edge(extra, l3, 0.0);
        let report = validate_graph(&g);
        assert_eq!(report.violations, vec![Violation::ChannelBudget { level: 2, expected: 64, actual: 80 }]);
        assert!(report.to_string().contains("channel budget"));
    }

    #[test]
    fn disconnected_intermediate_is_reported() {
        let mut g = chain(&[1, 2, 3, 4]);
        g.set_budget(ChannelBudget([8, 16, 8, 8]));
        let lone = g.add_block(2, 8, 1, 1);
        let report = validate_graph(&g);
        assert!(report.violations.contains(&Violation::NoInput { node: lone }));
        assert!(report.violations.contains(&Violation::NoOutput { node: lone }));
    }

    #[test]
    fn canonical_relabel_orders_by_level() {
        let mut g = ArchitectureGraph::new(ChannelBudget([8, 8, 8, 8]));
        let l4 = g.add_block(4, 8, 1, 1);
        let l1 = g.add_block(1, 8, 2, 1);
        let s = g.add_stem(NodeKind::MotionStem, 8, 1);
        let l2 = g.add_block(2, 8, 1, 1);
        let l3 = g.add_block(3, 8, 1, 1);
        for (a, b) in [(s, l1), (l1, l2), (l2, l3), (l3, l4)] {
            g.add_edge(a, b, 0.25);
        }
        assert!(!g.is_canonical());
        let c = g.canonicalized();
        assert!(c.is_canonical());
        assert_eq!(c.node(NodeId(0)).unwrap().kind, NodeKind::MotionStem);
        assert_eq!(c.node(NodeId(1)).unwrap().resolution, 2);
        assert_eq!(c.num_edges(), 4);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn possible_edges_cover_skip_levels() {
        let g = chain(&[1, 2, 3, 4]);
        // 5 nodes on 5 distinct levels: every ordered pair is admissible
        assert_eq!(g.possible_edges().len(), 10);
    }

    #[test]
    fn sigmoid_is_stable_at_extremes() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(800.0) == 1.0);
        assert!(sigmoid(-800.0) >= 0.0);
        assert!((sigmoid(-20.0) - 2.0611536181902033e-9).abs() < 1e-22);
    }
}
