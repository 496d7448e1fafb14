//! Population initialisation and mutation operators. Every operator takes an
//! immutable graph and returns a new, canonicalised one.

mod edges;

use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use edges::{guided_edge_mutation, guided_edge_sets, random_edge_mutation, random_edge_toggle, repair, EdgeProposal};

use crate::error::{Error, Result};
use crate::graph::{validate_graph, ArchitectureGraph, ChannelBudget, NodeId, NodeKind, MAX_LEVEL};
use crate::net::default_stride;
use crate::schedule::LayerSchedule;

/// Gate threshold `B` of the guided edge mutation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Threshold {
    Constant(f64),
    /// A fresh `U(0,1)` draw per edge.
    Uniform,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MutationConfig {
    pub threshold: Threshold,
    /// Node operators per child are drawn from `0..=max_ops_per_child`.
    pub max_ops_per_child: usize,
    pub resolutions: Vec<u32>,
    /// Edge probability of a freshly initialised architecture.
    pub init_edge_prob: f64,
    /// Inclusive range of split operators applied at initialisation.
    pub init_splits: (usize, usize),
    /// Stem counts an initial architecture may have.
    pub stem_counts: Vec<usize>,
    /// Fraction of edge slots toggled by the unguided edge mutation.
    pub random_edge_fraction: f64,
    /// Start inherited edges at logit 0 instead of the parent's trained value.
    pub reset_inherited_logits: bool,
    /// Attempts per member before initialisation gives up.
    pub max_init_attempts: usize,
}

impl Default for MutationConfig {
    fn default() -> Self {
        MutationConfig {
            threshold: Threshold::Uniform,
            max_ops_per_child: 4,
            resolutions: vec![1, 2, 4, 8],
            init_edge_prob: 0.5,
            init_splits: (1, 5),
            stem_counts: vec![2, 4],
            random_edge_fraction: 1.0 / 3.0,
            reset_inherited_logits: false,
            max_init_attempts: 1000,
        }
    }
}

impl MutationConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(format!("mutation: {msg}")));
        if let Threshold::Constant(b) = self.threshold {
            if !(b > 0.0 && b < 1.0) {
                return bad("constant threshold must lie in (0, 1)");
            }
        }
        if !(self.init_edge_prob > 0.0 && self.init_edge_prob <= 1.0) {
            return bad("init_edge_prob must lie in (0, 1]");
        }
        if self.resolutions.is_empty() || self.resolutions.iter().any(|r| !crate::graph::RESOLUTIONS.contains(r)) {
            return bad("resolutions must be a non-empty subset of {1, 2, 4, 8}");
        }
        if self.init_splits.0 > self.init_splits.1 {
            return bad("init_splits range is empty");
        }
        if self.stem_counts.is_empty() || self.stem_counts.iter().any(|&n| n < 2 || n % 2 != 0) {
            return bad("stem counts must be even and at least 2");
        }
        if !(self.random_edge_fraction > 0.0 && self.random_edge_fraction <= 1.0) {
            return bad("random_edge_fraction must lie in (0, 1]");
        }
        Ok(())
    }
}

/// Splits node `id` into two nodes with half its channels each and identical
/// inputs and outputs. Odd channel counts are rejected.
pub fn split_node(g: &ArchitectureGraph, id: NodeId) -> Result<ArchitectureGraph> {
    let node = g.node(id).ok_or_else(|| Error::MutationRejected(format!("no node {id}")))?.clone();
    if node.is_stem() {
        return Err(Error::MutationRejected("stems are not split".into()));
    }
    if node.channels % 2 != 0 {
        return Err(Error::MutationRejected(format!("node {id} has odd C = {}", node.channels)));
    }
    let mut out = g.clone();
    let inputs: Vec<(NodeId, f64)> = g.inputs_of(id).into_iter().map(|s| (s, g.logit(s, id).unwrap())).collect();
    let outputs: Vec<(NodeId, f64)> = g.outputs_of(id).into_iter().map(|d| (d, g.logit(id, d).unwrap())).collect();
    out.node_mut(id).unwrap().channels = node.channels / 2;
    let twin = out.add_node(node.level, node.kind, node.channels / 2, node.resolution, node.stride);
    for (s, w) in inputs {
        out.add_edge(s, twin, w);
    }
    for (d, w) in outputs {
        out.add_edge(twin, d, w);
    }
    Ok(out.canonicalized())
}

/// Merges two same-level intermediate nodes. Channels add up, edges are the
/// union (a pair present on both sides keeps the larger logit) and the
/// resolution is drawn from the two parents.
pub fn merge_nodes<R: Rng + ?Sized>(g: &ArchitectureGraph, a: NodeId, b: NodeId, rng: &mut R) -> Result<ArchitectureGraph> {
    let (na, nb) = match (g.node(a), g.node(b)) {
        (Some(x), Some(y)) => (x.clone(), y.clone()),
        _ => return Err(Error::MutationRejected(format!("no node {a} or {b}"))),
    };
    if a == b || na.is_stem() || nb.is_stem() {
        return Err(Error::MutationRejected("merge needs two distinct intermediate nodes".into()));
    }
    if na.level != nb.level {
        return Err(Error::MutationRejected(format!("nodes {a} and {b} are on different levels")));
    }
    let pick = if rng.random_bool(0.5) { &na } else { &nb };
    let mut edges: BTreeMap<(bool, NodeId), f64> = BTreeMap::new();
    for id in [a, b] {
        for s in g.inputs_of(id) {
            let w = g.logit(s, id).unwrap();
            edges.entry((true, s)).and_modify(|v| *v = v.max(w)).or_insert(w);
        }
        for d in g.outputs_of(id) {
            let w = g.logit(id, d).unwrap();
            edges.entry((false, d)).and_modify(|v| *v = v.max(w)).or_insert(w);
        }
    }
    let mut out = g.clone();
    out.remove_node(a);
    out.remove_node(b);
    let m = out.add_node(na.level, NodeKind::Intermediate, na.channels + nb.channels, pick.resolution, pick.stride);
    for ((incoming, other), w) in edges {
        if incoming {
            out.add_edge(other, m, w);
        } else {
            out.add_edge(m, other, w);
        }
    }
    Ok(out.canonicalized())
}

/// Redraws the temporal resolution of `id` from `allowed` minus its current value.
pub fn change_temporal_resolution<R: Rng + ?Sized>(
    g: &ArchitectureGraph,
    id: NodeId,
    allowed: &[u32],
    rng: &mut R,
) -> Result<ArchitectureGraph> {
    let node = g.node(id).ok_or_else(|| Error::MutationRejected(format!("no node {id}")))?;
    if node.kind == NodeKind::MotionStem {
        return Err(Error::MutationRejected("motion stems have no temporal conv".into()));
    }
    let choices: Vec<u32> = allowed.iter().copied().filter(|&r| r != node.resolution).collect();
    let &r = choices.choose(rng).ok_or_else(|| Error::MutationRejected("no other resolution allowed".into()))?;
    let mut out = g.clone();
    out.node_mut(id).unwrap().resolution = r;
    Ok(out)
}

/// Node operators applied after the edge mutation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeOp {
    Split,
    Merge,
    Resolution,
}

pub const NODE_OPS: [NodeOp; 3] = [NodeOp::Split, NodeOp::Merge, NodeOp::Resolution];

/// Applies `op` to a uniformly chosen eligible target.
pub fn apply_node_op<R: Rng + ?Sized>(
    g: &ArchitectureGraph,
    op: NodeOp,
    cfg: &MutationConfig,
    rng: &mut R,
) -> Result<ArchitectureGraph> {
    match op {
        NodeOp::Split => {
            let even: Vec<NodeId> =
                g.intermediates().into_iter().filter(|&id| g.node(id).unwrap().channels % 2 == 0).collect();
            let &id = even.choose(rng).ok_or_else(|| Error::MutationRejected("no node with even C".into()))?;
            split_node(g, id)
        }
        NodeOp::Merge => {
            let mut pairs = Vec::new();
            for level in 1..=MAX_LEVEL {
                let ids = g.nodes_at_level(level);
                for i in 0..ids.len() {
                    for j in i + 1..ids.len() {
                        pairs.push((ids[i], ids[j]));
                    }
                }
            }
            let &(a, b) = pairs.choose(rng).ok_or_else(|| Error::MutationRejected("no level has two nodes".into()))?;
            merge_nodes(g, a, b, rng)
        }
        NodeOp::Resolution => {
            let targets: Vec<NodeId> =
                g.nodes().filter(|n| n.kind != NodeKind::MotionStem).map(|n| n.id).collect();
            let &id = targets.choose(rng).ok_or_else(|| Error::MutationRejected("no temporal node".into()))?;
            change_temporal_resolution(g, id, &cfg.resolutions, rng)
        }
    }
}

fn try_random_member<R: Rng + ?Sized>(
    budget: ChannelBudget,
    schedule: &LayerSchedule,
    cfg: &MutationConfig,
    rng: &mut R,
) -> Option<ArchitectureGraph> {
    let mut g = ArchitectureGraph::new(budget);
    let stems = *cfg.stem_counts.choose(rng).unwrap();
    let width = schedule.stem_width(stems) as u32;
    for i in 0..stems {
        let kind = if i < stems / 2 { NodeKind::AppearanceStem } else { NodeKind::MotionStem };
        g.add_stem(kind, width, 1);
    }
    for level in 1..=MAX_LEVEL {
        let total = budget.level(level);
        let parts = if level == MAX_LEVEL || total < 2 { 1 } else { 2 };
        for k in 0..parts {
            let c = if k == 0 { total - total / 2 * (parts - 1) } else { total / 2 };
            g.add_block(level, c, 1, default_stride(level));
        }
    }
    let splits = rng.random_range(cfg.init_splits.0..=cfg.init_splits.1);
    for _ in 0..splits {
        match apply_node_op(&g, NodeOp::Split, cfg, rng) {
            Ok(next) => g = next,
            Err(_) => break,
        }
    }
    for id in g.node_ids() {
        let r = *cfg.resolutions.choose(rng).unwrap();
        g.node_mut(id).unwrap().resolution = r;
    }
    for (s, d) in g.possible_edges() {
        if rng.random::<f64>() < cfg.init_edge_prob {
            g.add_edge(s, d, 0.0);
        }
    }
    validate_graph(&g).is_ok().then_some(g)
}

/// Draws one random architecture by rejection sampling.
pub fn random_member<R: Rng + ?Sized>(
    budget: ChannelBudget,
    schedule: &LayerSchedule,
    cfg: &MutationConfig,
    seed: u64,
    rng: &mut R,
) -> Result<ArchitectureGraph> {
    for _ in 0..cfg.max_init_attempts {
        if let Some(g) = try_random_member(budget, schedule, cfg, rng) {
            return Ok(g);
        }
    }
    Err(Error::RetryBudgetExhausted { attempts: cfg.max_init_attempts, seed })
}

/// `size` independent random architectures drawn from `seed`.
pub fn init_population(
    size: usize,
    budget: ChannelBudget,
    schedule: &LayerSchedule,
    cfg: &MutationConfig,
    seed: u64,
) -> Result<Vec<ArchitectureGraph>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..size).map(|_| random_member(budget, schedule, cfg, seed, &mut rng)).collect()
}
