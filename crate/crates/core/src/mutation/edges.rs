use rand::seq::{index, IndexedRandom};
use rand::Rng;

use super::{MutationConfig, Threshold};
use crate::graph::{sigmoid, ArchitectureGraph, NodeId};

/// Child edge set before repair: parental edges that cleared the threshold
/// (with their logits) and newly drawn edges.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeProposal {
    pub kept: Vec<(NodeId, NodeId, f64)>,
    pub added: Vec<(NodeId, NodeId)>,
}

/// Keeps each parental edge whose gate exceeds the threshold and adds each
/// absent admissible edge with probability `dropped / absent`, so the expected
/// edge count is preserved.
pub fn guided_edge_sets<R: Rng + ?Sized>(parent: &ArchitectureGraph, cfg: &MutationConfig, rng: &mut R) -> EdgeProposal {
    let mut kept = Vec::new();
    for e in parent.edges() {
        let threshold = match cfg.threshold {
            Threshold::Constant(b) => b,
            Threshold::Uniform => rng.random::<f64>(),
        };
        if sigmoid(e.logit) > threshold {
            kept.push((e.src, e.dst, e.logit));
        }
    }
    let dropped = parent.num_edges() - kept.len();
    let absent: Vec<(NodeId, NodeId)> = parent.possible_edges().into_iter().filter(|&(s, d)| !parent.has_edge(s, d)).collect();
    let mut added = Vec::new();
    if !absent.is_empty() {
        let p = (dropped as f64 / absent.len() as f64).min(1.0);
        for &slot in &absent {
            if rng.random::<f64>() < p {
                added.push(slot);
            }
        }
    }
    debug_assert!(kept.iter().all(|&(s, d, _)| parent.has_edge(s, d)));
    debug_assert!(added.iter().all(|&(s, d)| !parent.has_edge(s, d)));
    EdgeProposal { kept, added }
}

/// Guided edge mutation followed by repair.
pub fn guided_edge_mutation<R: Rng + ?Sized>(parent: &ArchitectureGraph, cfg: &MutationConfig, rng: &mut R) -> ArchitectureGraph {
    let proposal = guided_edge_sets(parent, cfg, rng);
    let mut g = parent.clone();
    for (s, d) in parent.edge_keys() {
        g.remove_edge(s, d);
    }
    for (s, d, w) in proposal.kept {
        g.add_edge(s, d, if cfg.reset_inherited_logits { 0.0 } else { w });
    }
    for (s, d) in proposal.added {
        g.add_edge(s, d, 0.0);
    }
    repair(&mut g, rng);
    g
}

/// Toggles `round(fraction * |E*|)` uniformly chosen edge slots without
/// repairing. Returns the toggled slots.
pub fn random_edge_toggle<R: Rng + ?Sized>(
    g: &ArchitectureGraph,
    fraction: f64,
    rng: &mut R,
) -> (ArchitectureGraph, Vec<(NodeId, NodeId)>) {
    let slots = g.possible_edges();
    let n = ((fraction * slots.len() as f64).round() as usize).min(slots.len());
    let mut out = g.clone();
    let mut toggled = Vec::with_capacity(n);
    for i in index::sample(rng, slots.len(), n) {
        let (s, d) = slots[i];
        if out.remove_edge(s, d).is_none() {
            out.add_edge(s, d, 0.0);
        }
        toggled.push((s, d));
    }
    (out, toggled)
}

/// Unguided edge mutation followed by repair.
pub fn random_edge_mutation<R: Rng + ?Sized>(g: &ArchitectureGraph, fraction: f64, rng: &mut R) -> ArchitectureGraph {
    let (mut out, _) = random_edge_toggle(g, fraction, rng);
    repair(&mut out, rng);
    out
}

/// Longest stem path ending at each node (`None` if unreachable from a stem).
fn depth_to(g: &ArchitectureGraph) -> std::collections::BTreeMap<NodeId, Option<usize>> {
    let mut dist = std::collections::BTreeMap::new();
    for id in g.topological_order() {
        let d = if g.node(id).unwrap().is_stem() {
            Some(0)
        } else {
            g.inputs_of(id).iter().filter_map(|s| dist.get(s).copied().flatten()).map(|d: usize| d + 1).max()
        };
        dist.insert(id, d);
    }
    dist
}

/// Adds random logit-0 edges until every intermediate node has an input and an
/// output and some stem-to-level-4 path has four edges. Never removes edges.
pub fn repair<R: Rng + ?Sized>(g: &mut ArchitectureGraph, rng: &mut R) {
    for id in g.intermediates() {
        let level = g.level_of(id).unwrap();
        if g.inputs_of(id).is_empty() {
            let lower: Vec<NodeId> = g.nodes().filter(|n| n.level < level).map(|n| n.id).collect();
            if let Some(&s) = lower.choose(rng) {
                g.add_edge(s, id, 0.0);
            }
        }
        if level < crate::graph::MAX_LEVEL && g.outputs_of(id).is_empty() {
            let upper: Vec<NodeId> = g.nodes().filter(|n| n.level > level).map(|n| n.id).collect();
            if let Some(&d) = upper.choose(rng) {
                g.add_edge(id, d, 0.0);
            }
        }
    }
    // Extend a full-depth prefix one level at a time: a node at level v whose
    // longest stem path has v edges, joined to any node at level v + 1.
    loop {
        let dist = depth_to(g);
        let full = |id: &NodeId| dist[id] == Some(g.level_of(*id).unwrap() as usize);
        let reached = (0..=crate::graph::MAX_LEVEL).take_while(|&v| g.nodes_at_level(v).iter().any(full)).last();
        let Some(v) = reached else { return };
        if v == crate::graph::MAX_LEVEL {
            return;
        }
        let next = g.nodes_at_level(v + 1);
        if next.is_empty() {
            return;
        }
        let pairs: Vec<(NodeId, NodeId)> = g
            .nodes_at_level(v)
            .into_iter()
            .filter(full)
            .flat_map(|s| next.iter().map(move |&d| (s, d)))
            .collect();
        let &(s, d) = pairs.choose(rng).expect("a full-depth node exists at this level");
        g.add_edge(s, d, 0.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{validate_graph, ChannelBudget, NodeKind};
    use crate::mutation::init_population;
    use crate::schedule::LayerSchedule;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pop() -> Vec<ArchitectureGraph> {
        init_population(10, ChannelBudget::DESK, &LayerSchedule::desk(), &MutationConfig::default(), 11).unwrap()
    }

    #[test]
    fn confident_gates_are_all_kept() {
        let cfg = MutationConfig { threshold: Threshold::Constant(0.5), ..MutationConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for mut g in pop() {
            for (s, d) in g.edge_keys() {
                g.set_logit(s, d, 4.6);
            }
            let p = guided_edge_sets(&g, &cfg, &mut rng);
            assert_eq!(p.kept.len(), g.num_edges());
            assert!(p.added.is_empty());
            assert_eq!(guided_edge_mutation(&g, &cfg, &mut rng), g);
        }
    }

    #[test]
    fn toggle_count_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for g in pop() {
            let slots = g.possible_edges().len();
            let (out, toggled) = random_edge_toggle(&g, 1.0 / 3.0, &mut rng);
            assert_eq!(toggled.len(), (slots as f64 / 3.0).round() as usize);
            let diff = g.possible_edges().iter().filter(|&&(s, d)| g.has_edge(s, d) != out.has_edge(s, d)).count();
            assert_eq!(diff, toggled.len());
            let (same, none) = random_edge_toggle(&g, 0.0, &mut rng);
            assert!(none.is_empty());
            assert_eq!(same, g);
        }
    }

    #[test]
    fn repair_restores_validity_without_removing_edges() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for g in pop() {
            for frac in [0.3, 0.7, 1.0] {
                let (mut broken, _) = random_edge_toggle(&g, frac, &mut rng);
                let before = broken.edge_keys();
                repair(&mut broken, &mut rng);
                assert!(validate_graph(&broken).is_ok(), "{}", validate_graph(&broken));
                assert!(before.iter().all(|&(s, d)| broken.has_edge(s, d)));
            }
        }
    }

    #[test]
    fn repair_of_edgeless_graph_builds_a_chain() {
        let mut g = ArchitectureGraph::new(ChannelBudget([4, 4, 4, 4]));
        g.add_stem(NodeKind::MotionStem, 8, 1);
        for level in 1..=4 {
            g.add_block(level, 4, 1, 1);
        }
        repair(&mut g, &mut ChaCha8Rng::seed_from_u64(0));
        assert!(validate_graph(&g).is_ok(), "{}", validate_graph(&g));
    }
}
