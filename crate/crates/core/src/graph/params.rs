//! Closed-form trainable-parameter accounting.
//!
//! This is computed from node attributes alone; the network compiler sums the
//! sizes of the tensors it actually allocates, and the two must agree.

use super::{ArchitectureGraph, BlockNode, NodeKind, MAX_LEVEL};
use crate::error::Result;
use crate::schedule::{HeadSpec, LayerSchedule, SinkCombine};

pub const STEM_KERNEL: usize = 7;
pub const STEM_TEMPORAL_TAPS: usize = 5;
pub const BLOCK_TEMPORAL_TAPS: usize = 3;
pub const SPATIAL_KERNEL: usize = 3;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ParameterBreakdown {
    pub stem_conv: usize,
    pub stem_norm: usize,
    /// Convolution weights inside blocks; exactly invariant under split and merge.
    pub block_conv: usize,
    /// Batch-norm scale/shift inside blocks.
    pub block_norm: usize,
    /// 1x1 channel adapters on edges (conv and norm).
    pub adapters: usize,
    /// One logit per edge.
    pub gates: usize,
    /// Fully connected head, weights and bias.
    pub sink: usize,
}

impl ParameterBreakdown {
    pub fn total(&self) -> usize {
        self.stem_conv + self.stem_norm + self.block_conv + self.block_norm + self.adapters + self.gates + self.sink
    }

    pub fn block_internal(&self) -> usize {
        self.block_conv
    }
}

/// Width of the tensor a node emits.
pub fn output_width(node: &BlockNode, schedule: &LayerSchedule) -> usize {
    if node.is_stem() {
        node.channels as usize
    } else {
        schedule.expansion * node.channels as usize
    }
}

fn stem_params(node: &BlockNode, schedule: &LayerSchedule) -> (usize, usize) {
    let s = node.channels as usize;
    let input = match node.kind {
        NodeKind::AppearanceStem => schedule.appearance_channels,
        _ => schedule.motion_channels,
    };
    let mut conv = STEM_KERNEL * STEM_KERNEL * input * s;
    let mut norm = 2 * s;
    if node.kind == NodeKind::AppearanceStem {
        conv += STEM_TEMPORAL_TAPS * s * s;
        norm += 2 * s;
    }
    (conv, norm)
}

/// (conv, norm) parameter counts of one block.
pub fn block_params(node: &BlockNode, schedule: &LayerSchedule) -> Result<(usize, usize)> {
    let c = node.channels as usize;
    let e = schedule.expansion;
    let d = schedule.d_for(node.level)?;
    let i = schedule.input_width_for(node.level)?;
    let k2 = SPATIAL_KERNEL * SPATIAL_KERNEL;
    let (mut conv, mut norm) = (0, 0);
    for module in 0..schedule.modules(node.level)? {
        // entry layer: dense 1x1 from the block input, or grouped (C groups of e) later on
        conv += match module {
            0 => i * c,
            m if m % 2 == 0 => e * c,
            _ => BLOCK_TEMPORAL_TAPS * e * c,
        };
        conv += k2 * c * d + d * e * c;
        norm += 2 * c + 2 * d + 2 * e * c;
        if module == 0 {
            conv += i * e * c;
            norm += 2 * e * c;
        }
    }
    Ok((conv, norm))
}

/// Exact trainable scalar count of `g` compiled with `schedule` and `head`.
pub fn parameter_count(g: &ArchitectureGraph, schedule: &LayerSchedule, head: &HeadSpec) -> Result<ParameterBreakdown> {
    let mut p = ParameterBreakdown::default();
    for n in g.nodes() {
        if n.is_stem() {
            let (conv, norm) = stem_params(n, schedule);
            p.stem_conv += conv;
            p.stem_norm += norm;
        } else {
            let (conv, norm) = block_params(n, schedule)?;
            p.block_conv += conv;
            p.block_norm += norm;
        }
    }
    for e in g.edges() {
        let (Some(src), Some(dst)) = (g.node(e.src), g.node(e.dst)) else { continue };
        let width = output_width(src, schedule);
        let target = schedule.input_width_for(dst.level)?;
        if width != target {
            p.adapters += width * target + 2 * target;
        }
    }
    p.gates = g.num_edges();
    let top: Vec<usize> =
        g.nodes_at_level(MAX_LEVEL).iter().map(|id| output_width(g.node(*id).unwrap(), schedule)).collect();
    let features = match head.combine {
        SinkCombine::Concat => top.iter().sum(),
        SinkCombine::Average => top.iter().copied().max().unwrap_or(0),
    };
    p.sink = features * head.num_classes + head.num_classes;
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{decode_table, ChannelBudget, TABLE5};

    /// Enumerates every layer of a block as (in, out, taps_or_kernel_area, groups)
    /// and sums weights layer by layer; written independently of `block_params`.
    fn enumerate_block(c: usize, level: u8, s: &LayerSchedule) -> usize {
        let modules = (s.m[level as usize - 1] * 2.0).round() as usize;
        let d = s.d[level as usize - 1];
        let i = s.input_width[level as usize - 1];
        let e = s.expansion;
        let mut layers: Vec<(usize, usize, usize, usize)> = Vec::new();
        for m in 0..modules {
            let input = if m == 0 { i } else { e * c };
            let groups = if m == 0 { 1 } else { c };
            let taps = if m % 2 == 1 { 3 } else { 1 };
            layers.push((input, c, taps, groups));
            layers.push((c, d, 9, 1));
            layers.push((d, e * c, 1, 1));
            if m == 0 {
                layers.push((i, e * c, 1, 1));
            }
        }
        layers.iter().map(|&(cin, cout, k, g)| (cin / g) * cout * k).sum()
    }

    #[test]
    fn single_node_matches_layer_enumeration() {
        let mut s = LayerSchedule::desk();
        s.m = [0.5, 1.0, 1.5, 2.0];
        s.d = [16, 16, 16, 16];
        s.input_width = [8, 8, 8, 8];
        for level in 1..=4u8 {
            let node = BlockNode {
                id: crate::graph::NodeId(0),
                level,
                kind: NodeKind::Intermediate,
                channels: 8,
                resolution: 1,
                stride: 1,
            };
            assert_eq!(block_params(&node, &s).unwrap().0, enumerate_block(8, level, &s), "level {level}");
        }
        // m = 0.5, C = 8, D = 16, input 8: 8*8 + 9*8*16 + 16*32 + 8*32
        let node = BlockNode {
            id: crate::graph::NodeId(0),
            level: 1,
            kind: NodeKind::Intermediate,
            channels: 8,
            resolution: 1,
            stride: 1,
        };
        assert_eq!(block_params(&node, &s).unwrap().0, 64 + 1152 + 512 + 256);
    }

    #[test]
    fn empty_graph_has_only_sink_bias() {
        let g = ArchitectureGraph::new(ChannelBudget::DESK);
        let p = parameter_count(&g, &LayerSchedule::desk(), &HeadSpec::new(10)).unwrap();
        assert_eq!(p.block_conv, 0);
        assert_eq!(p.total(), 10);
    }

    #[test]
    fn table5_full_scale_count_is_stable() {
        let g = decode_table(TABLE5).unwrap();
        let p = parameter_count(&g, &LayerSchedule::full_scale(), &HeadSpec::new(339)).unwrap();
        assert_eq!(p.gates, g.num_edges());
        assert_eq!(p.sink, 4 * 512 * 339 + 339);
        assert!(p.block_conv > 10_000_000, "{p:?}");
    }
}
