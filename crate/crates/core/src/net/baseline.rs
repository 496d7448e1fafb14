//! Hand-designed multi-stream baselines.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::graph::{ArchitectureGraph, ChannelBudget, NodeId, NodeKind};
use crate::schedule::LayerSchedule;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BaselineName {
    TwoStreamLateFusion,
    TwoStreamFuseLv4,
    TwoStreamFlowToRgb,
    TwoStreamFully,
    FourStreamFully,
}

pub const BASELINES: [BaselineName; 5] = [
    BaselineName::TwoStreamLateFusion,
    BaselineName::TwoStreamFuseLv4,
    BaselineName::TwoStreamFlowToRgb,
    BaselineName::TwoStreamFully,
    BaselineName::FourStreamFully,
];

impl BaselineName {
    pub fn as_str(self) -> &'static str {
        match self {
            BaselineName::TwoStreamLateFusion => "two_stream_late_fusion",
            BaselineName::TwoStreamFuseLv4 => "two_stream_fuse_lv4",
            BaselineName::TwoStreamFlowToRgb => "two_stream_flow_to_rgb",
            BaselineName::TwoStreamFully => "two_stream_fully",
            BaselineName::FourStreamFully => "four_stream_fully",
        }
    }
}

impl fmt::Display for BaselineName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BaselineName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BASELINES.into_iter().find(|b| b.as_str() == s).ok_or_else(|| Error::UnknownName(s.to_string()))
    }
}

/// Spatial stride of a block at `level` in the hand-designed models.
pub fn default_stride(level: u8) -> u32 {
    if level <= 1 {
        1
    } else {
        2
    }
}

fn split(budget: u32, parts: u32, level: u8) -> Result<u32> {
    if budget % parts != 0 || budget == 0 {
        return Err(Error::Config(format!("level {level} budget {budget} does not split into {parts} streams")));
    }
    Ok(budget / parts)
}

fn level_nodes(g: &mut ArchitectureGraph, level: u8, count: u32) -> Result<Vec<NodeId>> {
    let c = split(g.budget().level(level), count, level)?;
    Ok((0..count).map(|_| g.add_block(level, c, 1, default_stride(level))).collect())
}

fn fully_connect(g: &mut ArchitectureGraph, lower: &[NodeId], upper: &[NodeId]) {
    for &s in lower {
        for &d in upper {
            g.add_edge(s, d, 0.0);
        }
    }
}

/// Builds one of the hand-designed architectures under `budget`. Stem widths
/// come from `schedule`.
pub fn build_baseline(name: BaselineName, budget: ChannelBudget, schedule: &LayerSchedule) -> Result<ArchitectureGraph> {
    let mut g = ArchitectureGraph::new(budget);
    if name == BaselineName::FourStreamFully {
        let w = schedule.stem_width(4) as u32;
        let mut prev = vec![
            g.add_stem(NodeKind::AppearanceStem, w, 1),
            g.add_stem(NodeKind::AppearanceStem, w, 4),
            g.add_stem(NodeKind::MotionStem, w, 1),
            g.add_stem(NodeKind::MotionStem, w, 1),
        ];
        for level in 1..=4 {
            let nodes = level_nodes(&mut g, level, if level == 4 { 1 } else { 4 })?;
            fully_connect(&mut g, &prev, &nodes);
            prev = nodes;
        }
        return Ok(g);
    }
    let w = schedule.stem_width(2) as u32;
    let rgb = g.add_stem(NodeKind::AppearanceStem, w, 1);
    let flow = g.add_stem(NodeKind::MotionStem, w, 1);
    let (mut a, mut b) = (rgb, flow);
    let late = name == BaselineName::TwoStreamLateFusion;
    for level in 1..=3 {
        let nodes = level_nodes(&mut g, level, 2)?;
        let (na, nb) = (nodes[0], nodes[1]);
        match name {
            BaselineName::TwoStreamFully => fully_connect(&mut g, &[a, b], &nodes),
            BaselineName::TwoStreamFlowToRgb => {
                g.add_edge(a, na, 0.0);
                g.add_edge(b, na, 0.0);
                g.add_edge(b, nb, 0.0);
            }
            _ => {
                g.add_edge(a, na, 0.0);
                g.add_edge(b, nb, 0.0);
            }
        }
        (a, b) = (na, nb);
    }
    if late {
        let nodes = level_nodes(&mut g, 4, 2)?;
        g.add_edge(a, nodes[0], 0.0);
        g.add_edge(b, nodes[1], 0.0);
    } else {
        let top = level_nodes(&mut g, 4, 1)?;
        fully_connect(&mut g, &[a, b], &top);
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{longest_path_depth, validate_graph};

    #[test]
    fn every_baseline_validates() {
        for name in BASELINES {
            let g = build_baseline(name, ChannelBudget::DESK, &LayerSchedule::desk()).unwrap();
            assert!(validate_graph(&g).is_ok(), "{name}: {}", validate_graph(&g));
            assert_eq!(longest_path_depth(&g), 4);
            assert_eq!(name.as_str().parse::<BaselineName>().unwrap(), name);
        }
    }

    #[test]
    fn late_fusion_streams_stay_disjoint() {
        let g = build_baseline(BaselineName::TwoStreamLateFusion, ChannelBudget::DESK, &LayerSchedule::desk()).unwrap();
        assert_eq!(g.num_edges(), 8);
        assert_eq!(g.nodes_at_level(4).len(), 2);
    }

    #[test]
    fn four_stream_edge_count() {
        let g = build_baseline(BaselineName::FourStreamFully, ChannelBudget::DESK, &LayerSchedule::desk()).unwrap();
        assert_eq!(g.stems().len(), 4);
        assert_eq!(g.num_edges(), 16 * 3 + 4);
    }

    #[test]
    fn unknown_name_is_rejected() {
        assert!(matches!("three_stream".parse::<BaselineName>(), Err(Error::UnknownName(_))));
    }
}
