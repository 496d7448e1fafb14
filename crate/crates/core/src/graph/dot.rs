use std::fmt::Write as _;

use super::{ArchitectureGraph, NodeKind, MAX_LEVEL};

/// Renders `g` as a DOT digraph. Edge pen width and grey level scale with the
/// gate `sigmoid(w)`, so stronger connections draw darker and thicker. Every
/// level-4 node is joined to an implicit `sink` node.
pub fn export_dot(g: &ArchitectureGraph) -> String {
    let mut out = String::from("digraph architecture {\n  rankdir=BT;\n  node [shape=box, style=rounded];\n");
    for level in 0..=MAX_LEVEL {
        let ids = g.nodes_at_level(level);
        if ids.is_empty() {
            continue;
        }
        let _ = writeln!(out, "  {{ rank=same;");
        for id in ids {
            let n = g.node(id).expect("listed node");
            let label = match n.kind {
                NodeKind::AppearanceStem => format!("{id}: RGB stem\\nC={} r={}", n.channels, n.resolution),
                NodeKind::MotionStem => format!("{id}: Flow stem\\nC={}", n.channels),
                NodeKind::Intermediate => {
                    format!("{id}: L{}\\nC={} r={} s={}", n.level, n.channels, n.resolution, n.stride)
                }
            };
            let _ = writeln!(out, "    n{id} [label=\"{label}\"];");
        }
        let _ = writeln!(out, "  }}");
    }
    out.push_str("  sink [label=\"sink\", shape=ellipse];\n");
    for e in g.edges() {
        let gate = e.gate();
        let shade = (255.0 * (1.0 - gate)).round().clamp(0.0, 255.0) as u8;
        let _ = writeln!(
            out,
            "  n{} -> n{} [penwidth={:.3}, color=\"#{shade:02x}{shade:02x}{shade:02x}\", weight=\"{}\", label=\"{}\"];",
            e.src,
            e.dst,
            0.5 + 4.5 * gate,
            round3(gate),
            round3(gate)
        );
    }
    for id in g.nodes_at_level(MAX_LEVEL) {
        let _ = writeln!(out, "  n{id} -> sink [style=dashed];");
    }
    out.push_str("}\n");
    out
}

fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{decode_table, ChannelBudget, TABLE5};

    fn node_lines(dot: &str) -> usize {
        dot.lines()
            .map(str::trim_start)
            .filter(|l| l.starts_with('n') && l.contains(" [label=") && !l.contains("->"))
            .count()
    }

    #[test]
    fn two_node_graph() {
        let mut g = ArchitectureGraph::new(ChannelBudget([8, 0, 0, 0]));
        let s = g.add_stem(NodeKind::AppearanceStem, 8, 1);
        let a = g.add_block(1, 8, 1, 1);
        g.add_edge(s, a, 0.0);
        let dot = export_dot(&g);
        assert!(dot.starts_with("digraph"));
        assert_eq!(node_lines(&dot), 2);
        assert_eq!(dot.matches(" -> ").count(), 1);
        assert!(dot.contains("label=\"0.5\""));
    }

    #[test]
    fn table5_renders_fifteen_nodes_and_sink() {
        let g = decode_table(TABLE5).unwrap();
        let dot = export_dot(&g);
        assert_eq!(node_lines(&dot), 15);
        assert!(dot.contains("sink [label"));
        assert!(dot.contains("n14 -> sink"));
    }

    #[test]
    fn stronger_gate_draws_thicker() {
        let mut g = ArchitectureGraph::new(ChannelBudget([8, 0, 0, 0]));
        let s = g.add_stem(NodeKind::MotionStem, 8, 1);
        let a = g.add_block(1, 4, 1, 1);
        let b = g.add_block(1, 4, 1, 1);
        g.add_edge(s, a, 3.0);
        g.add_edge(s, b, -3.0);
        let dot = export_dot(&g);
        let width = |needle: &str| -> f64 {
            let line = dot.lines().find(|l| l.contains(needle)).unwrap();
            let start = line.find("penwidth=").unwrap() + 9;
            line[start..].split(',').next().unwrap().parse().unwrap()
        };
        assert!(width("n0 -> n1") > width("n0 -> n2"));
    }
}
