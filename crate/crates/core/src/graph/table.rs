//! Table-form text format: one row per node,
//! `index: level, [inputs], C, r, spatial_stride`, `#` comments, and an optional
//! trailing section of `w src dst logit` lines carrying edge logits.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::{ArchitectureGraph, ChannelBudget, NodeId, NodeKind, MAX_LEVEL};
use crate::error::{Error, Result};

/// The four-stem reference architecture in table form.
pub const TABLE5: &str = include_str!("../../data/table5.arch");

fn modality_token(kind: NodeKind) -> &'static str {
    match kind {
        NodeKind::AppearanceStem => "RGB",
        NodeKind::MotionStem => "Flow",
        NodeKind::Intermediate => unreachable!("intermediate nodes list node inputs"),
    }
}

fn parse_modality(token: &str) -> Option<NodeKind> {
    match token.to_ascii_lowercase().as_str() {
        "rgb" | "appearance" => Some(NodeKind::AppearanceStem),
        "flow" | "motion" => Some(NodeKind::MotionStem),
        _ => None,
    }
}

/// Writes `g` in table form. Rows follow (level, id) order and are numbered from 0;
/// non-zero edge logits are appended with full round-trip precision.
pub fn encode_table(g: &ArchitectureGraph) -> String {
    let order = g.topological_order();
    let index: BTreeMap<NodeId, usize> = order.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let mut out = String::new();
    for (i, id) in order.iter().enumerate() {
        let n = g.node(*id).expect("node in order");
        let inputs = if n.is_stem() {
            modality_token(n.kind).to_string()
        } else {
            let mut ins: Vec<usize> = g.inputs_of(*id).iter().map(|s| index[s]).collect();
            ins.sort_unstable();
            ins.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
        };
        let _ = writeln!(out, "{i}: {}, [{inputs}], {}, {}, {}", n.level, n.channels, n.resolution, n.stride);
    }
    let mut logits = g.edges().filter(|e| e.logit != 0.0).peekable();
    if logits.peek().is_some() {
        out.push_str("# edge logits: w src dst value\n");
        for e in logits {
            let _ = writeln!(out, "w {} {} {:?}", index[&e.src], index[&e.dst], e.logit);
        }
    }
    out
}

struct Cursor<'a> {
    row: usize,
    line: usize,
    rest: &'a str,
}

impl<'a> Cursor<'a> {
    fn err(&self, detail: impl Into<String>) -> Error {
        Error::TableParse { row: self.row, line: self.line, detail: detail.into() }
    }
}

/// Parses table text. Node ids equal row indices and the channel budget is the
/// per-level sum of the decoded C values.
pub fn decode_table(text: &str) -> Result<ArchitectureGraph> {
    let mut g = ArchitectureGraph::new(ChannelBudget([0; 4]));
    let mut rows = 0usize;
    let mut in_logits = false;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let cur = Cursor { row: rows, line: lineno + 1, rest: line };
        if let Some(rest) = line.strip_prefix('w').filter(|r| r.starts_with(char::is_whitespace)) {
            in_logits = true;
            parse_logit(&mut g, &Cursor { rest, ..cur })?;
            continue;
        }
        if in_logits {
            return Err(cur.err("node row after the edge-logit section"));
        }
        parse_row(&mut g, &cur)?;
        rows += 1;
    }
    let mut budget = [0u32; 4];
    for level in 1..=MAX_LEVEL {
        budget[level as usize - 1] = g.channel_sum(level);
    }
    g.set_budget(ChannelBudget(budget));
    Ok(g)
}

fn parse_int<T: std::str::FromStr>(cur: &Cursor<'_>, field: &str, what: &str) -> Result<T> {
    field.trim().parse().map_err(|_| cur.err(format!("{what}: cannot parse {:?}", field.trim())))
}

fn parse_row(g: &mut ArchitectureGraph, cur: &Cursor<'_>) -> Result<()> {
    let (idx, body) = cur.rest.split_once(':').ok_or_else(|| cur.err("missing `index:` prefix"))?;
    let idx: usize = parse_int(cur, idx, "index")?;
    if idx != cur.row {
        return Err(cur.err(format!("row index {idx} out of sequence (expected {})", cur.row)));
    }
    let open = body.find('[').ok_or_else(|| cur.err("missing `[` input list"))?;
    let close = body.find(']').ok_or_else(|| cur.err("missing `]` input list"))?;
    if close < open {
        return Err(cur.err("malformed input list"));
    }
    let level_field = body[..open].trim().trim_end_matches(',');
    let level: u8 = parse_int(cur, level_field, "level")?;
    if level > MAX_LEVEL {
        return Err(cur.err(format!("level {level} out of range 0..=4")));
    }
    let list = &body[open + 1..close];
    let tail: Vec<&str> = body[close + 1..].split(',').map(str::trim).collect();
    if tail.len() != 4 || !tail[0].is_empty() {
        return Err(cur.err("expected `, C, r, stride` after the input list"));
    }
    let channels: u32 = parse_int(cur, tail[1], "C")?;
    let resolution: u32 = parse_int(cur, tail[2], "r")?;
    let stride: u32 = parse_int(cur, tail[3], "stride")?;

    if level == 0 {
        let kind = parse_modality(list.trim())
            .ok_or_else(|| cur.err(format!("unknown stem input kind {:?}", list.trim())))?;
        g.add_node(0, kind, channels, resolution, stride);
        return Ok(());
    }
    let id = NodeId(cur.row as u32);
    let mut inputs = Vec::new();
    for tok in list.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let src: usize = match tok.parse() {
            Ok(v) => v,
            Err(_) if parse_modality(tok).is_some() => {
                return Err(cur.err(format!("level-{level} row takes a modality {tok:?}; only stems may")))
            }
            Err(_) => return Err(cur.err(format!("unknown input {tok:?}"))),
        };
        if src >= cur.row {
            return Err(cur.err(format!("input {src} is a forward reference")));
        }
        let src_level = g.level_of(NodeId(src as u32)).expect("earlier rows exist");
        if src_level >= level {
            return Err(cur.err(format!("input {src} has level {src_level}, not below {level}")));
        }
        inputs.push(NodeId(src as u32));
    }
    let added = g.add_node(level, NodeKind::Intermediate, channels, resolution, stride);
    debug_assert_eq!(added, id);
    for src in inputs {
        g.add_edge(src, id, 0.0);
    }
    Ok(())
}

fn parse_logit(g: &mut ArchitectureGraph, cur: &Cursor<'_>) -> Result<()> {
    let fields: Vec<&str> = cur.rest.split_whitespace().collect();
    if fields.len() != 3 {
        return Err(cur.err("edge-logit line needs `w src dst value`"));
    }
    let src: u32 = parse_int(cur, fields[0], "src")?;
    let dst: u32 = parse_int(cur, fields[1], "dst")?;
    let value: f64 = parse_int(cur, fields[2], "logit")?;
    if !value.is_finite() {
        return Err(cur.err("edge logit must be finite"));
    }
    if !g.set_logit(NodeId(src), NodeId(dst), value) {
        return Err(cur.err(format!("no edge {src}->{dst} for logit")));
    }
    Ok(())
}
