// Decoding, validating and re-encoding the four-stem reference architecture,
// plus its DOT rendering.

use msnas::graph::{decode_table, encode_table, export_dot, longest_path_depth, TABLE5};

pub fn run_example() -> anyhow::Result<()> {
    let g = decode_table(TABLE5)?;
    g.validate().into_result()?;
    println!("{} nodes, {} edges, depth {}", g.num_nodes(), g.num_edges(), longest_path_depth(&g));
    for id in g.nodes_at_level(3) {
        let n = g.node(id).unwrap();
        println!("node {}: C={} r={} inputs {:?}", id.0, n.channels, n.resolution, g.inputs_of(id).iter().map(|i| i.0).collect::<Vec<_>>());
    }
    let text = encode_table(&g);
    assert_eq!(decode_table(&text)?, g);
    print!("{text}");
    let dot = export_dot(&g);
    println!("DOT: {} lines, first: {}", dot.lines().count(), dot.lines().next().unwrap_or(""));

    // a row that points forward is rejected with its row number
    let err = decode_table("0: 0, [RGB], 8, 1, 4\n1: 1, [2], 8, 1, 1\n2: 2, [1], 8, 1, 2\n").unwrap_err();
    println!("bad table: {err}");
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
