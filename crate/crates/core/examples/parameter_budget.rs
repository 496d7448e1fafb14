// Parameter accounting, and why split and merge leave block weights unchanged.

use msnas::graph::{parameter_count, ChannelBudget, TABLE5};
use msnas::mutation::{merge_nodes, split_node};
use msnas::net::{build_baseline, compile, BaselineName, NetConfig};
use msnas::schedule::HeadSpec;
use msnas::LayerSchedule;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn run_example() -> anyhow::Result<()> {
    let desk = LayerSchedule::desk();
    let head = HeadSpec::new(12);
    let g = build_baseline(BaselineName::TwoStreamFully, ChannelBudget::DESK, &desk)?;
    let before = parameter_count(&g, &desk, &head)?;
    println!("two_stream_fully at desk scale: {before:#?}");

    let net = compile(&g, &NetConfig::new(desk.clone(), 12))?;
    assert_eq!(net.num_params(), before.total());

    let target = g.nodes_at_level(2)[0];
    let split = split_node(&g, target)?;
    let after = parameter_count(&split, &desk, &head)?;
    println!("split node {}: block conv {} -> {}, total {} -> {}", target.0, before.block_conv, after.block_conv, before.total(), after.total());
    assert_eq!(before.block_conv, after.block_conv);

    let pair = split.nodes_at_level(2);
    let merged = merge_nodes(&split, pair[0], pair[1], &mut ChaCha8Rng::seed_from_u64(0))?;
    assert_eq!(parameter_count(&merged, &desk, &head)?.block_conv, before.block_conv);

    let reference = msnas::graph::decode_table(TABLE5)?;
    let full = parameter_count(&reference, &LayerSchedule::full_scale(), &HeadSpec::new(339))?;
    println!("reference model at full width: {:.1}M parameters", full.total() as f64 / 1e6);
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
