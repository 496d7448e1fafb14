// Node operators and the two edge mutations on a random initial architecture.

use msnas::graph::ChannelBudget;
use msnas::mutation::{
    change_temporal_resolution, guided_edge_sets, init_population, random_edge_mutation, split_node, MutationConfig,
};
use msnas::search::{make_child, Strategy};
use msnas::LayerSchedule;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn run_example() -> anyhow::Result<()> {
    let cfg = MutationConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut parent = init_population(1, ChannelBudget::DESK, &LayerSchedule::desk(), &cfg, 4)?.remove(0);
    println!("parent: {} nodes, {} edges", parent.num_nodes(), parent.num_edges());

    // pretend training pushed some gates up and others down
    for (i, (s, d)) in parent.edge_keys().into_iter().enumerate() {
        parent.set_logit(s, d, if i % 3 == 0 { -3.0 } else { 2.0 });
    }
    let proposal = guided_edge_sets(&parent, &cfg, &mut rng);
    println!("guided: kept {} of {}, added {}", proposal.kept.len(), parent.num_edges(), proposal.added.len());

    let standard = random_edge_mutation(&parent, cfg.random_edge_fraction, &mut rng);
    println!("standard: {} edges after toggling a third of the slots", standard.num_edges());

    let block = parent.intermediates()[0];
    if let Ok(split) = split_node(&parent, block) {
        println!("split node {}: {} -> {} nodes", block.0, parent.num_nodes(), split.num_nodes());
    }
    let slowed = change_temporal_resolution(&parent, block, &cfg.resolutions, &mut rng)?;
    println!("node {} resolution {} -> {}", block.0, parent.node(block).unwrap().resolution, slowed.node(block).unwrap().resolution);

    for strategy in [Strategy::Guided, Strategy::Standard] {
        let (child, ops) = make_child(&parent, strategy, &cfg, &mut rng);
        child.validate().into_result()?;
        println!("{strategy} child: {} nodes, {} edges, node ops {ops:?}", child.num_nodes(), child.num_edges());
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
