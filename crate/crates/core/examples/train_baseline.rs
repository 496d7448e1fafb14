// Builds a hand-designed two-stream network and trains it on the proxy task.
// Pass `--full` for the default desk budget instead of the quick one.

use msnas::config::RunConfig;
use msnas::net::{build_baseline, compile, BaselineName};
use msnas::proxy::{evaluate, train};

pub fn run_example() -> anyhow::Result<()> {
    let full = std::env::args().any(|a| a == "--full");
    let mut cfg = RunConfig::compare();
    if full {
        cfg = RunConfig::desk();
    } else {
        cfg.trainer.iterations = 40;
    }
    let data = cfg.dataset()?;
    let g = build_baseline(BaselineName::TwoStreamFully, cfg.search.budget, &cfg.schedule)?;
    let mut net = compile(&g, &cfg.net_config())?;
    let report = train(&mut net, &data.train, &cfg.trainer)?;
    let acc = evaluate(&net, &data.val)?;
    println!(
        "{} params, loss {:.3} -> {:.3}, top-1 {:.3}, top-5 {:.3} (chance {:.3})",
        net.num_params(),
        report.losses.first().copied().unwrap_or(f64::NAN),
        report.final_loss().unwrap_or(f64::NAN),
        acc.top1,
        acc.top5,
        1.0 / data.num_classes() as f64
    );
    for e in net.annotated_graph().edges() {
        println!("  gate {} -> {}: {:.3}", e.src.0, e.dst.0, e.gate());
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
