// Guided evolution against random-edge evolution and random search.
// The default is a quick two-seed run; `--full` runs the five-seed,
// 30 + 40 round comparison (tens of minutes).

use msnas::config::RunConfig;
use msnas::search::{compare_strategies, STRATEGIES};

pub fn run_example() -> anyhow::Result<()> {
    let full = std::env::args().any(|a| a == "--full");
    let mut cfg = RunConfig::compare();
    let seeds: Vec<u64> = if full { (0..5).collect() } else { vec![0, 1] };
    if !full {
        cfg.search.population_size = 5;
        cfg.search.tournament_size = 2;
        cfg.search.init_rounds = 5;
        cfg.search.rounds = 5;
        cfg.trainer.iterations = 10;
    }
    let setup = cfg.setup()?;
    let cmp = compare_strategies(&setup, &STRATEGIES, &seeds)?;
    print!("{}", cmp.summary_table());
    println!("{} distinct trainings, {} csv rows", setup.evaluator.cache_len(), cmp.csv().lines().count() - 1);
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
