// A short guided evolution with a checkpoint and resume halfway through.

use msnas::config::RunConfig;
use msnas::search::{history_csv, load_checkpoint, save_checkpoint, SearchState, Strategy};

pub fn run_example() -> anyhow::Result<()> {
    let mut cfg = RunConfig::compare();
    cfg.search.population_size = 6;
    cfg.search.tournament_size = 3;
    cfg.search.init_rounds = 6;
    cfg.search.rounds = 6;
    cfg.trainer.iterations = 20;
    let setup = cfg.setup()?;

    let mut state = SearchState::new(Strategy::Guided, 1);
    while state.round < 8 {
        setup.step(&mut state)?;
    }
    let dir = tempfile::tempdir()?;
    let ckpt = dir.path().join("search.json");
    save_checkpoint(&state, &ckpt)?;

    let mut resumed = load_checkpoint(&ckpt)?;
    setup.run_with(&mut resumed, |s| {
        let h = s.history.last().unwrap();
        println!("round {:>2}: child {:.3}, top-3 mean {:.3} ({})", h.round, h.child_fitness, h.top3_mean, h.log);
        Ok(())
    })?;
    let uninterrupted = cfg.setup()?.run_search(Strategy::Guided, 1)?;
    assert_eq!(history_csv([&resumed]), history_csv([&uninterrupted]));
    let best = resumed.best.as_ref().unwrap();
    println!("best fitness {:.3}: {} nodes, {} edges", best.fitness, best.graph.num_nodes(), best.graph.num_edges());
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
