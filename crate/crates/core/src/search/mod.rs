//! Tournament-selection evolution over architectures.
//!
//! Each round draws a candidate (a fresh random architecture during the
//! initial rounds, afterwards a mutated tournament winner), trains and scores
//! it, inserts it and evicts the least fit member.

mod checkpoint;
mod compare;
mod eval;
mod select;

use std::fmt;
use std::str::FromStr;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_VERSION};
pub use compare::{compare_strategies, Comparison, StrategySummary};
pub use eval::{Evaluation, Evaluator};
pub use select::{fitness, tournament_select};

use crate::error::{Error, Result};
use crate::graph::{ArchitectureGraph, ChannelBudget};
use crate::mutation::{apply_node_op, guided_edge_mutation, random_edge_mutation, random_member, MutationConfig, NODE_OPS};
use crate::schedule::LayerSchedule;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Edge mutation keeps strongly gated parental edges.
    #[serde(alias = "guided_evolution")]
    Guided,
    /// Edge mutation toggles a random fraction of edge slots; learned gates are discarded.
    #[serde(alias = "standard_random_edges")]
    Standard,
    /// Every candidate is a fresh random architecture.
    #[serde(alias = "pure_random_search")]
    Random,
}

pub const STRATEGIES: [Strategy; 3] = [Strategy::Guided, Strategy::Standard, Strategy::Random];

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Guided => "guided",
            Strategy::Standard => "standard",
            Strategy::Random => "random",
        }
    }

    fn long_name(self) -> &'static str {
        match self {
            Strategy::Guided => "guided_evolution",
            Strategy::Standard => "standard_random_edges",
            Strategy::Random => "pure_random_search",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        STRATEGIES.into_iter().find(|x| x.as_str() == s || x.long_name() == s).ok_or_else(|| Error::UnknownName(s.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    pub population_size: usize,
    pub tournament_size: usize,
    /// Rounds that insert fresh random architectures before evolution starts.
    pub init_rounds: usize,
    /// Evolution rounds after initialisation.
    pub rounds: usize,
    /// Candidates trained concurrently per step.
    pub workers: usize,
    pub budget: ChannelBudget,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            population_size: 20,
            tournament_size: 5,
            init_rounds: 30,
            rounds: 40,
            workers: 1,
            budget: ChannelBudget::DESK,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population_size < 2 {
            return Err(Error::Config("population_size must be at least 2".into()));
        }
        if self.tournament_size == 0 || self.tournament_size > self.population_size {
            return Err(Error::Config("tournament_size must lie in 1..=population_size".into()));
        }
        if self.init_rounds == 0 {
            return Err(Error::Config("init_rounds must be positive".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be positive".into()));
        }
        Ok(())
    }

    pub fn total_rounds(&self) -> usize {
        self.init_rounds + self.rounds
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Member {
    /// Architecture with the edge logits learned while scoring it.
    pub graph: ArchitectureGraph,
    pub fitness: f64,
    /// Insertion rank; lower is older.
    pub inserted: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub round: usize,
    /// Mean fitness of the three fittest members after this round.
    pub top3_mean: f64,
    /// Best fitness seen so far.
    pub best: f64,
    pub child_fitness: f64,
    /// What produced the candidate.
    pub log: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchState {
    pub strategy: Strategy,
    pub seed: u64,
    /// Index of the next round to run.
    pub round: usize,
    pub population: Vec<Member>,
    pub best: Option<Member>,
    pub history: Vec<HistoryRow>,
    pub next_insert: u64,
}

impl SearchState {
    pub fn new(strategy: Strategy, seed: u64) -> Self {
        SearchState { strategy, seed, round: 0, population: Vec::new(), best: None, history: Vec::new(), next_insert: 0 }
    }

    pub fn top3_mean(&self) -> f64 {
        let mut f: Vec<f64> = self.population.iter().map(|m| m.fitness).collect();
        f.sort_by(|a, b| b.total_cmp(a));
        let top = &f[..f.len().min(3)];
        if top.is_empty() {
            0.0
        } else {
            top.iter().sum::<f64>() / top.len() as f64
        }
    }

    pub fn min_fitness(&self) -> Option<f64> {
        self.population.iter().map(|m| m.fitness).min_by(|a, b| a.total_cmp(b))
    }

    /// Adds `graph` and, above `capacity`, evicts the least fit member (the
    /// oldest among equals). Returns whether the newcomer survived.
    pub fn insert(&mut self, graph: ArchitectureGraph, fitness: f64, capacity: usize) -> bool {
        let member = Member { graph, fitness, inserted: self.next_insert };
        self.next_insert += 1;
        if self.best.as_ref().is_none_or(|b| fitness > b.fitness) {
            self.best = Some(member.clone());
        }
        self.population.push(member);
        if self.population.len() <= capacity {
            return true;
        }
        let worst = (0..self.population.len())
            .min_by(|&a, &b| {
                let (x, y) = (&self.population[a], &self.population[b]);
                x.fitness.total_cmp(&y.fitness).then(x.inserted.cmp(&y.inserted))
            })
            .unwrap();
        let evicted = self.population.remove(worst);
        evicted.inserted != self.next_insert - 1
    }
}

/// Randomness of round `round` of a run: independent of every other round, so
/// a resumed run draws exactly what an uninterrupted one would.
pub fn round_rng(seed: u64, round: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(round as u64 + 1);
    rng
}

/// Produces a child of `parent`: an edge mutation followed by `0..=max_ops`
/// node operators, each drawn uniformly from split, merge and resolution
/// change (an operator with no valid target is redrawn). Returns the child
/// and the number of node operators applied.
pub fn make_child<R: Rng + ?Sized>(
    parent: &ArchitectureGraph,
    strategy: Strategy,
    cfg: &MutationConfig,
    rng: &mut R,
) -> (ArchitectureGraph, Vec<&'static str>) {
    let mut child = match strategy {
        Strategy::Guided => guided_edge_mutation(parent, cfg, rng),
        _ => {
            let mut blank = parent.clone();
            for (s, d) in parent.edge_keys() {
                blank.set_logit(s, d, 0.0);
            }
            random_edge_mutation(&blank, cfg.random_edge_fraction, rng)
        }
    };
    let count = rng.random_range(0..=cfg.max_ops_per_child);
    let mut ops = Vec::with_capacity(count);
    for _ in 0..count {
        for _ in 0..32 {
            let op = *NODE_OPS.choose(rng).unwrap();
            if let Ok(next) = apply_node_op(&child, op, cfg, rng) {
                child = next;
                ops.push(match op {
                    crate::mutation::NodeOp::Split => "split",
                    crate::mutation::NodeOp::Merge => "merge",
                    crate::mutation::NodeOp::Resolution => "resolution",
                });
                break;
            }
        }
    }
    (child, ops)
}

/// Everything a run needs besides its state.
#[derive(Clone)]
pub struct SearchSetup {
    pub search: SearchConfig,
    pub mutation: MutationConfig,
    pub schedule: LayerSchedule,
    pub evaluator: Evaluator,
}

struct Job {
    round: usize,
    candidate: ArchitectureGraph,
    train_seed: u64,
    log: String,
}

impl SearchSetup {
    pub fn validate(&self) -> Result<()> {
        self.search.validate()?;
        self.mutation.validate()
    }

    fn propose(&self, state: &SearchState, round: usize) -> Result<Job> {
        let mut rng = round_rng(state.seed, round);
        let fresh = round < self.search.init_rounds || state.strategy == Strategy::Random || state.population.is_empty();
        let (candidate, log) = if fresh {
            let g = random_member(self.search.budget, &self.schedule, &self.mutation, state.seed, &mut rng)?;
            (g, "init".to_string())
        } else {
            let fit: Vec<f64> = state.population.iter().map(|m| m.fitness).collect();
            let order: Vec<u64> = state.population.iter().map(|m| m.inserted).collect();
            let p = tournament_select(&fit, &order, self.search.tournament_size, &mut rng);
            let parent = &state.population[p];
            let (child, ops) = make_child(&parent.graph, state.strategy, &self.mutation, &mut rng);
            (child, format!("parent {} ops [{}]", parent.inserted, ops.join(" ")))
        };
        Ok(Job { round, candidate, train_seed: rng.random(), log })
    }

    /// Runs up to `workers` rounds against the current population snapshot and
    /// inserts their candidates in round order.
    pub fn step(&self, state: &mut SearchState) -> Result<usize> {
        let end = self.search.total_rounds();
        if state.round >= end {
            return Ok(0);
        }
        let first = state.round;
        // evolution jobs never share a batch with initialisation jobs
        let limit = if first < self.search.init_rounds { self.search.init_rounds } else { end };
        let last = (first + self.search.workers).min(limit);
        let jobs: Vec<Job> = (first..last).map(|r| self.propose(state, r)).collect::<Result<_>>()?;
        let results: Vec<Evaluation> =
            jobs.par_iter().map(|j| self.evaluator.evaluate(&j.candidate, j.train_seed)).collect();
        for (job, eval) in jobs.into_iter().zip(results) {
            let mut log = job.log;
            if let Some(f) = &eval.failure {
                log = format!("{log}; failed: {f}");
            }
            state.insert(eval.graph, eval.fitness, self.search.population_size);
            state.history.push(HistoryRow {
                round: job.round,
                top3_mean: state.top3_mean(),
                best: state.best.as_ref().map_or(0.0, |b| b.fitness),
                child_fitness: eval.fitness,
                log,
            });
            state.round = job.round + 1;
        }
        Ok(last - first)
    }

    /// Runs `state` to completion, calling `on_step` after every step.
    pub fn run_with(&self, state: &mut SearchState, mut on_step: impl FnMut(&SearchState) -> Result<()>) -> Result<()> {
        self.validate()?;
        while self.step(state)? > 0 {
            on_step(state)?;
        }
        Ok(())
    }

    /// A full run from scratch.
    pub fn run_search(&self, strategy: Strategy, seed: u64) -> Result<SearchState> {
        let mut state = SearchState::new(strategy, seed);
        self.run_with(&mut state, |_| Ok(()))?;
        Ok(state)
    }
}

/// History rows as CSV with columns `strategy,seed,round,top3_mean,best,child_fitness`.
pub fn history_csv<'a>(runs: impl IntoIterator<Item = &'a SearchState>) -> String {
    let mut out = String::from("strategy,seed,round,top3_mean,best,child_fitness\n");
    for s in runs {
        for h in &s.history {
            out.push_str(&format!("{},{},{},{},{},{}\n", s.strategy, s.seed, h.round, h.top3_mean, h.best, h.child_fitness));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{validate_graph, ChannelBudget, NodeKind};

    fn graph() -> ArchitectureGraph {
        crate::mutation::init_population(1, ChannelBudget::DESK, &LayerSchedule::desk(), &MutationConfig::default(), 3)
            .unwrap()
            .remove(0)
    }

    #[test]
    fn insert_evicts_min_and_keeps_size() {
        let g = graph();
        let mut s = SearchState::new(Strategy::Guided, 0);
        for f in [1.0, 0.5, 1.5] {
            assert!(s.insert(g.clone(), f, 3));
        }
        assert!(!s.insert(g.clone(), 0.2, 3));
        assert_eq!(s.population.len(), 3);
        assert_eq!(s.min_fitness(), Some(0.5));
        assert!(s.insert(g.clone(), 0.9, 3));
        assert_eq!(s.min_fitness(), Some(0.9));
        assert_eq!(s.best.as_ref().unwrap().fitness, 1.5);
    }

    #[test]
    fn equal_fitness_replaces_oldest() {
        let g = graph();
        let mut s = SearchState::new(Strategy::Guided, 0);
        for _ in 0..3 {
            s.insert(g.clone(), 1.0, 3);
        }
        assert!(s.insert(g, 1.0, 3));
        let ids: Vec<u64> = s.population.iter().map(|m| m.inserted).collect();
        assert_eq!(ids, vec![1, 2, 3]);
    }

    #[test]
    fn children_are_valid_and_ops_bounded() {
        let parent = graph();
        let cfg = MutationConfig::default();
        let mut rng = round_rng(1, 0);
        for strategy in [Strategy::Guided, Strategy::Standard] {
            for _ in 0..100 {
                let (child, ops) = make_child(&parent, strategy, &cfg, &mut rng);
                assert!(validate_graph(&child).is_ok(), "{}", validate_graph(&child));
                assert!(ops.len() <= 4);
                assert_eq!(child.stems().len(), parent.stems().len());
                for level in 1..=4 {
                    assert_eq!(child.channel_sum(level), parent.channel_sum(level));
                }
            }
        }
    }

    #[test]
    fn standard_children_forget_learned_gates() {
        let mut parent = graph();
        for (s, d) in parent.edge_keys() {
            parent.set_logit(s, d, 2.0);
        }
        let cfg = MutationConfig { max_ops_per_child: 0, ..MutationConfig::default() };
        let (child, _) = make_child(&parent, Strategy::Standard, &cfg, &mut round_rng(0, 0));
        assert!(child.edges().all(|e| e.logit == 0.0));
        let (child, _) = make_child(&parent, Strategy::Guided, &cfg, &mut round_rng(0, 0));
        assert!(child.edges().any(|e| e.logit == 2.0));
        assert!(child.nodes().all(|n| n.kind != NodeKind::Intermediate || parent.node(n.id) == Some(n)));
    }

    #[test]
    fn strategy_names_round_trip() {
        for s in STRATEGIES {
            assert_eq!(s.as_str().parse::<Strategy>().unwrap(), s);
            assert_eq!(s.long_name().parse::<Strategy>().unwrap(), s);
        }
        assert!("greedy".parse::<Strategy>().is_err());
    }
}
