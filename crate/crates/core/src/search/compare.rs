use rayon::prelude::*;

use super::{SearchSetup, SearchState, Strategy};
use crate::error::Result;

/// Final top-3 mean across seeds.
#[derive(Clone, Debug, PartialEq)]
pub struct StrategySummary {
    pub strategy: Strategy,
    pub finals: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

pub struct Comparison {
    /// One finished run per (strategy, seed), strategies outermost.
    pub runs: Vec<SearchState>,
    pub summaries: Vec<StrategySummary>,
}

impl Comparison {
    pub fn csv(&self) -> String {
        super::history_csv(&self.runs)
    }

    pub fn summary_table(&self) -> String {
        let mut out = format!("{:<10} {:>6} {:>10} {:>10}\n", "strategy", "seeds", "mean", "std");
        for s in &self.summaries {
            out.push_str(&format!("{:<10} {:>6} {:>10.4} {:>10.4}\n", s.strategy.as_str(), s.finals.len(), s.mean, s.std));
        }
        out
    }

    pub fn run(&self, strategy: Strategy, seed: u64) -> Option<&SearchState> {
        self.runs.iter().find(|r| r.strategy == strategy && r.seed == seed)
    }
}

/// Runs every strategy on every seed with the same setup. Evaluations are
/// cached across runs, so initial rounds (identical for a given seed) are
/// trained once.
pub fn compare_strategies(setup: &SearchSetup, strategies: &[Strategy], seeds: &[u64]) -> Result<Comparison> {
    setup.validate()?;
    let pairs: Vec<(Strategy, u64)> = strategies.iter().flat_map(|&s| seeds.iter().map(move |&seed| (s, seed))).collect();
    // one run per seed first warms the cache with the shared initial rounds
    let runs: Vec<SearchState> = if setup.search.workers > 1 {
        pairs.par_iter().map(|&(s, seed)| setup.run_search(s, seed)).collect::<Result<_>>()?
    } else {
        pairs.iter().map(|&(s, seed)| setup.run_search(s, seed)).collect::<Result<_>>()?
    };
    let summaries = strategies
        .iter()
        .map(|&strategy| {
            let finals: Vec<f64> = runs.iter().filter(|r| r.strategy == strategy).map(|r| r.top3_mean()).collect();
            let n = finals.len() as f64;
            let mean = finals.iter().sum::<f64>() / n;
            let std = if finals.len() > 1 {
                (finals.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            StrategySummary { strategy, finals, mean, std }
        })
        .collect();
    Ok(Comparison { runs, summaries })
}
