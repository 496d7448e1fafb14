use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use crate::graph::{encode_table, ArchitectureGraph};
use crate::net::{compile, NetConfig};
use crate::proxy::{evaluate, train, Accuracy, ProxyDataset, TrainerConfig};

/// Outcome of training and scoring one candidate.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    /// The candidate with its trained edge logits.
    pub graph: ArchitectureGraph,
    pub fitness: f64,
    pub accuracy: Option<Accuracy>,
    /// Set when compiling or training failed; fitness is then 0.
    pub failure: Option<String>,
}

/// Trains candidates on a fixed proxy dataset. Identical (graph, seed)
/// requests are answered from a cache shared by clones of the evaluator.
#[derive(Clone)]
pub struct Evaluator {
    data: Arc<ProxyDataset>,
    net: NetConfig,
    trainer: TrainerConfig,
    cache: Arc<Mutex<HashMap<(String, u64), Evaluation>>>,
}

impl Evaluator {
    pub fn new(data: Arc<ProxyDataset>, net: NetConfig, trainer: TrainerConfig) -> Self {
        Evaluator { data, net, trainer, cache: Arc::default() }
    }

    pub fn dataset(&self) -> &ProxyDataset {
        &self.data
    }

    pub fn net_config(&self) -> &NetConfig {
        &self.net
    }

    pub fn trainer_config(&self) -> &TrainerConfig {
        &self.trainer
    }

    /// Number of distinct evaluations performed so far.
    pub fn cache_len(&self) -> usize {
        self.cache.lock().unwrap().len()
    }

    /// Trains `g` with weight init and batch order drawn from `seed`.
    pub fn evaluate(&self, g: &ArchitectureGraph, seed: u64) -> Evaluation {
        let key = (format!("{:?}\n{}", g.budget(), encode_table(g)), seed);
        if let Some(hit) = self.cache.lock().unwrap().get(&key) {
            return hit.clone();
        }
        let result = self.run(g, seed);
        self.cache.lock().unwrap().insert(key, result.clone());
        result
    }

    fn run(&self, g: &ArchitectureGraph, seed: u64) -> Evaluation {
        let net_cfg = NetConfig { init_seed: seed, ..self.net.clone() };
        let trainer = TrainerConfig { seed, ..self.trainer.clone() };
        let outcome = compile(g, &net_cfg).and_then(|mut net| {
            train(&mut net, &self.data.train, &trainer)?;
            let acc = evaluate(&net, &self.data.val)?;
            Ok((net.annotated_graph(), acc))
        });
        match outcome {
            Ok((graph, acc)) => Evaluation { graph, fitness: acc.fitness(), accuracy: Some(acc), failure: None },
            Err(e) => Evaluation { graph: g.clone(), fitness: 0.0, accuracy: None, failure: Some(e.to_string()) },
        }
    }
}
