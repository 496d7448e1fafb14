use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::ClipSet;
use crate::error::{Error, Result};
use crate::graph::NodeId;
use crate::net::{Batch, ExecutableNetwork, Param, ParamKind};
use crate::tensor::{BatchStats, Tape, Tensor};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainerConfig {
    pub iterations: usize,
    pub batch_size: usize,
    pub base_lr: f64,
    /// Linear warmup length as a fraction of `iterations`.
    pub warmup_fraction: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub label_smoothing: f64,
    pub seed: u64,
    /// After the last step, batch-norm running statistics are replaced by the
    /// average over this many training batches (0 keeps the running averages).
    #[serde(default)]
    pub calibration_batches: usize,
    /// Learning-rate multiplier for edge gate logits.
    #[serde(default = "one")]
    pub gate_lr_scale: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            iterations: 300,
            batch_size: 8,
            base_lr: 0.05,
            warmup_fraction: 0.05,
            momentum: 0.9,
            weight_decay: 1e-4,
            label_smoothing: 0.2,
            seed: 0,
            calibration_batches: 0,
            gate_lr_scale: 1.0,
        }
    }
}

impl TrainerConfig {
    pub fn warmup(&self) -> usize {
        (self.iterations as f64 * self.warmup_fraction).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(format!("trainer: {msg}")));
        if !(0.0..=1.0).contains(&self.warmup_fraction) {
            return bad("warmup_fraction must lie in [0, 1]");
        }
        if self.batch_size < crate::tensor::MIN_TRAIN_BATCH {
            return bad(&format!("batch_size must be at least {}", crate::tensor::MIN_TRAIN_BATCH));
        }
        if !(self.base_lr >= 0.0) || !(0.0..1.0).contains(&self.momentum) || !(self.weight_decay >= 0.0) {
            return bad("learning rate, momentum and weight decay must be non-negative (momentum < 1)");
        }
        if !(0.0..1.0).contains(&self.label_smoothing) {
            return bad("label_smoothing must lie in [0, 1)");
        }
        Ok(())
    }
}

/// Linear warmup from 0 to `base_lr`, then cosine decay to 0 at `iterations`.
pub fn lr_schedule(step: usize, cfg: &TrainerConfig) -> f64 {
    let warmup = cfg.warmup();
    if step >= cfg.iterations {
        return 0.0;
    }
    if step < warmup {
        return cfg.base_lr * step as f64 / warmup as f64;
    }
    let span = (cfg.iterations - warmup).max(1) as f64;
    let progress = (step - warmup) as f64 / span;
    0.5 * cfg.base_lr * (1.0 + (PI * progress).cos())
}

/// Momentum SGD with decoupled velocity: `v = mu v + g + lambda w`, `w -= lr v`.
#[derive(Clone, Debug, Default)]
pub struct Sgd {
    velocity: Vec<Vec<f64>>,
}

impl Sgd {
    /// One update; `gate_lr_scale` multiplies the step of edge logits.
    pub fn step(&mut self, params: &mut [Param], grads: &[Option<Tensor>], lr: f64, momentum: f64, weight_decay: f64, gate_lr_scale: f64) {
        if self.velocity.len() != params.len() {
            self.velocity = params.iter().map(|p| vec![0.0; p.value.len()]).collect();
        }
        for ((p, g), v) in params.iter_mut().zip(grads).zip(&mut self.velocity) {
            let decay = if p.kind.decays() { weight_decay } else { 0.0 };
            let lr = if p.kind == ParamKind::EdgeLogit { lr * gate_lr_scale } else { lr };
            let w = p.value.data_mut();
            for i in 0..w.len() {
                let gi = g.as_ref().map_or(0.0, |g| g.data()[i]);
                v[i] = momentum * v[i] + gi + decay * w[i];
                w[i] -= lr * v[i];
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    /// Loss of every step.
    pub losses: Vec<f64>,
    /// Gate logits after training.
    pub logits: BTreeMap<(NodeId, NodeId), f64>,
}

impl TrainReport {
    pub fn final_loss(&self) -> Option<f64> {
        self.losses.last().copied()
    }
}

fn abort(step: usize, e: Error) -> Error {
    match e {
        Error::NonFinite { op } => Error::TrainingAborted { step, detail: format!("non-finite value in {op}") },
        other => Error::TrainingAborted { step, detail: other.to_string() },
    }
}

/// Trains `net` in place on `data`.
pub fn train(net: &mut ExecutableNetwork, data: &ClipSet, cfg: &TrainerConfig) -> Result<TrainReport> {
    cfg.validate()?;
    if data.len() < cfg.batch_size && cfg.iterations > 0 {
        return Err(Error::Config(format!("{} training clips for batch size {}", data.len(), cfg.batch_size)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut cursor = order.len();
    let mut sgd = Sgd::default();
    let mut losses = Vec::with_capacity(cfg.iterations);
    for step in 0..cfg.iterations {
        if cursor + cfg.batch_size > order.len() {
            order.shuffle(&mut rng);
            cursor = 0;
        }
        let (a, m, labels) = data.batch(&order[cursor..cursor + cfg.batch_size]);
        cursor += cfg.batch_size;
        let mut tape = Tape::new();
        let f = net.forward(&mut tape, Batch { appearance: &a, motion: &m }, true).map_err(|e| abort(step, e))?;
        let loss = tape.softmax_cross_entropy(f.logits, &labels, cfg.label_smoothing).map_err(|e| abort(step, e))?;
        let value = tape.value(loss).data()[0];
        if !value.is_finite() {
            return Err(Error::TrainingAborted { step, detail: format!("loss is {value}") });
        }
        losses.push(value);
        let mut grads = tape.backward(loss);
        let grads: Vec<Option<Tensor>> = f.params.iter().map(|&v| grads.take(v)).collect();
        sgd.step(net.params_mut(), &grads, lr_schedule(step, cfg), cfg.momentum, cfg.weight_decay, cfg.gate_lr_scale);
        net.update_running_stats(&f.batch_stats);
        if net.params().iter().any(|p| !p.value.is_finite()) {
            return Err(Error::TrainingAborted { step, detail: "parameters diverged".into() });
        }
    }
    if cfg.calibration_batches > 0 && cfg.iterations > 0 {
        calibrate_norms(net, data, cfg.batch_size, cfg.calibration_batches, &mut rng)?;
    }
    Ok(TrainReport { losses, logits: net.edge_logits() })
}

/// Sets every running statistic to the mean of `batches` training-mode batch statistics.
fn calibrate_norms(net: &mut ExecutableNetwork, data: &ClipSet, batch_size: usize, batches: usize, rng: &mut ChaCha8Rng) -> Result<()> {
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut sums: Option<Vec<BatchStats>> = None;
    for i in 0..batches {
        let start = (i * batch_size) % order.len();
        if start == 0 {
            order.shuffle(rng);
        }
        let idx: Vec<usize> = (0..batch_size).map(|k| order[(start + k) % order.len()]).collect();
        let (a, m, _) = data.batch(&idx);
        let mut tape = Tape::new();
        let f = net.forward(&mut tape, Batch { appearance: &a, motion: &m }, true)?;
        let stats: Vec<BatchStats> = f.batch_stats.into_iter().map(|s| s.expect("training mode yields statistics")).collect();
        match &mut sums {
            None => sums = Some(stats),
            Some(acc) => {
                for (a, s) in acc.iter_mut().zip(&stats) {
                    a.mean.iter_mut().zip(&s.mean).for_each(|(x, y)| *x += y);
                    a.var.iter_mut().zip(&s.var).for_each(|(x, y)| *x += y);
                }
            }
        }
    }
    let scale = 1.0 / batches as f64;
    let mut stats = sums.unwrap_or_default();
    for s in &mut stats {
        s.mean.iter_mut().chain(s.var.iter_mut()).for_each(|v| *v *= scale);
    }
    net.set_running_stats(stats);
    Ok(())
}

/// Top-1 and top-5 fractions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Accuracy {
    pub top1: f64,
    pub top5: f64,
}

impl Accuracy {
    pub fn fitness(&self) -> f64 {
        self.top1 + self.top5
    }
}

/// Top-1 and top-5 hit rates of `[N, K]` class scores.
pub fn accuracy_of(scores: &Tensor, labels: &[usize]) -> Accuracy {
    let k = scores.shape()[1];
    let (mut top1, mut top5) = (0usize, 0usize);
    for (row, &label) in scores.data().chunks(k).zip(labels) {
        // rank = number of classes scored strictly higher, ties resolved toward lower index
        let rank = row.iter().enumerate().filter(|&(c, &s)| s > row[label] || (s == row[label] && c < label)).count();
        top1 += (rank == 0) as usize;
        top5 += (rank < 5) as usize;
    }
    let n = labels.len().max(1) as f64;
    Accuracy { top1: top1 as f64 / n, top5: top5 as f64 / n }
}

/// Evaluates with running batch-norm statistics.
pub fn evaluate(net: &ExecutableNetwork, data: &ClipSet) -> Result<Accuracy> {
    const CHUNK: usize = 32;
    let mut scores = Vec::new();
    let indices: Vec<usize> = (0..data.len()).collect();
    for chunk in indices.chunks(CHUNK) {
        let (a, m, _) = data.batch(chunk);
        scores.extend(net.predict(Batch { appearance: &a, motion: &m })?.into_data());
    }
    let k = net.config().head.num_classes;
    let scores = Tensor::new(vec![data.len(), k], scores)?;
    Ok(accuracy_of(&scores, &data.labels))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_endpoints() {
        let cfg = TrainerConfig { iterations: 100, warmup_fraction: 0.1, base_lr: 0.4, ..TrainerConfig::default() };
        assert_eq!(lr_schedule(0, &cfg), 0.0);
        assert!((lr_schedule(10, &cfg) - 0.4).abs() < 1e-15);
        assert!((lr_schedule(5, &cfg) - 0.2).abs() < 1e-15);
        assert_eq!(lr_schedule(100, &cfg), 0.0);
        assert!(lr_schedule(99, &cfg) < 1e-3);
        let mid = lr_schedule(55, &cfg);
        assert!((mid - 0.2).abs() < 1e-12, "{mid}");
    }

    #[test]
    fn accuracy_counts_ranks() {
        let s = Tensor::new(vec![2, 6], vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 5.0, 4.0, 3.0, 2.0, 1.0, 0.0]).unwrap();
        let a = accuracy_of(&s, &[5, 5]);
        assert_eq!(a, Accuracy { top1: 0.5, top5: 0.5 });
        let a = accuracy_of(&s, &[1, 0]);
        assert_eq!(a, Accuracy { top1: 0.5, top5: 1.0 });
    }
}
