use super::tape::{Backward, Grads, Tape, Var};
use super::Tensor;
use crate::error::{Error, Result};

pub const BN_EPS: f64 = 1e-5;
/// Smallest batch accepted in training mode.
pub const MIN_TRAIN_BATCH: usize = 8;

/// Per-channel statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl BatchStats {
    pub fn identity(channels: usize) -> Self {
        BatchStats { mean: vec![0.0; channels], var: vec![1.0; channels] }
    }

    /// `self = momentum * self + (1 - momentum) * batch`.
    pub fn update(&mut self, batch: &BatchStats, momentum: f64) {
        for (r, b) in self.mean.iter_mut().zip(&batch.mean) {
            *r = momentum * *r + (1.0 - momentum) * b;
        }
        for (r, b) in self.var.iter_mut().zip(&batch.var) {
            *r = momentum * *r + (1.0 - momentum) * b;
        }
    }
}

pub enum NormMode<'a> {
    /// Normalise with the statistics of the current batch.
    Train,
    /// Normalise with fixed running statistics.
    Eval(&'a BatchStats),
}

struct NormBack {
    x: Var,
    scale: Var,
    shift: Var,
    xhat: Vec<f64>,
    inv_std: Vec<f64>,
    batch_stats: bool,
}

impl Backward for NormBack {
    fn backward(&self, gy: &Tensor, tape: &Tape, grads: &mut Grads) {
        let c = self.inv_std.len();
        let m = gy.len() / c;
        let mut sum_g = vec![0.0; c];
        let mut sum_gx = vec![0.0; c];
        for (i, (&g, &xh)) in gy.data().iter().zip(&self.xhat).enumerate() {
            sum_g[i % c] += g;
            sum_gx[i % c] += g * xh;
        }
        if grads.needs(self.shift) {
            for (d, s) in grads.slot(self.shift, &[c]).iter_mut().zip(&sum_g) {
                *d += s;
            }
        }
        if grads.needs(self.scale) {
            for (d, s) in grads.slot(self.scale, &[c]).iter_mut().zip(&sum_gx) {
                *d += s;
            }
        }
        if grads.needs(self.x) {
            let gamma = tape.value(self.scale).data().to_vec();
            let shape = tape.value(self.x).shape().to_vec();
            let dx = grads.slot(self.x, &shape);
            let mf = m as f64;
            for (i, (d, &g)) in dx.iter_mut().zip(gy.data()).enumerate() {
                let ch = i % c;
                let k = gamma[ch] * self.inv_std[ch];
                *d += if self.batch_stats {
                    k * (g - sum_g[ch] / mf - self.xhat[i] * sum_gx[ch] / mf)
                } else {
                    k * g
                };
            }
        }
    }
}

impl Tape {
    /// Batch normalisation over every axis but the last. In training mode the
    /// batch statistics are returned so the caller can update running averages.
    pub fn batch_norm(&mut self, x: Var, scale: Var, shift: Var, mode: NormMode<'_>) -> Result<(Var, Option<BatchStats>)> {
        let shape = self.value(x).shape().to_vec();
        let c = *shape.last().ok_or_else(|| Error::shape("batch_norm", "scalar input"))?;
        if self.value(scale).shape() != [c] || self.value(shift).shape() != [c] {
            return Err(Error::shape("batch_norm", format!("scale/shift must be [{c}]")));
        }
        let m = self.value(x).len() / c.max(1);
        let xd = self.value(x).data();
        let (stats, batch_stats) = match mode {
            NormMode::Train => {
                if shape[0] < MIN_TRAIN_BATCH {
                    return Err(Error::arg(
                        "batch_norm",
                        format!("batch of {} is below the training minimum {MIN_TRAIN_BATCH}", shape[0]),
                    ));
                }
                let mut mean = vec![0.0; c];
                for (i, &v) in xd.iter().enumerate() {
                    mean[i % c] += v;
                }
                mean.iter_mut().for_each(|v| *v /= m as f64);
                let mut var = vec![0.0; c];
                for (i, &v) in xd.iter().enumerate() {
                    let d = v - mean[i % c];
                    var[i % c] += d * d;
                }
                var.iter_mut().for_each(|v| *v /= m as f64);
                (BatchStats { mean, var }, true)
            }
            NormMode::Eval(s) => {
                if s.mean.len() != c || s.var.len() != c {
                    return Err(Error::shape("batch_norm", "running statistics width"));
                }
                (s.clone(), false)
            }
        };
        let inv_std: Vec<f64> = stats.var.iter().map(|v| 1.0 / (v + BN_EPS).sqrt()).collect();
        let gamma = self.value(scale).data();
        let beta = self.value(shift).data();
        let mut xhat = Vec::with_capacity(xd.len());
        let mut out = Vec::with_capacity(xd.len());
        for (i, &v) in xd.iter().enumerate() {
            let ch = i % c;
            let h = (v - stats.mean[ch]) * inv_std[ch];
            xhat.push(h);
            out.push(gamma[ch] * h + beta[ch]);
        }
        let out = Tensor::new(shape, out)?.check_finite("batch_norm")?;
        let var = self.push(out, &[x, scale, shift], NormBack { x, scale, shift, xhat, inv_std, batch_stats });
        Ok((var, batch_stats.then_some(stats)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn training_output_is_standardised() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::from_fn(&[8, 3], |i| (i * i % 7) as f64 + (i % 3) as f64 * 5.0));
        let g = tape.constant(Tensor::full(&[3], 1.0));
        let b = tape.constant(Tensor::zeros(&[3]));
        let (y, stats) = tape.batch_norm(x, g, b, NormMode::Train).unwrap();
        assert!(stats.is_some());
        let yd = tape.value(y).data();
        for ch in 0..3 {
            let col: Vec<f64> = (0..8).map(|r| yd[r * 3 + ch]).collect();
            let mean: f64 = col.iter().sum::<f64>() / 8.0;
            let var: f64 = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 8.0;
            assert!(mean.abs() < 1e-12);
            assert!((var - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn small_training_batch_is_rejected() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::zeros(&[4, 2]));
        let g = tape.constant(Tensor::full(&[2], 1.0));
        let b = tape.constant(Tensor::zeros(&[2]));
        assert!(tape.batch_norm(x, g, b, NormMode::Train).is_err());
        let stats = BatchStats::identity(2);
        assert!(tape.batch_norm(x, g, b, NormMode::Eval(&stats)).is_ok());
    }

    #[test]
    fn running_update_uses_momentum() {
        let mut r = BatchStats::identity(1);
        r.update(&BatchStats { mean: vec![1.0], var: vec![3.0] }, 0.99);
        assert!((r.mean[0] - 0.01).abs() < 1e-15);
        assert!((r.var[0] - 1.02).abs() < 1e-15);
    }
}
