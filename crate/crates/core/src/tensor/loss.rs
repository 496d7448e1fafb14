use super::gemm::{gemm, Mat};
use super::tape::{Backward, Grads, Tape, Var};
use super::Tensor;
use crate::error::{Error, Result};

/// Row-wise softmax of a `[B, K]` tensor.
pub fn softmax_rows(logits: &Tensor) -> Tensor {
    let k = *logits.shape().last().unwrap_or(&1);
    let mut out = logits.clone();
    for row in out.data_mut().chunks_mut(k.max(1)) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        row.iter_mut().for_each(|v| *v /= sum);
    }
    out
}

struct LinearBack {
    x: Var,
    w: Var,
    b: Var,
}

impl Backward for LinearBack {
    fn backward(&self, gy: &Tensor, tape: &Tape, grads: &mut Grads) {
        let xv = tape.value(self.x);
        let wv = tape.value(self.w);
        let (rows, f) = (xv.shape()[0], xv.shape()[1]);
        let k = wv.shape()[1];
        if grads.needs(self.w) {
            let dw = grads.slot(self.w, &[f, k]);
            gemm(Mat::rm(xv.data(), rows, f).t(), Mat::rm(gy.data(), rows, k), 1.0, dw);
        }
        if grads.needs(self.b) {
            let db = grads.slot(self.b, &[k]);
            for row in gy.data().chunks(k) {
                for (d, g) in db.iter_mut().zip(row) {
                    *d += g;
                }
            }
        }
        if grads.needs(self.x) {
            let dx = grads.slot(self.x, &[rows, f]);
            gemm(Mat::rm(gy.data(), rows, k), Mat::rm(wv.data(), f, k).t(), 1.0, dx);
        }
    }
}

struct CrossEntropyBack {
    logits: Var,
    /// (softmax - target) / B
    delta: Vec<f64>,
}

impl Backward for CrossEntropyBack {
    fn backward(&self, gy: &Tensor, tape: &Tape, grads: &mut Grads) {
        if grads.needs(self.logits) {
            let shape = tape.value(self.logits).shape().to_vec();
            let g = gy.data()[0];
            for (d, v) in grads.slot(self.logits, &shape).iter_mut().zip(&self.delta) {
                *d += g * v;
            }
        }
    }
}

impl Tape {
    /// `x W + b` for `x: [B, F]`, `W: [F, K]`, `b: [K]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (rows, f) = match self.value(x).shape() {
            &[r, f] => (r, f),
            s => return Err(Error::shape("linear", format!("input must be [B,F], got {s:?}"))),
        };
        let k = match self.value(w).shape() {
            &[wf, k] if wf == f => k,
            s => return Err(Error::shape("linear", format!("weights {s:?} for {f} features"))),
        };
        if self.value(b).shape() != [k] {
            return Err(Error::shape("linear", "bias width"));
        }
        let mut out = vec![0.0; rows * k];
        for row in out.chunks_mut(k) {
            row.copy_from_slice(self.value(b).data());
        }
        gemm(Mat::rm(self.value(x).data(), rows, f), Mat::rm(self.value(w).data(), f, k), 1.0, &mut out);
        let out = Tensor::new(vec![rows, k], out)?.check_finite("linear")?;
        Ok(self.push(out, &[x, w, b], LinearBack { x, w, b }))
    }

    /// Mean label-smoothed cross-entropy of `[B, K]` logits. The target of row
    /// `i` is `(1 - s) * onehot(labels[i]) + s / K`.
    pub fn softmax_cross_entropy(&mut self, logits: Var, labels: &[usize], smoothing: f64) -> Result<Var> {
        let (rows, k) = match self.value(logits).shape() {
            &[r, k] => (r, k),
            s => return Err(Error::shape("softmax_cross_entropy", format!("logits must be [B,K], got {s:?}"))),
        };
        if labels.len() != rows {
            return Err(Error::shape("softmax_cross_entropy", format!("{} labels for {rows} rows", labels.len())));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::arg("softmax_cross_entropy", format!("label {bad} out of range for {k} classes")));
        }
        if !(0.0..1.0).contains(&smoothing) {
            return Err(Error::arg("softmax_cross_entropy", format!("smoothing {smoothing} not in [0,1)")));
        }
        let probs = softmax_rows(self.value(logits));
        let mut loss = 0.0;
        let mut delta = vec![0.0; rows * k];
        for (i, &label) in labels.iter().enumerate() {
            let row = &self.value(logits).data()[i * k..(i + 1) * k];
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            for c in 0..k {
                let target = smoothing / k as f64 + if c == label { 1.0 - smoothing } else { 0.0 };
                loss -= target * (row[c] - lse);
                delta[i * k + c] = (probs.data()[i * k + c] - target) / rows as f64;
            }
        }
        let out = Tensor::scalar(loss / rows as f64).check_finite("softmax_cross_entropy")?;
        Ok(self.push(out, &[logits], CrossEntropyBack { logits, delta }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_give_ln_k() {
        let mut tape = Tape::new();
        let z = tape.constant(Tensor::zeros(&[3, 7]));
        let l = tape.softmax_cross_entropy(z, &[0, 3, 6], 0.0).unwrap();
        assert!((tape.value(l).data()[0] - 7f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn confident_correct_logits_give_zero_loss() {
        let mut tape = Tape::new();
        let z = tape.constant(Tensor::new(vec![2, 3], vec![500.0, 0.0, 0.0, 0.0, 0.0, 500.0]).unwrap());
        let l = tape.softmax_cross_entropy(z, &[0, 2], 0.0).unwrap();
        assert!(tape.value(l).data()[0].abs() < 1e-12);
    }

    #[test]
    fn out_of_range_label_errors() {
        let mut tape = Tape::new();
        let z = tape.constant(Tensor::zeros(&[1, 3]));
        assert!(tape.softmax_cross_entropy(z, &[3], 0.0).is_err());
        assert!(tape.softmax_cross_entropy(z, &[0], 1.0).is_err());
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let t = Tensor::new(vec![2, 3], vec![1.0, 2.0, 3.0, -5.0, 0.0, 5.0]).unwrap();
        for row in softmax_rows(&t).data().chunks(3) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
