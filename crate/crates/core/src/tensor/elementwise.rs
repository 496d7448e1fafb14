use super::tape::{Backward, Grads, Tape, Var};
use super::Tensor;
use crate::error::{Error, Result};
use crate::graph::sigmoid;

struct AddBack {
    inputs: Vec<Var>,
}

impl Backward for AddBack {
    fn backward(&self, gy: &Tensor, _tape: &Tape, grads: &mut Grads) {
        for &v in &self.inputs {
            if grads.needs(v) {
                for (d, g) in grads.slot(v, gy.shape()).iter_mut().zip(gy.data()) {
                    *d += g;
                }
            }
        }
    }
}

struct ReluBack {
    x: Var,
}

impl Backward for ReluBack {
    fn backward(&self, gy: &Tensor, tape: &Tape, grads: &mut Grads) {
        if !grads.needs(self.x) {
            return;
        }
        let xv = tape.value(self.x).data().to_vec();
        for ((d, g), x) in grads.slot(self.x, gy.shape()).iter_mut().zip(gy.data()).zip(xv) {
            if x > 0.0 {
                *d += g;
            }
        }
    }
}

struct GateBack {
    inputs: Vec<Var>,
    logits: Vec<Var>,
    gates: Vec<f64>,
}

impl Backward for GateBack {
    fn backward(&self, gy: &Tensor, tape: &Tape, grads: &mut Grads) {
        for ((&x, &w), &gate) in self.inputs.iter().zip(&self.logits).zip(&self.gates) {
            if grads.needs(w) {
                let dot: f64 = tape.value(x).data().iter().zip(gy.data()).map(|(a, b)| a * b).sum();
                grads.slot(w, &[1])[0] += dot * gate * (1.0 - gate);
            }
            if grads.needs(x) {
                for (d, g) in grads.slot(x, gy.shape()).iter_mut().zip(gy.data()) {
                    *d += gate * g;
                }
            }
        }
    }
}

struct ConcatBack {
    inputs: Vec<(Var, usize, usize)>,
    total: usize,
}

impl Backward for ConcatBack {
    fn backward(&self, gy: &Tensor, tape: &Tape, grads: &mut Grads) {
        let rows = gy.len() / self.total;
        for &(v, offset, width) in &self.inputs {
            if !grads.needs(v) {
                continue;
            }
            let shape = tape.value(v).shape().to_vec();
            let d = grads.slot(v, &shape);
            for r in 0..rows {
                for c in 0..width {
                    d[r * width + c] += gy.data()[r * self.total + offset + c];
                }
            }
        }
    }
}

struct DotBack {
    x: Var,
    weights: Tensor,
}

impl Backward for DotBack {
    fn backward(&self, gy: &Tensor, tape: &Tape, grads: &mut Grads) {
        if grads.needs(self.x) {
            let shape = tape.value(self.x).shape().to_vec();
            let g = gy.data()[0];
            for (d, w) in grads.slot(self.x, &shape).iter_mut().zip(self.weights.data()) {
                *d += g * w;
            }
        }
    }
}

struct ScaleBack {
    x: Var,
    factor: f64,
}

impl Backward for ScaleBack {
    fn backward(&self, gy: &Tensor, _tape: &Tape, grads: &mut Grads) {
        if grads.needs(self.x) {
            for (d, g) in grads.slot(self.x, gy.shape()).iter_mut().zip(gy.data()) {
                *d += self.factor * g;
            }
        }
    }
}

impl Tape {
    /// Element-wise sum of same-shaped tensors.
    pub fn add(&mut self, inputs: &[Var]) -> Result<Var> {
        let first = inputs.first().ok_or_else(|| Error::arg("add", "no inputs"))?;
        let shape = self.value(*first).shape().to_vec();
        let mut out = vec![0.0; self.value(*first).len()];
        for &v in inputs {
            if self.value(v).shape() != shape.as_slice() {
                return Err(Error::shape("add", format!("{:?} vs {shape:?}", self.value(v).shape())));
            }
            for (o, x) in out.iter_mut().zip(self.value(v).data()) {
                *o += x;
            }
        }
        let out = Tensor::new(shape, out)?.check_finite("add")?;
        Ok(self.push(out, inputs, AddBack { inputs: inputs.to_vec() }))
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        let v = self.value(x);
        let out = Tensor::new(v.shape().to_vec(), v.data().iter().map(|&a| a.max(0.0)).collect())?;
        Ok(self.push(out, &[x], ReluBack { x }))
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Result<Var> {
        let v = self.value(x);
        let out = Tensor::new(v.shape().to_vec(), v.data().iter().map(|&a| a * factor).collect())?
            .check_finite("scale")?;
        Ok(self.push(out, &[x], ScaleBack { x, factor }))
    }

    /// `sum_i sigmoid(w_i) * F_i` with one-element logit tensors `w_i`.
    pub fn gated_weighted_sum(&mut self, inputs: &[Var], logits: &[Var]) -> Result<Var> {
        let first = *inputs.first().ok_or_else(|| Error::arg("gated_weighted_sum", "empty input list"))?;
        if inputs.len() != logits.len() {
            return Err(Error::arg("gated_weighted_sum", format!("{} inputs but {} logits", inputs.len(), logits.len())));
        }
        let shape = self.value(first).shape().to_vec();
        let mut out = vec![0.0; self.value(first).len()];
        let mut gates = Vec::with_capacity(inputs.len());
        for (&x, &w) in inputs.iter().zip(logits) {
            if self.value(x).shape() != shape.as_slice() {
                return Err(Error::shape("gated_weighted_sum", format!("{:?} vs {shape:?}", self.value(x).shape())));
            }
            let wv = self.value(w);
            if wv.len() != 1 {
                return Err(Error::shape("gated_weighted_sum", "logits must be scalars"));
            }
            let gate = sigmoid(wv.data()[0]);
            for (o, a) in out.iter_mut().zip(self.value(x).data()) {
                *o += gate * a;
            }
            gates.push(gate);
        }
        let out = Tensor::new(shape, out)?.check_finite("gated_weighted_sum")?;
        let deps: Vec<Var> = inputs.iter().chain(logits).copied().collect();
        Ok(self.push(out, &deps, GateBack { inputs: inputs.to_vec(), logits: logits.to_vec(), gates }))
    }

    /// Concatenates along the last axis; leading axes must agree.
    pub fn concat_channels(&mut self, inputs: &[Var]) -> Result<Var> {
        let first = *inputs.first().ok_or_else(|| Error::arg("concat_channels", "no inputs"))?;
        let lead = self.value(first).shape()[..self.value(first).shape().len() - 1].to_vec();
        let mut parts = Vec::new();
        let mut total = 0;
        for &v in inputs {
            let s = self.value(v).shape();
            if s[..s.len() - 1] != lead[..] {
                return Err(Error::shape("concat_channels", format!("{s:?} vs leading {lead:?}")));
            }
            let w = *s.last().unwrap();
            parts.push((v, total, w));
            total += w;
        }
        let rows: usize = lead.iter().product();
        let mut out = vec![0.0; rows * total];
        for &(v, offset, w) in &parts {
            let d = self.value(v).data();
            for r in 0..rows {
                out[r * total + offset..r * total + offset + w].copy_from_slice(&d[r * w..(r + 1) * w]);
            }
        }
        let mut shape = lead;
        shape.push(total);
        let out = Tensor::new(shape, out)?;
        Ok(self.push(out, inputs, ConcatBack { inputs: parts, total }))
    }

    /// Zero-pads the last axis to `width`.
    pub fn pad_channels(&mut self, x: Var, width: usize) -> Result<Var> {
        let s = self.value(x).shape().to_vec();
        let c = *s.last().ok_or_else(|| Error::shape("pad_channels", "scalar input"))?;
        if width < c {
            return Err(Error::shape("pad_channels", format!("cannot pad {c} channels down to {width}")));
        }
        if width == c {
            return Ok(x);
        }
        let rows = self.value(x).len() / c;
        let mut out = vec![0.0; rows * width];
        let d = self.value(x).data();
        for r in 0..rows {
            out[r * width..r * width + c].copy_from_slice(&d[r * c..(r + 1) * c]);
        }
        let mut shape = s;
        *shape.last_mut().unwrap() = width;
        let out = Tensor::new(shape, out)?;
        Ok(self.push(out, &[x], ConcatBack { inputs: vec![(x, 0, c)], total: width }))
    }

    /// Scalar `sum(x * weights)` for a constant weight tensor.
    pub fn dot_const(&mut self, x: Var, weights: Tensor) -> Result<Var> {
        if self.value(x).shape() != weights.shape() {
            return Err(Error::shape("dot_const", "weights must match x"));
        }
        let s: f64 = self.value(x).data().iter().zip(weights.data()).map(|(a, b)| a * b).sum();
        let out = Tensor::scalar(s).check_finite("dot_const")?;
        Ok(self.push(out, &[x], DotBack { x, weights }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_logit_halves_single_input() {
        let mut tape = Tape::new();
        let f = tape.constant(Tensor::new(vec![3], vec![2.0, -4.0, 6.0]).unwrap());
        let w = tape.constant(Tensor::scalar(0.0));
        let y = tape.gated_weighted_sum(&[f], &[w]).unwrap();
        assert_eq!(tape.value(y).data(), &[1.0, -2.0, 3.0]);
    }

    #[test]
    fn saturated_gates_pass_one_input() {
        let mut tape = Tape::new();
        let data = Tensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let a = tape.constant(data.clone());
        let b = tape.constant(data.clone());
        let wa = tape.constant(Tensor::scalar(20.0));
        let wb = tape.constant(Tensor::scalar(-20.0));
        let y = tape.gated_weighted_sum(&[a, b], &[wa, wb]).unwrap();
        assert!(tape.value(y).max_abs_diff(&data) < 1e-8);
    }

    #[test]
    fn gated_sum_rejects_bad_inputs() {
        let mut tape = Tape::new();
        assert!(tape.gated_weighted_sum(&[], &[]).is_err());
        let a = tape.constant(Tensor::zeros(&[2]));
        let b = tape.constant(Tensor::zeros(&[3]));
        let w = tape.constant(Tensor::scalar(0.0));
        assert!(tape.gated_weighted_sum(&[a, b], &[w, w]).is_err());
        assert!(tape.gated_weighted_sum(&[a], &[w, w]).is_err());
    }

    #[test]
    fn relu_of_negative_is_zero() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::new(vec![3], vec![-1.0, -0.5, 2.0]).unwrap());
        let y = tape.relu(x).unwrap();
        assert_eq!(tape.value(y).data(), &[0.0, 0.0, 2.0]);
    }

    #[test]
    fn concat_and_pad() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::new(vec![2, 1], vec![1.0, 2.0]).unwrap());
        let b = tape.constant(Tensor::new(vec![2, 2], vec![3.0, 4.0, 5.0, 6.0]).unwrap());
        let c = tape.concat_channels(&[a, b]).unwrap();
        assert_eq!(tape.value(c).data(), &[1.0, 3.0, 4.0, 2.0, 5.0, 6.0]);
        let p = tape.pad_channels(a, 3).unwrap();
        assert_eq!(tape.value(p).data(), &[1.0, 0.0, 0.0, 2.0, 0.0, 0.0]);
    }
}
