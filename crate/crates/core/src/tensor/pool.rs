use super::tape::{Backward, Grads, Tape, Var};
use super::Tensor;
use crate::error::{Error, Result};

struct ArgBack {
    x: Var,
    /// Source index of every output element.
    argmax: Vec<usize>,
}

impl Backward for ArgBack {
    fn backward(&self, gy: &Tensor, tape: &Tape, grads: &mut Grads) {
        if !grads.needs(self.x) {
            return;
        }
        let shape = tape.value(self.x).shape().to_vec();
        let dx = grads.slot(self.x, &shape);
        for (&src, &g) in self.argmax.iter().zip(gy.data()) {
            dx[src] += g;
        }
    }
}

struct MeanBack {
    x: Var,
    /// Output index of every input element.
    target: Vec<usize>,
    scale: f64,
}

impl Backward for MeanBack {
    fn backward(&self, gy: &Tensor, tape: &Tape, grads: &mut Grads) {
        if !grads.needs(self.x) {
            return;
        }
        let shape = tape.value(self.x).shape().to_vec();
        let dx = grads.slot(self.x, &shape);
        for (d, &o) in dx.iter_mut().zip(&self.target) {
            *d += gy.data()[o] * self.scale;
        }
    }
}

/// Maps every element of `shape` to its index after dropping `axes`.
fn reduced_index(shape: &[usize], axes: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let out_shape: Vec<usize> =
        shape.iter().enumerate().filter(|(i, _)| !axes.contains(i)).map(|(_, &s)| s).collect();
    let n: usize = shape.iter().product();
    let mut target = Vec::with_capacity(n);
    let mut idx = vec![0usize; shape.len()];
    for _ in 0..n {
        let mut o = 0;
        for (ax, &i) in idx.iter().enumerate() {
            if !axes.contains(&ax) {
                o = o * shape[ax] + i;
            }
        }
        target.push(o);
        for ax in (0..shape.len()).rev() {
            idx[ax] += 1;
            if idx[ax] < shape[ax] {
                break;
            }
            idx[ax] = 0;
        }
    }
    (out_shape, target)
}

impl Tape {
    /// Spatial max pooling over Y and X of `[B,T,Y,X,C]`; output size
    /// `ceil(n / stride)`, windows clipped at the borders.
    pub fn max_pool_spatial(&mut self, x: Var, window: usize, stride: usize) -> Result<Var> {
        let [b, t, y, xw, c] = self.value(x).dims5("max_pool_spatial")?;
        if window == 0 || stride == 0 {
            return Err(Error::arg("max_pool_spatial", "window and stride must be positive"));
        }
        let yo = y.div_ceil(stride);
        let xo = xw.div_ceil(stride);
        let pad_y = ((yo - 1) * stride + window).saturating_sub(y) / 2;
        let pad_x = ((xo - 1) * stride + window).saturating_sub(xw) / 2;
        let xd = self.value(x).data();
        let mut out = Vec::with_capacity(b * t * yo * xo * c);
        let mut argmax = Vec::with_capacity(out.capacity());
        for fr in 0..b * t {
            for oy in 0..yo {
                for ox in 0..xo {
                    for ch in 0..c {
                        let mut best = f64::NEG_INFINITY;
                        let mut at = usize::MAX;
                        for ky in 0..window {
                            let iy = (oy * stride + ky) as isize - pad_y as isize;
                            if iy < 0 || iy >= y as isize {
                                continue;
                            }
                            for kx in 0..window {
                                let ix = (ox * stride + kx) as isize - pad_x as isize;
                                if ix < 0 || ix >= xw as isize {
                                    continue;
                                }
                                let src = ((fr * y + iy as usize) * xw + ix as usize) * c + ch;
                                if xd[src] > best {
                                    best = xd[src];
                                    at = src;
                                }
                            }
                        }
                        out.push(best);
                        argmax.push(at);
                    }
                }
            }
        }
        let out = Tensor::new(vec![b, t, yo, xo, c], out)?.check_finite("max_pool_spatial")?;
        Ok(self.push(out, &[x], ArgBack { x, argmax }))
    }

    /// Mean over the listed axes, which are removed from the shape.
    pub fn avg_pool(&mut self, x: Var, axes: &[usize]) -> Result<Var> {
        let shape = self.value(x).shape().to_vec();
        if axes.is_empty() || axes.iter().any(|&a| a >= shape.len()) {
            return Err(Error::arg("avg_pool", format!("axes {axes:?} for shape {shape:?}")));
        }
        let count: usize = axes.iter().map(|&a| shape[a]).product();
        if count == 0 {
            return Err(Error::shape("avg_pool", "pooling over an empty axis"));
        }
        let (out_shape, target) = reduced_index(&shape, axes);
        let mut out = vec![0.0; out_shape.iter().product()];
        for (&v, &o) in self.value(x).data().iter().zip(&target) {
            out[o] += v;
        }
        let scale = 1.0 / count as f64;
        out.iter_mut().for_each(|v| *v *= scale);
        let out = Tensor::new(out_shape, out)?.check_finite("avg_pool")?;
        Ok(self.push(out, &[x], MeanBack { x, target, scale }))
    }

    /// Max over one axis, which is removed from the shape.
    pub fn max_pool_axis(&mut self, x: Var, axis: usize) -> Result<Var> {
        let shape = self.value(x).shape().to_vec();
        if axis >= shape.len() || shape[axis] == 0 {
            return Err(Error::arg("max_pool_axis", format!("axis {axis} for shape {shape:?}")));
        }
        let (out_shape, target) = reduced_index(&shape, &[axis]);
        let n_out: usize = out_shape.iter().product();
        let mut out = vec![f64::NEG_INFINITY; n_out];
        let mut argmax = vec![usize::MAX; n_out];
        for (i, (&v, &o)) in self.value(x).data().iter().zip(&target).enumerate() {
            if v > out[o] {
                out[o] = v;
                argmax[o] = i;
            }
        }
        let out = Tensor::new(out_shape, out)?.check_finite("max_pool_axis")?;
        Ok(self.push(out, &[x], ArgBack { x, argmax }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stride_two_max_pool_halves() {
        let mut tape = Tape::new();
        let data: Vec<f64> = (0..16).map(|v| v as f64).collect();
        let x = tape.constant(Tensor::new(vec![1, 1, 4, 4, 1], data).unwrap());
        let y = tape.max_pool_spatial(x, 2, 2).unwrap();
        assert_eq!(tape.value(y).shape(), &[1, 1, 2, 2, 1]);
        assert_eq!(tape.value(y).data(), &[5.0, 7.0, 13.0, 15.0]);
    }

    #[test]
    fn spatial_then_temporal_mean() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::from_fn(&[2, 3, 2, 2, 1], |i| i as f64));
        let s = tape.avg_pool(x, &[2, 3]).unwrap();
        assert_eq!(tape.value(s).shape(), &[2, 3, 1]);
        assert_eq!(tape.value(s).data()[0], 1.5);
        let t = tape.avg_pool(s, &[1]).unwrap();
        assert_eq!(tape.value(t).shape(), &[2, 1]);
        assert_eq!(tape.value(t).data(), &[5.5, 17.5]);
    }

    #[test]
    fn temporal_max_equals_mean_on_constant_time() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::from_fn(&[2, 4, 3], |i| (i % 3) as f64 + 10.0 * (i / 12) as f64));
        let a = tape.avg_pool(x, &[1]).unwrap();
        let m = tape.max_pool_axis(x, 1).unwrap();
        assert_eq!(tape.value(a), tape.value(m));
    }
}
