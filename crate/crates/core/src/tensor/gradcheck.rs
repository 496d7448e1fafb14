//! Finite-difference verification of reverse-mode gradients.

use super::{Tape, Tensor, Var};
use crate::error::Result;

/// Gradients below this magnitude are compared absolutely.
pub const RELATIVE_FLOOR: f64 = 1e-3;

/// Compares reverse-mode gradients of `op` against central differences with
/// step `perturbation`, for every element of every input. The output is reduced
/// to a scalar by a fixed weighting so all output elements contribute.
///
/// Returns the largest `|analytic - numeric| / max(|analytic|, |numeric|, RELATIVE_FLOOR)`.
pub fn grad_check<F>(op: F, inputs: &[Tensor], perturbation: f64) -> Result<f64>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let eval = |values: &[Tensor]| -> Result<(Tape, Var, Vec<Var>)> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = values.iter().map(|t| tape.leaf(t.clone(), true)).collect();
        let out = op(&mut tape, &vars)?;
        let shape = tape.value(out).shape().to_vec();
        let weights = Tensor::from_fn(&shape, |i| 0.5 + ((i as f64 + 1.0) * 0.618_033_988_75).fract());
        let scalar = tape.dot_const(out, weights)?;
        Ok((tape, scalar, vars))
    };

    let (tape, root, vars) = eval(inputs)?;
    let grads = tape.backward(root);
    let mut worst: f64 = 0.0;
    let mut values = inputs.to_vec();
    for (slot, var) in vars.iter().enumerate() {
        let analytic = grads.get(*var).cloned().unwrap_or_else(|| Tensor::zeros(inputs[slot].shape()));
        for i in 0..inputs[slot].len() {
            let orig = values[slot].data()[i];
            values[slot].data_mut()[i] = orig + perturbation;
            let (t, r, _) = eval(&values)?;
            let plus = t.value(r).data()[0];
            values[slot].data_mut()[i] = orig - perturbation;
            let (t, r, _) = eval(&values)?;
            let minus = t.value(r).data()[0];
            values[slot].data_mut()[i] = orig;
            let numeric = (plus - minus) / (2.0 * perturbation);
            let a = analytic.data()[i];
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(RELATIVE_FLOOR);
            worst = worst.max(err);
        }
    }
    Ok(worst)
}
