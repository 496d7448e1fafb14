// Reverse-mode gradients of a small gated block, checked by finite differences.

use msnas::tensor::{grad_check, Tape, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn run_example() -> anyhow::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let x = Tensor::randn(&[1, 4, 3, 3, 2], 1.0, &mut rng);
    let spatial = Tensor::randn(&[3, 3, 2, 3], 0.5, &mut rng);
    let temporal = Tensor::randn(&[3, 3, 3], 0.5, &mut rng);
    let other = Tensor::randn(&[1, 4, 3, 3, 3], 1.0, &mut rng);
    let inputs = [x, spatial, temporal, other, Tensor::scalar(0.3), Tensor::scalar(-1.2)];

    let block = |tape: &mut Tape, v: &[msnas::tensor::Var]| {
        let h = tape.conv2d(v[0], v[1], 1)?;
        let h = tape.temporal_conv(h, v[2], 2, 1)?;
        tape.gated_weighted_sum(&[h, v[3]], &[v[4], v[5]])
    };
    let err = grad_check(block, &inputs, 1e-5)?;
    println!("conv2d -> dilated temporal conv -> gated sum: max relative error {err:.2e}");

    let mut tape = Tape::new();
    let vars: Vec<_> = inputs.iter().map(|t| tape.leaf(t.clone(), true)).collect();
    let out = block(&mut tape, &vars)?;
    let pooled = tape.avg_pool(out, &[1, 2, 3])?;
    let loss = tape.dot_const(pooled, Tensor::full(&[1, 3], 1.0))?;
    let grads = tape.backward(loss);
    for (name, v) in ["gate a", "gate b"].iter().zip(&vars[4..]) {
        println!("d loss / d {name} = {:+.4}", grads.get(*v).unwrap().data()[0]);
    }
    assert!(err < 1e-4);
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
