//! The tensor core in one sitting: build a tape, run ops, pull gradients,
//! and fit a tiny linear regression with plain SGD.
//!
//! Run with: `cargo run --example autograd_basics`

use seqlab::rng::Prng;
use seqlab::tensor::{sgd_step, Tape, Tensor};

fn main() -> seqlab::Result<()> {
    // forward + backward on a small expression
    let x = Tensor::param(vec![1.0, -2.0, 0.5], &[3])?;
    let tape = Tape::new();
    let squared = tape.mul(&x, &x)?;
    let loss = tape.sum_all(&squared);
    println!("sum(x^2) = {}", loss.entry(0));
    tape.backward(&loss)?;
    println!("d/dx sum(x^2) = {:?} (expect 2x)", x.grad().unwrap());
    x.clear_grad();

    // softmax treats -inf as "excluded"
    let scores = Tensor::new(vec![1.0, f64::NEG_INFINITY, 0.0], &[3])?;
    let tape = Tape::new();
    let probs = tape.softmax(&scores, 0)?;
    println!("softmax([1, -inf, 0]) = {:?}", probs.to_vec());

    // fit y = 2x - 1 from noisy points
    let mut rng = Prng::seed_from_u64(3);
    let xs: Vec<f64> = (0..32).map(|_| rng.uniform(-1.0, 1.0)).collect();
    let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x - 1.0 + 0.01 * rng.uniform(-1.0, 1.0)).collect();
    let inputs = Tensor::new(xs, &[32, 1])?;
    let targets = Tensor::new(ys, &[32, 1])?;
    let weight = Tensor::param(vec![0.0], &[1, 1])?;
    let bias = Tensor::param(vec![0.0], &[1])?;

    for step in 0..200 {
        let tape = Tape::new();
        let scaled = tape.matmul(&inputs, &weight)?;
        let bias_col = tape.reshape(&bias, &[1, 1])?;
        let bias_rows = seqlab::tensor::broadcast_row(&tape, &bias_col, 32)?;
        let predicted = tape.add(&scaled, &bias_rows)?;
        let residual = tape.sub(&predicted, &targets)?;
        let sq = tape.mul(&residual, &residual)?;
        let loss = tape.mean_all(&sq);
        if step % 50 == 0 {
            println!("step {step:>3}: mse {:.6}", loss.entry(0));
        }
        tape.backward(&loss)?;
        sgd_step(&[weight.clone(), bias.clone()], 0.5)?;
    }
    println!("fitted weight {:.4} (expect ~2), bias {:.4} (expect ~-1)", weight.entry(0), bias.entry(0));
    Ok(())
}
