//! Soft-gated head aggregation: instead of concatenating heads, each head's
//! projected output is scaled by a trainable sigmoid gate and summed. A
//! saturated gate reduces the block to a single head; training moves the
//! gates to reflect head usefulness.
//!
//! Run with: `cargo run --example gated_heads`

use seqlab::attention::{multi_head_gated, HeadGates, HeadParams};
use seqlab::rng::Prng;
use seqlab::tensor::{sgd_step, xavier_init, Tape, Tensor};

fn main() -> seqlab::Result<()> {
    let mut rng = Prng::seed_from_u64(11);
    let (n, d, dk, num_heads) = (5, 8, 4, 3);
    let x = Tensor::new((0..n * d).map(|_| rng.uniform(-1.0, 1.0)).collect(), &[n, d])?;
    let heads: Vec<HeadParams> =
        (0..num_heads).map(|_| HeadParams::init(&mut rng, d, dk)).collect();
    let projs: Vec<Tensor> = (0..num_heads).map(|_| xavier_init(&mut rng, dk, d)).collect();

    // neutral gates: every head contributes with weight 0.5
    let gates = HeadGates::init(num_heads);
    println!("initial effective gates: {:?}", gates.effective_values());
    let tape = Tape::new();
    let out = multi_head_gated(&tape, &x, &heads, &gates, &projs)?;
    println!("output shape: {:?}", out.shape());

    // saturate gate 1: the block collapses to head 1 alone
    let selected = HeadGates::from_raw(vec![-40.0, 40.0, -40.0]);
    let tape = Tape::new();
    let gated = multi_head_gated(&tape, &x, &heads, &selected, &projs)?;
    let q = tape.matmul(&x, &heads[1].w_q)?;
    let k = tape.matmul(&x, &heads[1].w_k)?;
    let v = tape.matmul(&x, &heads[1].w_v)?;
    let single = tape.matmul(
        &seqlab::attention::scaled_dot_attention(&tape, &q, &k, &v)?,
        &projs[1],
    )?;
    let max_diff = gated
        .to_vec()
        .iter()
        .zip(single.to_vec())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max)
        ;
    println!("saturated gate vs single head: max |diff| = {max_diff:.2e}");

    // gates are trainable: push the output toward zero and watch them close
    let gates = HeadGates::init(num_heads);
    for step in 0..100 {
        let tape = Tape::new();
        let out = multi_head_gated(&tape, &x, &heads, &gates, &projs)?;
        let sq = tape.mul(&out, &out)?;
        let loss = tape.mean_all(&sq);
        if step % 25 == 0 {
            println!(
                "step {step:>3}: loss {:.5}, gates {:?}",
                loss.entry(0),
                gates
                    .effective_values()
                    .iter()
                    .map(|g| format!("{g:.3}"))
                    .collect::<Vec<_>>()
            );
        }
        tape.backward(&loss)?;
        sgd_step(gates.raw(), 2.0)?;
    }
    println!("final gates: {:?}", gates.effective_values());
    Ok(())
}
