//! The major/surrounding encoder: a sentence is split by dependency roles,
//! each segment is encoded by its own single-layer self-attention encoder,
//! and the two mean-pooled vectors merge through a multiplicative alignment
//! and a trainable gate.
//!
//! Run with: `cargo run --example ms_encoder`

use seqlab::encoders::{ms_encode, parse_conll, segment_sentence, MsEncoderParams, DEFAULT_CORE_ROLES};
use seqlab::rng::Prng;
use seqlab::tensor::{Tape, Tensor};

fn main() -> seqlab::Result<()> {
    let conll = "\
1\tto\tPART\t4\tmark
2\this\tPRON\t3\tnmod
3\twife\tNOUN\t4\tiobj
4\tgave\tVERB\t0\troot
5\tjim\tPROPN\t4\tnsubj
6\ta\tDET\t7\tdet
7\tpresent\tNOUN\t4\tobj
";
    let tree = &parse_conll(conll)?[0];
    let seg = segment_sentence(tree, &DEFAULT_CORE_ROLES);
    println!("major: {:?}, surrounding: {:?}", seg.major, seg.surrounding);

    let d = 8;
    let mut rng = Prng::seed_from_u64(23);
    let params = MsEncoderParams::init(&mut rng, d, 2, 4, 16)?;
    let seq = Tensor::new(
        (0..tree.len() * d).map(|_| rng.uniform(-1.0, 1.0)).collect(),
        &[tree.len(), d],
    )?;

    let tape = Tape::new();
    let joint = ms_encode(&tape, &seq, &seg, &params)?;
    println!("joint representation ({:?}):", joint.shape());
    println!("  {:?}", joint.to_vec().iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>());
    println!("effective gate: {:.4}", 1.0 / (1.0 + (-params.gate_raw.entry(0)).exp()));

    // gradients flow through segments, alignment, and the gate
    let loss = tape.sum_all(&tape.mul(&joint, &joint)?);
    tape.backward(&loss)?;
    println!("gate gradient: {:?}", params.gate_raw.grad());
    Ok(())
}
