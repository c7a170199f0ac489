//! Multi-scale convolutional text features: filters of several window
//! widths slide over the token rows; each filter's feature map is
//! max-pooled and the pooled values concatenate into one fixed-width vector
//! regardless of sentence length.
//!
//! Run with: `cargo run --example multi_scale_cnn`

use seqlab::encoders::{cnn_feature_map, multi_scale_cnn_encode, CnnFilterBank};
use seqlab::rng::Prng;
use seqlab::tensor::{Activation, Tape, Tensor};

fn main() -> seqlab::Result<()> {
    let mut rng = Prng::seed_from_u64(17);
    let d = 6;
    let bank = CnnFilterBank::init(&mut rng, d, &[(1, 4), (2, 4), (3, 2)], Activation::Tanh)?;
    println!(
        "bank: widths {:?}, pooled output width {}",
        bank.kernels.iter().map(|k| k.width).collect::<Vec<_>>(),
        bank.output_width()
    );

    for n in [3, 5, 9] {
        let seq =
            Tensor::new((0..n * d).map(|_| rng.uniform(-1.0, 1.0)).collect(), &[n, d])?;
        let tape = Tape::new();
        let fm = cnn_feature_map(&tape, &seq, &bank.kernels[1], bank.activation)?;
        let pooled = multi_scale_cnn_encode(&tape, &seq, &bank)?;
        println!(
            "n = {n}: width-2 feature map {:?} ({} windows), pooled {:?}",
            fm.shape(),
            n - 1,
            pooled.shape()
        );
    }

    // a window shorter than the widest kernel is a hard error
    let short = Tensor::new(vec![0.0; 2 * d], &[2, d])?;
    let tape = Tape::new();
    match multi_scale_cnn_encode(&tape, &short, &bank) {
        Err(e) => println!("2-token input: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
