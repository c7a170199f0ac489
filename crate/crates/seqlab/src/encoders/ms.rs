//! Major/surrounding sentence encoding: the two segments are encoded
//! separately with single-layer self-attention encoders, aligned by an
//! elementwise product of their mean-pooled vectors, and merged through a
//! trainable sigmoid gate.

use crate::attention::{Aggregation, EncoderLayer, MultiHeadConfig};
use crate::encoders::MsSegmentation;
use crate::error::Result;
use crate::rng::Prng;
use crate::tensor::{gather_rows, mean_rows, Activation, Tape, Tensor};

#[derive(Debug, Clone)]
pub struct MsEncoderParams {
    pub major_encoder: EncoderLayer,
    pub surround_encoder: EncoderLayer,
    /// Raw gate; the effective mixing weight is its sigmoid.
    pub gate_raw: Tensor,
}

impl MsEncoderParams {
    pub fn init(
        rng: &mut Prng,
        d_model: usize,
        num_heads: usize,
        d_k: usize,
        d_ffn: usize,
    ) -> Result<MsEncoderParams> {
        let cfg = MultiHeadConfig {
            num_heads,
            d_model,
            d_k,
            aggregation: Aggregation::Concat,
            roles: None,
        };
        Ok(MsEncoderParams {
            major_encoder: EncoderLayer::init(rng, &cfg, d_ffn, Activation::Tanh)?,
            surround_encoder: EncoderLayer::init(rng, &cfg, d_ffn, Activation::Tanh)?,
            gate_raw: Tensor::param(vec![0.0], &[1]).expect("gate"),
        })
    }

    pub fn params(&self, out: &mut Vec<(String, Tensor)>, prefix: &str) {
        self.major_encoder.params(out, &format!("{prefix}.major"));
        self.surround_encoder.params(out, &format!("{prefix}.surround"));
        out.push((format!("{prefix}.gate"), self.gate_raw.clone()));
    }
}

/// Encode a segmented sentence into a single `[1 × d]` vector:
/// `g * major + (1 - g) * surround + major ⊙ surround`, where each segment
/// vector is the mean-pooled output of its own encoder. An empty
/// surrounding segment contributes a zero vector and forces the alignment
/// term to zero.
pub fn ms_encode(
    tape: &Tape,
    sequence: &Tensor,
    seg: &MsSegmentation,
    params: &MsEncoderParams,
) -> Result<Tensor> {
    let (n, d) = sequence.dims2("ms_encode")?;
    seg.validate(n)?;

    let encode_segment = |enc: &EncoderLayer, idx: &[usize]| -> Result<Tensor> {
        let rows: Vec<usize> = idx.iter().map(|&i| i - 1).collect();
        let segment = gather_rows(tape, sequence, &rows)?;
        let hidden = enc.forward(tape, &segment, None)?;
        mean_rows(tape, &hidden)
    };

    let major_vec = encode_segment(&params.major_encoder, &seg.major)?;
    let gate = tape.sigmoid(&params.gate_raw);
    let inverse_gate = tape.sub(&Tensor::scalar(1.0), &gate)?;

    let (surround_vec, alignment) = if seg.surrounding.is_empty() {
        (Tensor::zeros(&[1, d])?, Tensor::zeros(&[1, d])?)
    } else {
        let v = encode_segment(&params.surround_encoder, &seg.surrounding)?;
        let align = tape.mul(&major_vec, &v)?;
        (v, align)
    };

    let gated_major = tape.scale_by(&major_vec, &gate)?;
    let gated_surround = tape.scale_by(&surround_vec, &inverse_gate)?;
    tape.add(&tape.add(&gated_major, &gated_surround)?, &alignment)
}
