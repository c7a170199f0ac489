//! Structural block relation representation: each entity's block is encoded
//! with a multi-scale CNN; the final vector concatenates both block vectors,
//! the block-minus-entities subtractions, and the product of the raw entity
//! means.

use crate::encoders::{multi_scale_cnn_encode, BlockSet, CnnFilterBank};
use crate::error::{Error, Result};
use crate::rng::Prng;
use crate::tensor::{gather_rows, mean_rows, xavier_init, Tape, Tensor};

#[derive(Debug, Clone)]
pub struct BlockRelationParams {
    pub bank: CnnFilterBank,
    /// Projects a raw `[1 × d]` entity mean to the CNN output width so the
    /// subtraction terms are well-typed.
    pub entity_proj: Tensor,
}

impl BlockRelationParams {
    pub fn init(
        rng: &mut Prng,
        d: usize,
        sizes: &[(usize, usize)],
        activation: crate::tensor::Activation,
    ) -> Result<BlockRelationParams> {
        let bank = CnnFilterBank::init(rng, d, sizes, activation)?;
        let entity_proj = xavier_init(rng, d, bank.output_width());
        Ok(BlockRelationParams { bank, entity_proj })
    }

    /// Width of the final representation: two block vectors, two
    /// subtraction vectors, one entity product.
    pub fn output_width(&self, d: usize) -> usize {
        4 * self.bank.output_width() + d
    }

    pub fn params(&self, out: &mut Vec<(String, Tensor)>, prefix: &str) {
        self.bank.params(out, &format!("{prefix}.cnn"));
        out.push((format!("{prefix}.entity_proj"), self.entity_proj.clone()));
    }
}

/// Encode one block's rows, right-padding with zero rows up to the widest
/// kernel so short blocks stay convolvable.
fn encode_block(
    tape: &Tape,
    enriched: &Tensor,
    block: &[usize],
    params: &BlockRelationParams,
) -> Result<Tensor> {
    if block.is_empty() {
        return Err(Error::Contract("empty structural block".to_string()));
    }
    let (_, d) = enriched.dims2("block_relation_repr")?;
    let rows: Vec<usize> = block.iter().map(|&i| i - 1).collect();
    let mut segment = gather_rows(tape, enriched, &rows)?;
    let h_max = params.bank.max_kernel_width();
    if block.len() < h_max {
        let pad = Tensor::zeros(&[h_max - block.len(), d])?;
        segment = tape.concat(&[segment, pad], 0)?;
    }
    let pooled = multi_scale_cnn_encode(tape, &segment, &params.bank)?;
    tape.reshape(&pooled, &[1, params.bank.output_width()])
}

/// Relation representation over a tag-enriched token matrix `[n × d]`:
/// `concat(b1, b2, b1 - e1 - e2, b2 - e1 - e2, e1raw ⊙ e2raw)` as `[1 × w]`,
/// ready for a linear classifier.
pub fn block_relation_repr(
    tape: &Tape,
    enriched: &Tensor,
    blocks: &BlockSet,
    params: &BlockRelationParams,
) -> Result<Tensor> {
    let (n, _) = enriched.dims2("block_relation_repr")?;
    for &i in blocks.e1_block.iter().chain(&blocks.e2_block) {
        if i == 0 || i > n {
            return Err(Error::Contract(format!(
                "block token {i} out of range for {n} rows"
            )));
        }
    }
    let b1 = encode_block(tape, enriched, &blocks.e1_block, params)?;
    let b2 = encode_block(tape, enriched, &blocks.e2_block, params)?;

    let entity_mean = |span: &crate::encoders::Span| -> Result<Tensor> {
        let rows: Vec<usize> = span.indices().map(|i| i - 1).collect();
        let picked = gather_rows(tape, enriched, &rows)?;
        mean_rows(tape, &picked)
    };
    let e1_raw = entity_mean(&blocks.e1_span)?;
    let e2_raw = entity_mean(&blocks.e2_span)?;
    let e1 = tape.matmul(&e1_raw, &params.entity_proj)?;
    let e2 = tape.matmul(&e2_raw, &params.entity_proj)?;

    let sub1 = tape.sub(&tape.sub(&b1, &e1)?, &e2)?;
    let sub2 = tape.sub(&tape.sub(&b2, &e1)?, &e2)?;
    let product = tape.mul(&e1_raw, &e2_raw)?;

    tape.concat(&[b1, b2, sub1, sub2, product], 1)
}
