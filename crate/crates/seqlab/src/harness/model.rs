//! The model zoo behind the CLI: classifier models over every encoder kind,
//! and a minimal encoder-decoder for toy sequence transduction.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::attention::{
    build_role_mask, multi_head_cross, parse_role, Aggregation, EncoderLayer, FeedForward,
    HeadParams, MultiHeadConfig, Role, RoleMask,
};
use crate::encoders::{
    block_relation_repr, extract_blocks, ms_encode, multi_scale_cnn_encode, rnn_encode,
    segment_sentence, BlockRelationParams, CnnFilterBank, DependencyTree, MsEncoderParams,
    RnnCell, DEFAULT_CORE_ROLES,
};
use crate::error::{Error, Result};
use crate::rng::Prng;
use crate::tensor::{gather_rows, one_hot_rows, xavier_init, Tape, Tensor};

use super::config::{ExperimentConfig, ModelKind, ModelSettings, TaskKind};
use super::data::{LabeledDataset, Sample, Vocab};

// ───────────────────────── building blocks ─────────────────────────

#[derive(Debug, Clone)]
pub struct Linear {
    pub w: Tensor,
    pub b: Tensor,
}

impl Linear {
    pub fn init(rng: &mut Prng, d_in: usize, d_out: usize) -> Linear {
        Linear {
            w: xavier_init(rng, d_in, d_out),
            b: Tensor::param(vec![0.0; d_out], &[1, d_out]).expect("bias"),
        }
    }

    /// `x` must be a single `[1 × d_in]` row.
    pub fn forward(&self, tape: &Tape, x: &Tensor) -> Result<Tensor> {
        tape.add(&tape.matmul(x, &self.w)?, &self.b)
    }

    pub fn params(&self, out: &mut Vec<(String, Tensor)>, prefix: &str) {
        out.push((format!("{prefix}.w"), self.w.clone()));
        out.push((format!("{prefix}.b"), self.b.clone()));
    }
}

#[derive(Debug, Clone)]
pub struct Embedding {
    pub table: Tensor,
}

impl Embedding {
    pub fn init(rng: &mut Prng, vocab: usize, dim: usize) -> Embedding {
        Embedding { table: xavier_init(rng, vocab, dim) }
    }

    pub fn lookup(&self, tape: &Tape, ids: &[usize]) -> Result<Tensor> {
        let (v, _) = self.table.dims2("embedding")?;
        let onehot = one_hot_rows(ids, v)?;
        tape.matmul(&onehot, &self.table)
    }
}

// ───────────────────────── classifier model ─────────────────────────

/// Encoder-specific parameters inside a classifier.
#[derive(Debug, Clone)]
pub enum EncoderKind {
    Rnn(RnnCell),
    Cnn(CnnFilterBank),
    Transformer { layers: Vec<EncoderLayer>, use_positions: bool },
    Ms(Box<MsEncoderParams>),
    Block {
        params: BlockRelationParams,
        deprel_embed: Embedding,
        pos_embed: Embedding,
        deprel_vocab: Vocab,
        pos_vocab: Vocab,
    },
}

#[derive(Debug, Clone)]
pub struct ClassifierModel {
    pub settings: ModelSettings,
    pub task: TaskKind,
    pub roles: Option<Vec<Role>>,
    pub vocab: Vocab,
    pub labels: Vec<String>,
    pub embed: Embedding,
    pub encoder: EncoderKind,
    pub head: Linear,
}

impl ClassifierModel {
    fn feature_width(settings: &ModelSettings, encoder: &EncoderKind) -> usize {
        match encoder {
            EncoderKind::Rnn(_) => settings.d_model,
            EncoderKind::Cnn(bank) => bank.output_width(),
            EncoderKind::Transformer { .. } => settings.d_model,
            EncoderKind::Ms(_) => settings.d_model,
            EncoderKind::Block { params, .. } => {
                params.output_width(settings.d_model + 2 * settings.tag_dim)
            }
        }
    }

    fn label_id(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    /// Encode one token sequence into a `[1 × feature]` row.
    fn encode_text(
        &self,
        tape: &Tape,
        tokens: &[String],
        tree: Option<&DependencyTree>,
    ) -> Result<Tensor> {
        if tokens.is_empty() {
            return Err(Error::Contract("cannot encode an empty token sequence".to_string()));
        }
        let ids = self.vocab.ids(tokens);
        let x = self.embed.lookup(tape, &ids)?;
        match &self.encoder {
            EncoderKind::Rnn(cell) => {
                let states = rnn_encode(tape, cell, &x, None)?;
                gather_rows(tape, &states, &[tokens.len() - 1])
            }
            EncoderKind::Cnn(bank) => {
                let n = tokens.len();
                let h_max = bank.max_kernel_width();
                let padded = if n < h_max {
                    let pad = Tensor::zeros(&[h_max - n, self.settings.d_model])?;
                    tape.concat(&[x, pad], 0)?
                } else {
                    x
                };
                let pooled = multi_scale_cnn_encode(tape, &padded, bank)?;
                tape.reshape(&pooled, &[1, bank.output_width()])
            }
            EncoderKind::Transformer { layers, use_positions } => {
                let mut h = if *use_positions {
                    let pe = crate::attention::sinusoidal_positions(
                        tokens.len(),
                        self.settings.d_model,
                    )?;
                    tape.add(&x, &pe)?
                } else {
                    x
                };
                for layer in layers {
                    h = layer.forward(tape, &h, tree)?;
                }
                let (pooled, _) = tape.max_over_axis(&h, 0)?;
                tape.reshape(&pooled, &[1, self.settings.d_model])
            }
            EncoderKind::Ms(params) => {
                let tree = tree.ok_or_else(|| {
                    Error::Contract("ms_encoder needs a dependency tree per sample".to_string())
                })?;
                let seg = segment_sentence(tree, &DEFAULT_CORE_ROLES);
                ms_encode(tape, &x, &seg, params)
            }
            EncoderKind::Block { .. } => Err(Error::Contract(
                "block_relation encodes (text, entities), not bare text".to_string(),
            )),
        }
    }

    fn relation_features(&self, tape: &Tape, sample: &Sample) -> Result<Tensor> {
        let EncoderKind::Block { params, deprel_embed, pos_embed, deprel_vocab, pos_vocab } =
            &self.encoder
        else {
            return Err(Error::Contract(
                "relation samples need the block_relation model".to_string(),
            ));
        };
        let tree = sample.tree.as_ref().ok_or_else(|| {
            Error::Contract("relation sample is missing its dependency tree".to_string())
        })?;
        let (e1, e2) = match (sample.e1, sample.e2) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                return Err(Error::Contract(
                    "relation sample is missing entity spans".to_string(),
                ))
            }
        };
        let word_ids = self.vocab.ids(&sample.tokens);
        let words = self.embed.lookup(tape, &word_ids)?;
        let deprel_ids = deprel_vocab.ids(tree.deprels());
        let deprels = deprel_embed.lookup(tape, &deprel_ids)?;
        let pos_ids = pos_vocab.ids(tree.pos());
        let tags = pos_embed.lookup(tape, &pos_ids)?;
        let enriched = tape.concat(&[words, deprels, tags], 1)?;
        let blocks = extract_blocks(tree, e1, e2)?;
        block_relation_repr(tape, &enriched, &blocks, params)
    }

    /// Unnormalized class scores for one sample: `[1 × labels]`.
    pub fn logits(&self, tape: &Tape, sample: &Sample) -> Result<Tensor> {
        let features = match self.task {
            TaskKind::Classification => {
                self.encode_text(tape, &sample.tokens, sample.tree.as_ref())?
            }
            TaskKind::PairInference => {
                let t2 = sample.tokens2.as_ref().ok_or_else(|| {
                    Error::Contract("pair sample is missing its second text".to_string())
                })?;
                let u = self.encode_text(tape, &sample.tokens, None)?;
                let v = self.encode_text(tape, t2, None)?;
                let prod = tape.mul(&u, &v)?;
                tape.concat(&[u, v, prod], 1)?
            }
            TaskKind::Relation => self.relation_features(tape, sample)?,
            _ => {
                return Err(Error::Contract(format!(
                    "classifier cannot handle task {:?}",
                    self.task
                )))
            }
        };
        self.head.forward(tape, &features)
    }

    /// Cross-entropy of the sample's label under the model.
    pub fn sample_loss(&self, tape: &Tape, sample: &Sample) -> Result<Tensor> {
        let label = sample.label.as_deref().ok_or_else(|| {
            Error::Contract("training sample has no label".to_string())
        })?;
        let target = self.label_id(label)?;
        let logits = self.logits(tape, sample)?;
        tape.cross_entropy_logits(&logits, &[target])
    }

    /// Predicted label (argmax, first index on ties) on a throwaway tape.
    pub fn predict(&self, sample: &Sample) -> Result<String> {
        let tape = Tape::new();
        let logits = self.logits(&tape, sample)?;
        let scores = logits.to_vec();
        let mut best = 0;
        for (i, &s) in scores.iter().enumerate() {
            if s > scores[best] {
                best = i;
            }
        }
        Ok(self.labels[best].clone())
    }

    pub fn params(&self) -> Vec<(String, Tensor)> {
        let mut out = vec![("embedding".to_string(), self.embed.table.clone())];
        match &self.encoder {
            EncoderKind::Rnn(cell) => cell.params(&mut out, "rnn"),
            EncoderKind::Cnn(bank) => bank.params(&mut out, "cnn"),
            EncoderKind::Transformer { layers, .. } => {
                for (i, layer) in layers.iter().enumerate() {
                    layer.params(&mut out, &format!("layer{i}"));
                }
            }
            EncoderKind::Ms(params) => params.params(&mut out, "ms"),
            EncoderKind::Block { params, deprel_embed, pos_embed, .. } => {
                params.params(&mut out, "block");
                out.push(("deprel_embedding".to_string(), deprel_embed.table.clone()));
                out.push(("pos_embedding".to_string(), pos_embed.table.clone()));
            }
        }
        self.head.params(&mut out, "classifier");
        out
    }
}

// ───────────────────────── seq2seq model ─────────────────────────

/// One decoder layer: causal self-attention, cross-attention over the
/// encoder output, and a feed-forward, all with residual adds.
#[derive(Debug, Clone)]
pub struct DecoderLayer {
    pub self_heads: Vec<HeadParams>,
    pub self_w_o: Tensor,
    pub cross_heads: Vec<HeadParams>,
    pub cross_w_o: Tensor,
    pub ffn: FeedForward,
}

impl DecoderLayer {
    fn init(rng: &mut Prng, settings: &ModelSettings) -> DecoderLayer {
        let (d, dk, h) = (settings.d_model, settings.d_k, settings.heads);
        DecoderLayer {
            self_heads: (0..h).map(|_| HeadParams::init(rng, d, dk)).collect(),
            self_w_o: xavier_init(rng, h * dk, d),
            cross_heads: (0..h).map(|_| HeadParams::init(rng, d, dk)).collect(),
            cross_w_o: xavier_init(rng, h * dk, d),
            ffn: FeedForward::init(rng, d, settings.d_ffn(), settings.activation),
        }
    }

    fn forward(&self, tape: &Tape, y: &Tensor, enc: &Tensor) -> Result<Tensor> {
        let (t, _) = y.dims2("decoder_layer")?;
        let causal: Vec<Option<RoleMask>> = (0..self.self_heads.len())
            .map(|_| Some(build_role_mask(Role::Forward, t, None).expect("causal mask")))
            .collect();
        let self_att = crate::attention::multi_head_concat(
            tape,
            y,
            &self.self_heads,
            Some(&causal),
            &self.self_w_o,
        )?;
        let h = tape.add(y, &self_att)?;
        let cross = multi_head_cross(tape, &h, enc, &self.cross_heads, &self.cross_w_o)?;
        let h2 = tape.add(&h, &cross)?;
        let ff = self.ffn.forward(tape, &h2)?;
        tape.add(&h2, &ff)
    }

    fn params(&self, out: &mut Vec<(String, Tensor)>, prefix: &str) {
        for (i, h) in self.self_heads.iter().enumerate() {
            h.params(out, &format!("{prefix}.self{i}"));
        }
        out.push((format!("{prefix}.self_w_o"), self.self_w_o.clone()));
        for (i, h) in self.cross_heads.iter().enumerate() {
            h.params(out, &format!("{prefix}.cross{i}"));
        }
        out.push((format!("{prefix}.cross_w_o"), self.cross_w_o.clone()));
        self.ffn.params(out, &format!("{prefix}.ffn"));
    }
}

#[derive(Debug, Clone)]
pub struct Seq2SeqModel {
    pub settings: ModelSettings,
    pub roles: Option<Vec<Role>>,
    pub vocab: Vocab,
    pub embed: Embedding,
    pub encoder: Vec<EncoderLayer>,
    pub decoder: Vec<DecoderLayer>,
    pub out: Linear,
    pub max_decode_len: usize,
}

impl Seq2SeqModel {
    fn encode(&self, tape: &Tape, src_ids: &[usize]) -> Result<Tensor> {
        let x = self.embed.lookup(tape, src_ids)?;
        let pe = crate::attention::sinusoidal_positions(src_ids.len(), self.settings.d_model)?;
        let mut h = tape.add(&x, &pe)?;
        for layer in &self.encoder {
            h = layer.forward(tape, &h, None)?;
        }
        Ok(h)
    }

    fn decode_states(&self, tape: &Tape, tgt_ids: &[usize], enc: &Tensor) -> Result<Tensor> {
        let y = self.embed.lookup(tape, tgt_ids)?;
        let pe = crate::attention::sinusoidal_positions(tgt_ids.len(), self.settings.d_model)?;
        let mut h = tape.add(&y, &pe)?;
        for layer in &self.decoder {
            h = layer.forward(tape, &h, enc)?;
        }
        Ok(h)
    }

    fn logits_over(&self, tape: &Tape, states: &Tensor) -> Result<Tensor> {
        let (t, _) = states.dims2("seq2seq logits")?;
        let scores = tape.matmul(states, &self.out.w)?;
        let bias = crate::tensor::broadcast_row(tape, &self.out.b, t)?;
        tape.add(&scores, &bias)
    }

    /// Teacher-forced per-token cross-entropy for one (source, target) pair.
    pub fn sample_loss(&self, tape: &Tape, sample: &Sample) -> Result<Tensor> {
        let target = sample.target.as_ref().ok_or_else(|| {
            Error::Contract("seq2seq sample has no target".to_string())
        })?;
        let src_ids = self.vocab.ids(&sample.tokens);
        let mut tgt_in = vec![self.vocab.bos_id()];
        tgt_in.extend(self.vocab.ids(target));
        let mut tgt_out = self.vocab.ids(target);
        tgt_out.push(self.vocab.eos_id());

        let enc = self.encode(tape, &src_ids)?;
        let states = self.decode_states(tape, &tgt_in, &enc)?;
        let logits = self.logits_over(tape, &states)?;
        tape.cross_entropy_logits(&logits, &tgt_out)
    }

    /// Greedy argmax decoding until `<eos>` or the length cap.
    pub fn greedy_decode(&self, source: &[String]) -> Result<Vec<String>> {
        let src_ids = self.vocab.ids(source);
        let max_len = self.max_decode_len.max(2 * source.len() + 2);
        let mut ids = vec![self.vocab.bos_id()];
        let mut out = Vec::new();
        for _ in 0..max_len {
            let tape = Tape::new();
            let enc = self.encode(&tape, &src_ids)?;
            let states = self.decode_states(&tape, &ids, &enc)?;
            let logits = self.logits_over(&tape, &states)?;
            let data = logits.to_vec();
            let v = self.vocab.len();
            let last = &data[(ids.len() - 1) * v..];
            let mut best = 0;
            for (i, &s) in last.iter().enumerate() {
                if s > last[best] {
                    best = i;
                }
            }
            if best == self.vocab.eos_id() {
                break;
            }
            ids.push(best);
            out.push(self.vocab.word(best).to_string());
        }
        Ok(out)
    }

    pub fn params(&self) -> Vec<(String, Tensor)> {
        let mut out = vec![("embedding".to_string(), self.embed.table.clone())];
        for (i, layer) in self.encoder.iter().enumerate() {
            layer.params(&mut out, &format!("enc{i}"));
        }
        for (i, layer) in self.decoder.iter().enumerate() {
            layer.params(&mut out, &format!("dec{i}"));
        }
        self.out.params(&mut out, "output");
        out
    }
}

// ───────────────────────── model facade ─────────────────────────

#[derive(Debug, Clone)]
pub enum Model {
    Classifier(ClassifierModel),
    Seq2Seq(Seq2SeqModel),
}

/// Resolve the per-head roles from inline strings or the assignment file.
pub fn resolve_roles(config: &ExperimentConfig) -> Result<Option<Vec<Role>>> {
    if let Some(strings) = &config.model.roles {
        return Ok(Some(strings.iter().map(|s| parse_role(s)).collect::<Result<_>>()?));
    }
    if let Some(path) = &config.model.role_assignment {
        let full = config.resolve_existing(path)?;
        return Ok(Some(crate::attention::load_role_assignments(&full)?));
    }
    Ok(None)
}

impl Model {
    /// Initialize a model for `task` with vocabularies drawn from the given
    /// datasets (all splits, so evaluation never meets an unknown token).
    pub fn build(
        settings: &ModelSettings,
        task: TaskKind,
        roles: Option<Vec<Role>>,
        datasets: &[&LabeledDataset],
        rng: &mut Prng,
    ) -> Result<Model> {
        settings.validate()?;
        if let Some(r) = &roles {
            if r.len() != settings.heads {
                return Err(Error::Contract(format!(
                    "{} roles for {} heads",
                    r.len(),
                    settings.heads
                )));
            }
        }
        if settings.kind == ModelKind::TransformerMasked && roles.is_none() {
            return Err(Error::Contract(
                "transformer_masked needs per-head roles (model.roles or role_assignment)"
                    .to_string(),
            ));
        }

        let mut tokens = Vec::new();
        let mut labels = BTreeSet::new();
        for ds in datasets {
            tokens.extend(ds.token_vocabulary());
            labels.extend(ds.labels.iter().cloned());
        }
        let vocab = Vocab::build(&tokens);
        let labels: Vec<String> = labels.into_iter().collect();

        if task == TaskKind::Seq2seqToy {
            return Ok(Model::Seq2Seq(Self::build_seq2seq(settings, roles, vocab, rng)?));
        }

        if labels.len() < 2 {
            return Err(Error::Contract(format!(
                "classification needs at least two labels, found {labels:?}"
            )));
        }

        let mha = |agg: Aggregation, roles: Option<Vec<Role>>| MultiHeadConfig {
            num_heads: settings.heads,
            d_model: settings.d_model,
            d_k: settings.d_k,
            aggregation: agg,
            roles,
        };
        let encoder = match settings.kind {
            ModelKind::Rnn => {
                EncoderKind::Rnn(RnnCell::init(rng, settings.d_model, settings.d_model, settings.activation))
            }
            ModelKind::CnnMultiscale => EncoderKind::Cnn(CnnFilterBank::init(
                rng,
                settings.d_model,
                &settings.kernel_pairs(),
                settings.activation,
            )?),
            ModelKind::TransformerConcat | ModelKind::TransformerMasked => {
                let cfg = mha(Aggregation::Concat, roles.clone());
                let layers = (0..settings.layers)
                    .map(|_| EncoderLayer::init(rng, &cfg, settings.d_ffn(), settings.activation))
                    .collect::<Result<_>>()?;
                EncoderKind::Transformer { layers, use_positions: settings.use_positions }
            }
            ModelKind::TransformerGated => {
                let cfg = mha(Aggregation::Gated, roles.clone());
                let layers = (0..settings.layers)
                    .map(|_| EncoderLayer::init(rng, &cfg, settings.d_ffn(), settings.activation))
                    .collect::<Result<_>>()?;
                EncoderKind::Transformer { layers, use_positions: settings.use_positions }
            }
            ModelKind::MsEncoder => {
                if task != TaskKind::Classification {
                    return Err(Error::Contract(
                        "ms_encoder supports the classification task".to_string(),
                    ));
                }
                EncoderKind::Ms(Box::new(MsEncoderParams::init(
                    rng,
                    settings.d_model,
                    settings.heads,
                    settings.d_k,
                    settings.d_ffn(),
                )?))
            }
            ModelKind::BlockRelation => {
                if task != TaskKind::Relation {
                    return Err(Error::Contract(
                        "block_relation requires the relation task".to_string(),
                    ));
                }
                let mut deprels = Vec::new();
                let mut pos = Vec::new();
                for ds in datasets {
                    for s in &ds.samples {
                        if let Some(tree) = &s.tree {
                            deprels.extend(tree.deprels().iter().cloned());
                            pos.extend(tree.pos().iter().cloned());
                        }
                    }
                }
                let deprel_vocab = Vocab::build(&deprels);
                let pos_vocab = Vocab::build(&pos);
                let enriched_dim = settings.d_model + 2 * settings.tag_dim;
                EncoderKind::Block {
                    params: BlockRelationParams::init(
                        rng,
                        enriched_dim,
                        &settings.kernel_pairs(),
                        settings.activation,
                    )?,
                    deprel_embed: Embedding::init(rng, deprel_vocab.len(), settings.tag_dim),
                    pos_embed: Embedding::init(rng, pos_vocab.len(), settings.tag_dim),
                    deprel_vocab,
                    pos_vocab,
                }
            }
        };
        if task == TaskKind::Relation && settings.kind != ModelKind::BlockRelation {
            return Err(Error::Contract(
                "the relation task requires the block_relation model".to_string(),
            ));
        }

        let feature_width = match task {
            TaskKind::PairInference => 3 * ClassifierModel::feature_width(settings, &encoder),
            _ => ClassifierModel::feature_width(settings, &encoder),
        };
        let head = Linear::init(rng, feature_width, labels.len());
        let embed = Embedding::init(rng, vocab.len(), settings.d_model);
        Ok(Model::Classifier(ClassifierModel {
            settings: settings.clone(),
            task,
            roles,
            vocab,
            labels,
            embed,
            encoder,
            head,
        }))
    }

    fn build_seq2seq(
        settings: &ModelSettings,
        roles: Option<Vec<Role>>,
        vocab: Vocab,
        rng: &mut Prng,
    ) -> Result<Seq2SeqModel> {
        let aggregation = match settings.kind {
            ModelKind::TransformerGated => Aggregation::Gated,
            ModelKind::TransformerConcat | ModelKind::TransformerMasked => Aggregation::Concat,
            other => {
                return Err(Error::Contract(format!(
                    "seq2seq_toy needs a transformer model, got {}",
                    other.name()
                )))
            }
        };
        let cfg = MultiHeadConfig {
            num_heads: settings.heads,
            d_model: settings.d_model,
            d_k: settings.d_k,
            aggregation,
            roles: roles.clone(),
        };
        let encoder = (0..settings.layers)
            .map(|_| EncoderLayer::init(rng, &cfg, settings.d_ffn(), settings.activation))
            .collect::<Result<_>>()?;
        let decoder = (0..settings.layers).map(|_| DecoderLayer::init(rng, settings)).collect();
        let out = Linear::init(rng, settings.d_model, vocab.len());
        let embed = Embedding::init(rng, vocab.len(), settings.d_model);
        Ok(Seq2SeqModel {
            settings: settings.clone(),
            roles,
            vocab,
            embed,
            encoder,
            decoder,
            out,
            max_decode_len: 0,
        })
    }

    pub fn params(&self) -> Vec<(String, Tensor)> {
        match self {
            Model::Classifier(m) => m.params(),
            Model::Seq2Seq(m) => m.params(),
        }
    }

    pub fn sample_loss(&self, tape: &Tape, sample: &Sample) -> Result<Tensor> {
        match self {
            Model::Classifier(m) => m.sample_loss(tape, sample),
            Model::Seq2Seq(m) => m.sample_loss(tape, sample),
        }
    }

    pub fn labels(&self) -> &[String] {
        match self {
            Model::Classifier(m) => &m.labels,
            Model::Seq2Seq(_) => &[],
        }
    }

    // ── persistence ──

    pub fn save(&self, path: &Path) -> Result<()> {
        let saved = SavedModel::from_model(self);
        let json = serde_json::to_string_pretty(&saved)?;
        fs::write(path, json + "\n").map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn load(path: &Path) -> Result<Model> {
        let text =
            fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let saved: SavedModel = serde_json::from_str(&text)?;
        saved.into_model()
    }
}

// ───────────────────────── serialization ─────────────────────────

#[derive(Serialize, Deserialize)]
struct SavedParam {
    name: String,
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct SavedModel {
    task: TaskKind,
    settings: ModelSettings,
    roles: Option<Vec<String>>,
    vocab: Vec<String>,
    labels: Vec<String>,
    deprel_vocab: Vec<String>,
    pos_vocab: Vec<String>,
    max_decode_len: usize,
    params: Vec<SavedParam>,
}

impl SavedModel {
    fn from_model(model: &Model) -> SavedModel {
        let (task, settings, roles, vocab, labels, deprel_vocab, pos_vocab, max_decode_len) =
            match model {
                Model::Classifier(m) => {
                    let (dv, pv) = match &m.encoder {
                        EncoderKind::Block { deprel_vocab, pos_vocab, .. } => {
                            (deprel_vocab.words().to_vec(), pos_vocab.words().to_vec())
                        }
                        _ => (Vec::new(), Vec::new()),
                    };
                    (m.task, m.settings.clone(), m.roles.clone(), m.vocab.words().to_vec(),
                     m.labels.clone(), dv, pv, 0)
                }
                Model::Seq2Seq(m) => (
                    TaskKind::Seq2seqToy,
                    m.settings.clone(),
                    m.roles.clone(),
                    m.vocab.words().to_vec(),
                    Vec::new(),
                    Vec::new(),
                    Vec::new(),
                    m.max_decode_len,
                ),
            };
        let params = model
            .params()
            .into_iter()
            .map(|(name, t)| SavedParam { name, shape: t.shape(), data: t.to_vec() })
            .collect();
        SavedModel {
            task,
            settings,
            roles: roles.map(|rs| rs.iter().map(|r| r.to_string()).collect()),
            vocab,
            labels,
            deprel_vocab,
            pos_vocab,
            max_decode_len,
            params,
        }
    }

    fn into_model(self) -> Result<Model> {
        let roles = match &self.roles {
            Some(strings) => {
                Some(strings.iter().map(|s| parse_role(s)).collect::<Result<Vec<Role>>>()?)
            }
            None => None,
        };
        // rebuild the parameter structure, then overwrite every tensor
        let mut rng = Prng::seed_from_u64(0);
        let mut model = match self.task {
            TaskKind::Seq2seqToy => {
                let mut m = Model::build_seq2seq(
                    &self.settings,
                    roles,
                    Vocab::from_words(self.vocab.clone()),
                    &mut rng,
                )?;
                m.max_decode_len = self.max_decode_len;
                Model::Seq2Seq(m)
            }
            task => {
                rebuild_classifier(&self.settings, task, roles, &self, &mut rng)?
            }
        };
        let named = model.params();
        if named.len() != self.params.len() {
            return Err(Error::Contract(format!(
                "saved model has {} parameter groups, rebuilt model has {}",
                self.params.len(),
                named.len()
            )));
        }
        for saved in &self.params {
            let tensor = named
                .iter()
                .find(|(n, _)| n == &saved.name)
                .map(|(_, t)| t)
                .ok_or_else(|| {
                    Error::Contract(format!("saved parameter '{}' not in model", saved.name))
                })?;
            if tensor.shape() != saved.shape {
                return Err(Error::Contract(format!(
                    "saved parameter '{}' has shape {:?}, model expects {:?}",
                    saved.name,
                    saved.shape,
                    tensor.shape()
                )));
            }
            tensor.set_data(saved.data.clone())?;
        }
        if let Model::Seq2Seq(m) = &mut model {
            m.max_decode_len = self.max_decode_len;
        }
        Ok(model)
    }
}

/// Rebuild a classifier skeleton with the saved vocabularies (dataset-free).
fn rebuild_classifier(
    settings: &ModelSettings,
    task: TaskKind,
    roles: Option<Vec<Role>>,
    saved: &SavedModel,
    rng: &mut Prng,
) -> Result<Model> {
    let vocab = Vocab::from_words(saved.vocab.clone());
    let labels = saved.labels.clone();
    if labels.len() < 2 {
        return Err(Error::Contract("saved classifier has fewer than two labels".to_string()));
    }
    let mha = |agg: Aggregation| MultiHeadConfig {
        num_heads: settings.heads,
        d_model: settings.d_model,
        d_k: settings.d_k,
        aggregation: agg,
        roles: roles.clone(),
    };
    let encoder = match settings.kind {
        ModelKind::Rnn => EncoderKind::Rnn(RnnCell::init(
            rng,
            settings.d_model,
            settings.d_model,
            settings.activation,
        )),
        ModelKind::CnnMultiscale => EncoderKind::Cnn(CnnFilterBank::init(
            rng,
            settings.d_model,
            &settings.kernel_pairs(),
            settings.activation,
        )?),
        ModelKind::TransformerConcat | ModelKind::TransformerMasked => {
            let cfg = mha(Aggregation::Concat);
            let layers = (0..settings.layers)
                .map(|_| EncoderLayer::init(rng, &cfg, settings.d_ffn(), settings.activation))
                .collect::<Result<_>>()?;
            EncoderKind::Transformer { layers, use_positions: settings.use_positions }
        }
        ModelKind::TransformerGated => {
            let cfg = mha(Aggregation::Gated);
            let layers = (0..settings.layers)
                .map(|_| EncoderLayer::init(rng, &cfg, settings.d_ffn(), settings.activation))
                .collect::<Result<_>>()?;
            EncoderKind::Transformer { layers, use_positions: settings.use_positions }
        }
        ModelKind::MsEncoder => EncoderKind::Ms(Box::new(MsEncoderParams::init(
            rng,
            settings.d_model,
            settings.heads,
            settings.d_k,
            settings.d_ffn(),
        )?)),
        ModelKind::BlockRelation => {
            let enriched_dim = settings.d_model + 2 * settings.tag_dim;
            let deprel_vocab = Vocab::from_words(saved.deprel_vocab.clone());
            let pos_vocab = Vocab::from_words(saved.pos_vocab.clone());
            EncoderKind::Block {
                params: BlockRelationParams::init(
                    rng,
                    enriched_dim,
                    &settings.kernel_pairs(),
                    settings.activation,
                )?,
                deprel_embed: Embedding::init(rng, deprel_vocab.len(), settings.tag_dim),
                pos_embed: Embedding::init(rng, pos_vocab.len(), settings.tag_dim),
                deprel_vocab,
                pos_vocab,
            }
        }
    };
    let feature_width = match task {
        TaskKind::PairInference => 3 * ClassifierModel::feature_width(settings, &encoder),
        _ => ClassifierModel::feature_width(settings, &encoder),
    };
    let head = Linear::init(rng, feature_width, labels.len());
    let embed = Embedding::init(rng, vocab.len(), settings.d_model);
    Ok(Model::Classifier(ClassifierModel {
        settings: settings.clone(),
        task,
        roles,
        vocab,
        labels,
        embed,
        encoder,
        head,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::data::LabeledDataset;

    fn settings(kind: ModelKind) -> ModelSettings {
        ModelSettings {
            kind,
            d_model: 8,
            d_k: 4,
            heads: 2,
            layers: 1,
            d_ffn: Some(12),
            kernel_sizes: vec![1, 2],
            filters: 3,
            roles: None,
            role_assignment: None,
            use_positions: true,
            tag_dim: 3,
            activation: crate::tensor::Activation::Tanh,
        }
    }

    fn tiny_classification() -> LabeledDataset {
        LabeledDataset::new(
            TaskKind::Classification,
            vec![
                Sample::classification(vec!["up".into(), "down".into()], "a"),
                Sample::classification(vec!["down".into(), "down".into()], "b"),
            ],
        )
        .unwrap()
    }

    #[test]
    fn gated_classifier_save_load_round_trip() {
        let dir = tempfile_dir("gated");
        let ds = tiny_classification();
        let mut rng = Prng::seed_from_u64(5);
        let model = Model::build(
            &settings(ModelKind::TransformerGated),
            TaskKind::Classification,
            Some(vec![Role::Local(1), Role::Global]),
            &[&ds],
            &mut rng,
        )
        .unwrap();
        let path = dir.join("model.json");
        model.save(&path).unwrap();
        let loaded = Model::load(&path).unwrap();

        let (Model::Classifier(a), Model::Classifier(b)) = (&model, &loaded) else {
            panic!("expected classifiers");
        };
        assert_eq!(a.roles, b.roles);
        for s in &ds.samples {
            assert_eq!(a.predict(s).unwrap(), b.predict(s).unwrap());
            let (ta, tb) = (Tape::new(), Tape::new());
            assert_eq!(
                a.logits(&ta, s).unwrap().to_vec(),
                b.logits(&tb, s).unwrap().to_vec()
            );
        }
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn seq2seq_save_load_round_trip() {
        let dir = tempfile_dir("seq2seq");
        let ds = LabeledDataset::new(
            TaskKind::Seq2seqToy,
            vec![Sample::seq2seq(
                vec!["w1".into(), "w2".into(), "w3".into()],
                vec!["w3".into(), "w2".into(), "w1".into()],
            )],
        )
        .unwrap();
        let mut rng = Prng::seed_from_u64(6);
        let mut model = Model::build(
            &settings(ModelKind::TransformerConcat),
            TaskKind::Seq2seqToy,
            None,
            &[&ds],
            &mut rng,
        )
        .unwrap();
        if let Model::Seq2Seq(m) = &mut model {
            m.max_decode_len = 6;
        }
        let path = dir.join("model.json");
        model.save(&path).unwrap();
        let loaded = Model::load(&path).unwrap();
        let (Model::Seq2Seq(a), Model::Seq2Seq(b)) = (&model, &loaded) else {
            panic!("expected seq2seq models");
        };
        assert_eq!(a.max_decode_len, b.max_decode_len);
        let src = &ds.samples[0].tokens;
        assert_eq!(a.greedy_decode(src).unwrap(), b.greedy_decode(src).unwrap());
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn load_rejects_shape_mismatch() {
        let dir = tempfile_dir("mismatch");
        let ds = tiny_classification();
        let mut rng = Prng::seed_from_u64(7);
        let model = Model::build(
            &settings(ModelKind::Rnn),
            TaskKind::Classification,
            None,
            &[&ds],
            &mut rng,
        )
        .unwrap();
        let path = dir.join("model.json");
        model.save(&path).unwrap();
        // corrupt the stored dimensions so rebuilding disagrees
        let text = std::fs::read_to_string(&path).unwrap();
        let mut saved: serde_json::Value = serde_json::from_str(&text).unwrap();
        saved["settings"]["d_model"] = serde_json::json!(6);
        std::fs::write(&path, serde_json::to_string(&saved).unwrap()).unwrap();
        assert!(Model::load(&path).is_err());
        std::fs::remove_dir_all(&dir).ok();
    }

    fn tempfile_dir(tag: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!("seqlab-model-{tag}-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        dir
    }
}
