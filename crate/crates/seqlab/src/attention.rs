//! Scaled dot-product attention and its two extensions: role-guided masks
//! that constrain where each head may look, and soft gates that replace head
//! concatenation with a learned weighted sum.
//!
//! A role mask is an additive n-by-n matrix whose entries are exactly 0
//! (include) or -inf (ignore), applied to the raw scores before scaling and
//! softmax, so masked positions receive exactly zero attention weight.

use std::fmt;
use std::fs;
use std::path::Path;

use crate::encoders::DependencyTree;
use crate::error::{Error, Result};
use crate::rng::Prng;
use crate::tensor::{broadcast_row, xavier_init, Activation, Tape, Tensor};

// ───────────────────────────── roles & masks ─────────────────────────────

/// What part of the input a masked head is allowed to attend to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    /// No constraint; the mask is all zeros.
    Global,
    /// Each position sees only itself.
    SelfOnly,
    /// Position i sees j <= i.
    Forward,
    /// Position i sees j >= i.
    Backward,
    /// Position i sees |i - j| <= w.
    Local(usize),
    /// Position i sees its dependency head, its children, and itself.
    Syntactic,
    /// Built programmatically via [`custom_mask`]; not file-assignable.
    Custom,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Role::Global => write!(f, "global"),
            Role::SelfOnly => write!(f, "self"),
            Role::Forward => write!(f, "forward"),
            Role::Backward => write!(f, "backward"),
            Role::Local(w) => write!(f, "local:{w}"),
            Role::Syntactic => write!(f, "syntactic"),
            Role::Custom => write!(f, "custom"),
        }
    }
}

/// Parse `global | self | forward | backward | local:<w> | syntactic`.
pub fn parse_role(s: &str) -> Result<Role> {
    let s = s.trim();
    if let Some(w) = s.strip_prefix("local:") {
        let w: usize = w
            .parse()
            .map_err(|_| Error::Contract(format!("bad local window in role '{s}'")))?;
        return Ok(Role::Local(w));
    }
    match s {
        "global" => Ok(Role::Global),
        "self" => Ok(Role::SelfOnly),
        "forward" => Ok(Role::Forward),
        "backward" => Ok(Role::Backward),
        "syntactic" => Ok(Role::Syntactic),
        other => Err(Error::Contract(format!("unknown role tag '{other}'"))),
    }
}

/// Additive attention mask; entries are exactly 0 or -inf.
#[derive(Debug, Clone)]
pub struct RoleMask {
    role: Role,
    n: usize,
    matrix: Vec<f64>,
}

impl RoleMask {
    pub fn role(&self) -> Role {
        self.role
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// True when position `i` may attend to position `j` (0-based).
    pub fn allows(&self, i: usize, j: usize) -> bool {
        self.matrix[i * self.n + j] == 0.0
    }

    /// The mask as a constant `[n × n]` tensor.
    pub fn as_tensor(&self) -> Tensor {
        Tensor::new(self.matrix.clone(), &[self.n, self.n]).expect("mask shape")
    }
}

/// Build the deterministic mask for `role` over `n` positions. The
/// syntactic role needs a dependency tree with exactly `n` tokens.
///
/// Construction fails if any row ends up fully masked, so downstream
/// softmax never sees a degenerate slice.
pub fn build_role_mask(role: Role, n: usize, tree: Option<&DependencyTree>) -> Result<RoleMask> {
    if n == 0 {
        return Err(Error::Contract("mask for empty sequence".to_string()));
    }
    let neg = f64::NEG_INFINITY;
    let mut matrix = vec![neg; n * n];

    match role {
        Role::Global => {
            matrix.fill(0.0);
        }
        Role::SelfOnly => {
            for i in 0..n {
                matrix[i * n + i] = 0.0;
            }
        }
        Role::Forward => {
            for i in 0..n {
                for j in 0..=i {
                    matrix[i * n + j] = 0.0;
                }
            }
        }
        Role::Backward => {
            for i in 0..n {
                for j in i..n {
                    matrix[i * n + j] = 0.0;
                }
            }
        }
        Role::Local(w) => {
            for i in 0..n {
                for j in i.saturating_sub(w)..=(i + w).min(n - 1) {
                    matrix[i * n + j] = 0.0;
                }
            }
        }
        Role::Custom => {
            return Err(Error::Contract(
                "custom masks are built with custom_mask, not from a role tag".to_string(),
            ));
        }
        Role::Syntactic => {
            let tree = tree.ok_or_else(|| {
                Error::Contract("syntactic role requires a dependency tree".to_string())
            })?;
            if tree.len() != n {
                return Err(Error::Contract(format!(
                    "tree has {} tokens but mask length is {n}",
                    tree.len()
                )));
            }
            for i in 0..n {
                matrix[i * n + i] = 0.0;
                let head = tree.heads()[i]; // 1-based, 0 = root
                if head != 0 {
                    matrix[i * n + (head - 1)] = 0.0; // i sees its head
                    matrix[(head - 1) * n + i] = 0.0; // the head sees its child
                }
            }
        }
    }

    for i in 0..n {
        if matrix[i * n..(i + 1) * n].iter().all(|&v| v == neg) {
            return Err(Error::DegenerateSlice { op: "build_role_mask", index: i });
        }
    }
    Ok(RoleMask { role, n, matrix })
}

/// Build an arbitrary mask from an inclusion predicate. Every row still
/// needs at least one included column.
pub fn custom_mask(n: usize, allowed: impl Fn(usize, usize) -> bool) -> Result<RoleMask> {
    if n == 0 {
        return Err(Error::Contract("mask for empty sequence".to_string()));
    }
    let neg = f64::NEG_INFINITY;
    let mut matrix = vec![neg; n * n];
    for i in 0..n {
        for j in 0..n {
            if allowed(i, j) {
                matrix[i * n + j] = 0.0;
            }
        }
    }
    for i in 0..n {
        if matrix[i * n..(i + 1) * n].iter().all(|&v| v == neg) {
            return Err(Error::DegenerateSlice { op: "custom_mask", index: i });
        }
    }
    Ok(RoleMask { role: Role::Custom, n, matrix })
}

/// Read a per-head role assignment file: one `head_index<TAB>role[:window]`
/// line per head, indices covering 0..heads exactly.
pub fn load_role_assignments(path: &Path) -> Result<Vec<Role>> {
    let text =
        fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut entries: Vec<(usize, Role)> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (idx, role) = line.split_once('\t').ok_or_else(|| Error::Format {
            line: lineno + 1,
            detail: "expected head_index<TAB>role".to_string(),
        })?;
        let idx: usize = idx.trim().parse().map_err(|_| Error::Format {
            line: lineno + 1,
            detail: format!("bad head index '{idx}'"),
        })?;
        let role = parse_role(role).map_err(|e| Error::Format {
            line: lineno + 1,
            detail: e.to_string(),
        })?;
        entries.push((idx, role));
    }
    entries.sort_by_key(|&(i, _)| i);
    for (expect, &(got, _)) in entries.iter().enumerate() {
        if got != expect {
            return Err(Error::Contract(format!(
                "role assignment indices must cover 0..{} exactly; saw index {got}",
                entries.len()
            )));
        }
    }
    Ok(entries.into_iter().map(|(_, r)| r).collect())
}

// ───────────────────────────── attention ops ─────────────────────────────

/// Projection matrices for one attention head.
#[derive(Debug, Clone)]
pub struct HeadParams {
    pub w_q: Tensor,
    pub w_k: Tensor,
    pub w_v: Tensor,
    pub d_k: usize,
}

impl HeadParams {
    pub fn init(rng: &mut Prng, d_model: usize, d_k: usize) -> HeadParams {
        HeadParams {
            w_q: xavier_init(rng, d_model, d_k),
            w_k: xavier_init(rng, d_model, d_k),
            w_v: xavier_init(rng, d_model, d_k),
            d_k,
        }
    }

    pub fn params(&self, out: &mut Vec<(String, Tensor)>, prefix: &str) {
        out.push((format!("{prefix}.w_q"), self.w_q.clone()));
        out.push((format!("{prefix}.w_k"), self.w_k.clone()));
        out.push((format!("{prefix}.w_v"), self.w_v.clone()));
    }
}

fn attention_core(
    tape: &Tape,
    q: &Tensor,
    k: &Tensor,
    v: &Tensor,
    mask: Option<&RoleMask>,
) -> Result<(Tensor, Tensor)> {
    let (nq, dk_q) = q.dims2("attention")?;
    let (nk, dk_k) = k.dims2("attention")?;
    let (nv, _dv) = v.dims2("attention")?;
    if dk_q != dk_k {
        return Err(Error::dim(
            "attention",
            format!("q and k key dimensions differ: {:?} vs {:?}", q.shape(), k.shape()),
        ));
    }
    if nk != nv {
        return Err(Error::dim(
            "attention",
            format!("k and v row counts differ: {:?} vs {:?}", k.shape(), v.shape()),
        ));
    }
    let kt = tape.transpose(k)?;
    let mut scores = tape.matmul(q, &kt)?;
    if let Some(m) = mask {
        if m.len() != nq || nq != nk {
            return Err(Error::dim(
                "masked_attention",
                format!("mask is {}x{} but scores are {nq}x{nk}", m.len(), m.len()),
            ));
        }
        scores = tape.add(&scores, &m.as_tensor())?;
    }
    let scaled = tape.scale(&scores, 1.0 / (dk_q as f64).sqrt())?;
    let weights = tape.softmax(&scaled, 1)?;
    let out = tape.matmul(&weights, v)?;
    Ok((out, weights))
}

/// `softmax(q kᵀ / sqrt(d_k)) v`. Differentiable end to end; `q` may have a
/// different row count than `k`/`v` (cross-attention).
pub fn scaled_dot_attention(tape: &Tape, q: &Tensor, k: &Tensor, v: &Tensor) -> Result<Tensor> {
    attention_core(tape, q, k, v, None).map(|(out, _)| out)
}

/// `softmax((q kᵀ + M) / sqrt(d_k)) v` with a role mask. Positions masked
/// with -inf receive exactly zero weight.
pub fn masked_attention(
    tape: &Tape,
    q: &Tensor,
    k: &Tensor,
    v: &Tensor,
    mask: &RoleMask,
) -> Result<Tensor> {
    attention_core(tape, q, k, v, Some(mask)).map(|(out, _)| out)
}

/// Post-softmax attention weight matrix, for inspection and tests.
pub fn attention_weights(
    tape: &Tape,
    q: &Tensor,
    k: &Tensor,
    mask: Option<&RoleMask>,
) -> Result<Tensor> {
    attention_core(tape, q, k, k, mask).map(|(_, w)| w)
}

/// Vanilla multi-head block: per-head projected attention, concatenated,
/// then mixed by `w_o` (`[heads·d_k × d_out]`). `masks`, when given, holds
/// one optional mask per head.
pub fn multi_head_concat(
    tape: &Tape,
    x: &Tensor,
    heads: &[HeadParams],
    masks: Option<&[Option<RoleMask>]>,
    w_o: &Tensor,
) -> Result<Tensor> {
    if heads.is_empty() {
        return Err(Error::Contract("multi_head_concat with no heads".to_string()));
    }
    if let Some(masks) = masks {
        if masks.len() != heads.len() {
            return Err(Error::Contract(format!(
                "{} masks for {} heads",
                masks.len(),
                heads.len()
            )));
        }
    }
    let total: usize = heads.iter().map(|h| h.d_k).sum();
    let (wo_in, _) = w_o.dims2("multi_head_concat")?;
    if wo_in != total {
        return Err(Error::dim(
            "multi_head_concat",
            format!("heads concatenate to width {total}, but w_o expects {wo_in}"),
        ));
    }
    let mut outs = Vec::with_capacity(heads.len());
    for (i, h) in heads.iter().enumerate() {
        let q = tape.matmul(x, &h.w_q)?;
        let k = tape.matmul(x, &h.w_k)?;
        let v = tape.matmul(x, &h.w_v)?;
        let mask = masks.and_then(|m| m[i].as_ref());
        let (out, _) = attention_core(tape, &q, &k, &v, mask)?;
        outs.push(out);
    }
    let cat = tape.concat(&outs, 1)?;
    tape.matmul(&cat, w_o)
}

/// Multi-head cross-attention: queries come from `x_q`, keys and values
/// from `x_kv`. Heads are concatenated and mixed by `w_o`.
pub fn multi_head_cross(
    tape: &Tape,
    x_q: &Tensor,
    x_kv: &Tensor,
    heads: &[HeadParams],
    w_o: &Tensor,
) -> Result<Tensor> {
    if heads.is_empty() {
        return Err(Error::Contract("multi_head_cross with no heads".to_string()));
    }
    let mut outs = Vec::with_capacity(heads.len());
    for h in heads {
        let q = tape.matmul(x_q, &h.w_q)?;
        let k = tape.matmul(x_kv, &h.w_k)?;
        let v = tape.matmul(x_kv, &h.w_v)?;
        let (out, _) = attention_core(tape, &q, &k, &v, None)?;
        outs.push(out);
    }
    let cat = tape.concat(&outs, 1)?;
    tape.matmul(&cat, w_o)
}

/// One trainable scalar gate per head, squashed through a sigmoid.
#[derive(Debug, Clone)]
pub struct HeadGates {
    raw: Vec<Tensor>,
}

impl HeadGates {
    /// Gates start at raw 0, i.e. effective value 0.5.
    pub fn init(num_heads: usize) -> HeadGates {
        let raw =
            (0..num_heads).map(|_| Tensor::param(vec![0.0], &[1]).expect("scalar")).collect();
        HeadGates { raw }
    }

    pub fn from_raw(raw: Vec<f64>) -> HeadGates {
        HeadGates {
            raw: raw.into_iter().map(|v| Tensor::param(vec![v], &[1]).expect("scalar")).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    pub fn raw(&self) -> &[Tensor] {
        &self.raw
    }

    /// Sigmoid of the raw gates, evaluated off-tape.
    pub fn effective_values(&self) -> Vec<f64> {
        self.raw.iter().map(|r| 1.0 / (1.0 + (-r.entry(0)).exp())).collect()
    }

    pub fn params(&self, out: &mut Vec<(String, Tensor)>, prefix: &str) {
        for (i, r) in self.raw.iter().enumerate() {
            out.push((format!("{prefix}.gate{i}"), r.clone()));
        }
    }
}

/// Gated aggregation: heads are summed, each scaled by its sigmoid gate,
/// after a per-head `d_k -> d_out` projection. No shared output projection
/// follows the sum.
pub fn multi_head_gated(
    tape: &Tape,
    x: &Tensor,
    heads: &[HeadParams],
    gates: &HeadGates,
    per_head_output_proj: &[Tensor],
) -> Result<Tensor> {
    multi_head_gated_masked(tape, x, heads, gates, per_head_output_proj, None)
}

/// Gated aggregation with optional per-head role masks.
pub fn multi_head_gated_masked(
    tape: &Tape,
    x: &Tensor,
    heads: &[HeadParams],
    gates: &HeadGates,
    per_head_output_proj: &[Tensor],
    masks: Option<&[Option<RoleMask>]>,
) -> Result<Tensor> {
    if heads.is_empty() {
        return Err(Error::Contract("multi_head_gated with no heads".to_string()));
    }
    if gates.len() != heads.len() {
        return Err(Error::Contract(format!("{} gates for {} heads", gates.len(), heads.len())));
    }
    if per_head_output_proj.len() != heads.len() {
        return Err(Error::Contract(format!(
            "{} output projections for {} heads",
            per_head_output_proj.len(),
            heads.len()
        )));
    }
    if let Some(masks) = masks {
        if masks.len() != heads.len() {
            return Err(Error::Contract(format!(
                "{} masks for {} heads",
                masks.len(),
                heads.len()
            )));
        }
    }
    let mut total: Option<Tensor> = None;
    for (i, h) in heads.iter().enumerate() {
        let q = tape.matmul(x, &h.w_q)?;
        let k = tape.matmul(x, &h.w_k)?;
        let v = tape.matmul(x, &h.w_v)?;
        let mask = masks.and_then(|m| m[i].as_ref());
        let (att, _) = attention_core(tape, &q, &k, &v, mask)?;
        let projected = tape.matmul(&att, &per_head_output_proj[i])?;
        let gate = tape.sigmoid(&gates.raw[i]);
        let gated = tape.scale_by(&projected, &gate)?;
        total = Some(match total {
            Some(t) => tape.add(&t, &gated)?,
            None => gated,
        });
    }
    Ok(total.expect("at least one head"))
}

/// How a multi-head block combines its heads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    Concat,
    Gated,
}

/// Shape-level description of a multi-head block.
#[derive(Debug, Clone)]
pub struct MultiHeadConfig {
    pub num_heads: usize,
    pub d_model: usize,
    pub d_k: usize,
    pub aggregation: Aggregation,
    pub roles: Option<Vec<Role>>,
}

impl MultiHeadConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_heads == 0 || self.d_model == 0 || self.d_k == 0 {
            return Err(Error::Contract("multi-head dimensions must be positive".to_string()));
        }
        if let Some(roles) = &self.roles {
            if roles.len() != self.num_heads {
                return Err(Error::Contract(format!(
                    "{} roles for {} heads",
                    roles.len(),
                    self.num_heads
                )));
            }
        }
        Ok(())
    }
}

// ───────────────────────────── positions ─────────────────────────────

/// Standard sine/cosine positional encoding: even columns carry
/// `sin(pos / 10000^(2i/d))`, odd columns the matching cosine.
pub fn sinusoidal_positions(n: usize, d_model: usize) -> Result<Tensor> {
    if d_model == 0 || !d_model.is_multiple_of(2) {
        return Err(Error::Contract(format!(
            "sinusoidal positions need an even positive dimension, got {d_model}"
        )));
    }
    if n == 0 {
        return Err(Error::Contract("positions need n >= 1".to_string()));
    }
    let mut data = vec![0.0; n * d_model];
    for pos in 0..n {
        for i in 0..d_model / 2 {
            let rate = (pos as f64) / 10000f64.powf(2.0 * i as f64 / d_model as f64);
            data[pos * d_model + 2 * i] = rate.sin();
            data[pos * d_model + 2 * i + 1] = rate.cos();
        }
    }
    Tensor::new(data, &[n, d_model])
}

// ───────────────────────────── encoder layer ─────────────────────────────

/// Position-wise two-layer feed-forward network.
#[derive(Debug, Clone)]
pub struct FeedForward {
    pub w1: Tensor,
    pub b1: Tensor,
    pub w2: Tensor,
    pub b2: Tensor,
    pub activation: Activation,
}

impl FeedForward {
    pub fn init(rng: &mut Prng, d_model: usize, d_hidden: usize, activation: Activation) -> Self {
        FeedForward {
            w1: xavier_init(rng, d_model, d_hidden),
            b1: Tensor::param(vec![0.0; d_hidden], &[1, d_hidden]).expect("bias"),
            w2: xavier_init(rng, d_hidden, d_model),
            b2: Tensor::param(vec![0.0; d_model], &[1, d_model]).expect("bias"),
            activation,
        }
    }

    pub fn forward(&self, tape: &Tape, x: &Tensor) -> Result<Tensor> {
        let (n, _) = x.dims2("feed_forward")?;
        let h = tape.matmul(x, &self.w1)?;
        let h = tape.add(&h, &broadcast_row(tape, &self.b1, n)?)?;
        let h = tape.activate(&h, self.activation);
        let out = tape.matmul(&h, &self.w2)?;
        tape.add(&out, &broadcast_row(tape, &self.b2, n)?)
    }

    pub fn params(&self, out: &mut Vec<(String, Tensor)>, prefix: &str) {
        out.push((format!("{prefix}.w1"), self.w1.clone()));
        out.push((format!("{prefix}.b1"), self.b1.clone()));
        out.push((format!("{prefix}.w2"), self.w2.clone()));
        out.push((format!("{prefix}.b2"), self.b2.clone()));
    }
}

/// Head-mixing parameters for one encoder layer.
#[derive(Debug, Clone)]
pub enum HeadMixer {
    Concat { w_o: Tensor },
    Gated { gates: HeadGates, projs: Vec<Tensor> },
}

/// One encoder layer: multi-head attention (optionally role-masked), a
/// residual add, a position-wise feed-forward, and another residual add.
/// No layer normalization at this scale.
#[derive(Debug, Clone)]
pub struct EncoderLayer {
    pub heads: Vec<HeadParams>,
    pub mixer: HeadMixer,
    pub roles: Option<Vec<Role>>,
    pub ffn: FeedForward,
}

impl EncoderLayer {
    pub fn init(
        rng: &mut Prng,
        cfg: &MultiHeadConfig,
        d_ffn: usize,
        activation: Activation,
    ) -> Result<EncoderLayer> {
        cfg.validate()?;
        let heads: Vec<HeadParams> =
            (0..cfg.num_heads).map(|_| HeadParams::init(rng, cfg.d_model, cfg.d_k)).collect();
        let mixer = match cfg.aggregation {
            Aggregation::Concat => {
                HeadMixer::Concat { w_o: xavier_init(rng, cfg.num_heads * cfg.d_k, cfg.d_model) }
            }
            Aggregation::Gated => HeadMixer::Gated {
                gates: HeadGates::init(cfg.num_heads),
                projs: (0..cfg.num_heads)
                    .map(|_| xavier_init(rng, cfg.d_k, cfg.d_model))
                    .collect(),
            },
        };
        Ok(EncoderLayer {
            heads,
            mixer,
            roles: cfg.roles.clone(),
            ffn: FeedForward::init(rng, cfg.d_model, d_ffn, activation),
        })
    }

    /// Build this layer's per-head masks for a sequence of length `n`.
    pub fn masks_for(
        &self,
        n: usize,
        tree: Option<&DependencyTree>,
    ) -> Result<Option<Vec<Option<RoleMask>>>> {
        match &self.roles {
            None => Ok(None),
            Some(roles) => {
                let mut masks = Vec::with_capacity(roles.len());
                for role in roles {
                    masks.push(Some(build_role_mask(*role, n, tree)?));
                }
                Ok(Some(masks))
            }
        }
    }

    pub fn forward(
        &self,
        tape: &Tape,
        x: &Tensor,
        tree: Option<&DependencyTree>,
    ) -> Result<Tensor> {
        let (n, _) = x.dims2("encoder_layer")?;
        let masks = self.masks_for(n, tree)?;
        let att = match &self.mixer {
            HeadMixer::Concat { w_o } => {
                multi_head_concat(tape, x, &self.heads, masks.as_deref(), w_o)?
            }
            HeadMixer::Gated { gates, projs } => {
                multi_head_gated_masked(tape, x, &self.heads, gates, projs, masks.as_deref())?
            }
        };
        let h = tape.add(x, &att)?;
        let ff = self.ffn.forward(tape, &h)?;
        tape.add(&h, &ff)
    }

    pub fn params(&self, out: &mut Vec<(String, Tensor)>, prefix: &str) {
        for (i, h) in self.heads.iter().enumerate() {
            h.params(out, &format!("{prefix}.head{i}"));
        }
        match &self.mixer {
            HeadMixer::Concat { w_o } => out.push((format!("{prefix}.w_o"), w_o.clone())),
            HeadMixer::Gated { gates, projs } => {
                gates.params(out, prefix);
                for (i, p) in projs.iter().enumerate() {
                    out.push((format!("{prefix}.proj{i}"), p.clone()));
                }
            }
        }
        self.ffn.params(out, &format!("{prefix}.ffn"));
    }
}

#[cfg(test)]
mod tests;
