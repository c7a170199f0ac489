//! Contextual phrase compositionality: a phrase vector is a context-weighted
//! combination of its token embeddings, and the compositionality score is
//! the mean cosine similarity between the phrase and its one-word-substituted
//! perturbations. High score means the phrase decomposes; "hot dog" in a
//! food context should not.

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

// ───────────────────────── embedding store ─────────────────────────

/// Vocabulary-to-vector map with a single fixed dimension.
#[derive(Debug, Clone, Default)]
pub struct EmbeddingStore {
    vectors: HashMap<String, Vec<f64>>,
    dim: Option<usize>,
    duplicates: usize,
}

impl EmbeddingStore {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Vector dimension; `None` until the first entry arrives.
    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    /// How many words were overwritten by later duplicate lines.
    pub fn duplicate_count(&self) -> usize {
        self.duplicates
    }

    pub fn insert(&mut self, word: &str, vector: Vec<f64>) -> Result<()> {
        match self.dim {
            None => self.dim = Some(vector.len()),
            Some(d) if d != vector.len() => {
                return Err(Error::Contract(format!(
                    "vector for '{word}' has length {}, store dimension is {d}",
                    vector.len()
                )));
            }
            _ => {}
        }
        if self.vectors.insert(word.to_string(), vector).is_some() {
            self.duplicates += 1;
        }
        Ok(())
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.vectors.get(word).map(Vec::as_slice)
    }

    /// Look up every token, reporting all misses at once.
    pub fn lookup_all(&self, tokens: &[String]) -> Result<Vec<&[f64]>> {
        let missing: Vec<String> =
            tokens.iter().filter(|t| !self.vectors.contains_key(*t)).cloned().collect();
        if !missing.is_empty() {
            return Err(Error::Oov(missing));
        }
        Ok(tokens.iter().map(|t| self.vectors[t].as_slice()).collect())
    }

    /// A copy with every stored vector scaled by `c` (for invariance tests).
    pub fn rescaled(&self, c: f64) -> EmbeddingStore {
        EmbeddingStore {
            vectors: self
                .vectors
                .iter()
                .map(|(w, v)| (w.clone(), v.iter().map(|x| x * c).collect()))
                .collect(),
            dim: self.dim,
            duplicates: self.duplicates,
        }
    }
}

/// Load a word-vector text file: one `word v1 v2 ... vd` line per entry,
/// space separated. Duplicate words keep the last occurrence.
pub fn load_embeddings(path: &Path) -> Result<EmbeddingStore> {
    let file =
        fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut store = EmbeddingStore::default();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::io(path.display().to_string(), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let word = fields.next().expect("non-empty line");
        let vector: Vec<f64> = fields
            .map(|f| {
                f.parse::<f64>().map_err(|_| Error::Format {
                    line: lineno,
                    detail: format!("bad number '{f}'"),
                })
            })
            .collect::<Result<_>>()?;
        if vector.is_empty() {
            return Err(Error::Format {
                line: lineno,
                detail: format!("no vector components after '{word}'"),
            });
        }
        store.insert(word, vector).map_err(|e| Error::Format {
            line: lineno,
            detail: e.to_string(),
        })?;
    }
    Ok(store)
}

// ───────────────────────── phrase context ─────────────────────────

/// Where a phrase occurs: the narrative it appears in, plus globally
/// co-occurring terms, mixed by `lambda`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhraseContext {
    pub scenario: Vec<String>,
    pub global_context: Vec<(String, f64)>,
    pub lambda: f64,
}

impl PhraseContext {
    pub fn new(
        scenario: Vec<String>,
        global_context: Vec<(String, f64)>,
        lambda: f64,
    ) -> Result<PhraseContext> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::Contract(format!("lambda must be in [0,1], got {lambda}")));
        }
        if let Some((term, w)) = global_context.iter().find(|(_, w)| *w < 0.0) {
            return Err(Error::Contract(format!(
                "negative global-context weight {w} for '{term}'"
            )));
        }
        Ok(PhraseContext { scenario, global_context, lambda })
    }

    /// A context with no evidence: every weighting collapses to uniform.
    pub fn uniform() -> PhraseContext {
        PhraseContext { scenario: Vec::new(), global_context: Vec::new(), lambda: 0.5 }
    }

    /// Normalized per-token weights over the phrase. Each side (scenario
    /// frequency, global co-occurrence) normalizes to sum 1 over the
    /// phrase's tokens, falling back to uniform when it has no evidence;
    /// the sides are then mixed as `global + lambda * (scenario - global)`,
    /// which is exactly λ·scenario + (1-λ)·global and leaves equal sides
    /// untouched by lambda.
    pub fn token_weights(&self, phrase: &[String]) -> Vec<f64> {
        let k = phrase.len();
        let uniform = 1.0 / k as f64;

        let raw_scenario: Vec<f64> = phrase
            .iter()
            .map(|t| self.scenario.iter().filter(|s| *s == t).count() as f64)
            .collect();
        let scenario = normalize_or_uniform(&raw_scenario, uniform);

        let raw_global: Vec<f64> = phrase
            .iter()
            .map(|t| {
                self.global_context
                    .iter()
                    .filter(|(term, _)| term == t)
                    .map(|(_, w)| *w)
                    .sum()
            })
            .collect();
        let global = normalize_or_uniform(&raw_global, uniform);

        scenario
            .iter()
            .zip(&global)
            .map(|(s, g)| g + self.lambda * (s - g))
            .collect()
    }
}

fn normalize_or_uniform(raw: &[f64], uniform: f64) -> Vec<f64> {
    let total: f64 = raw.iter().sum();
    if total == 0.0 {
        vec![uniform; raw.len()]
    } else {
        raw.iter().map(|r| r / total).collect()
    }
}

// ───────────────────────── phrase vectors ─────────────────────────

/// Context-weighted sum of token vectors, normalized to unit length.
pub fn phrase_vector(
    phrase: &[String],
    store: &EmbeddingStore,
    ctx: &PhraseContext,
) -> Result<Vec<f64>> {
    if phrase.is_empty() {
        return Err(Error::Contract("empty phrase".to_string()));
    }
    let vectors = store.lookup_all(phrase)?;
    let weights = ctx.token_weights(phrase);
    let d = vectors[0].len();
    let mut combined = vec![0.0; d];
    for (w, v) in weights.iter().zip(&vectors) {
        for (c, x) in combined.iter_mut().zip(*v) {
            *c += w * x;
        }
    }
    let norm = combined.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::Contract(format!(
            "phrase '{}' has a zero-norm vector under this context",
            phrase.join(" ")
        )));
    }
    for c in &mut combined {
        *c /= norm;
    }
    Ok(combined)
}

/// `dot(a, b) / (|a| |b|)`. Bitwise-identical vectors short-circuit to
/// exactly 1 (the mathematical value, free of rounding).
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::dim(
            "cosine",
            format!("vector lengths differ: {} vs {}", a.len(), b.len()),
        ));
    }
    if a == b {
        if a.iter().all(|&x| x == 0.0) {
            return Err(Error::Contract("cosine of zero vector".to_string()));
        }
        return Ok(1.0);
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::Contract("cosine of zero vector".to_string()));
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

// ───────────────────────── perturbations & score ─────────────────────────

/// The phrase plus its one-word-substituted variants.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PerturbationSet {
    pub phrase: Vec<String>,
    pub variants: Vec<Vec<String>>,
}

impl PerturbationSet {
    /// Every variant must differ from the phrase in exactly one position.
    pub fn new(phrase: Vec<String>, variants: Vec<Vec<String>>) -> Result<PerturbationSet> {
        if variants.is_empty() {
            return Err(Error::Contract("perturbation set is empty".to_string()));
        }
        for (i, v) in variants.iter().enumerate() {
            if v.len() != phrase.len() {
                return Err(Error::Contract(format!(
                    "perturbation {i} has {} tokens, phrase has {}",
                    v.len(),
                    phrase.len()
                )));
            }
            let diffs = phrase.iter().zip(v).filter(|(a, b)| a != b).count();
            if diffs != 1 {
                return Err(Error::Contract(format!(
                    "perturbation {i} differs from the phrase in {diffs} positions, expected 1"
                )));
            }
        }
        Ok(PerturbationSet { phrase, variants })
    }
}

/// Mean cosine similarity between the phrase representation and each
/// perturbation's representation under the same context.
pub fn compositionality_score(
    set: &PerturbationSet,
    store: &EmbeddingStore,
    ctx: &PhraseContext,
) -> Result<f64> {
    let original = phrase_vector(&set.phrase, store, ctx)?;
    let mut total = 0.0;
    for variant in &set.variants {
        let perturbed = phrase_vector(variant, store, ctx)?;
        total += cosine(&original, &perturbed)?;
    }
    Ok(total / set.variants.len() as f64)
}

// ───────────────────────── task file ─────────────────────────

/// One line of the JSON-lines phrase task file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhraseTask {
    pub phrase: Vec<String>,
    pub scenario: Vec<String>,
    pub global_context: Vec<(String, f64)>,
    pub perturbations: Vec<Vec<String>>,
    pub lambda: f64,
}

pub fn read_phrase_tasks(path: &Path) -> Result<Vec<PhraseTask>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut tasks = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let task: PhraseTask = serde_json::from_str(line).map_err(|e| Error::Format {
            line: i + 1,
            detail: e.to_string(),
        })?;
        tasks.push(task);
    }
    Ok(tasks)
}

/// Score every task; each result pairs the space-joined phrase with its
/// compositionality score.
pub fn score_tasks(store: &EmbeddingStore, tasks: &[PhraseTask]) -> Result<Vec<(String, f64)>> {
    let mut out = Vec::with_capacity(tasks.len());
    for task in tasks {
        let ctx = PhraseContext::new(
            task.scenario.clone(),
            task.global_context.clone(),
            task.lambda,
        )?;
        let set = PerturbationSet::new(task.phrase.clone(), task.perturbations.clone())?;
        let score = compositionality_score(&set, store, &ctx)?;
        out.push((task.phrase.join(" "), score));
    }
    Ok(out)
}
