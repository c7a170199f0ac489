//! Datasets: JSON-lines loading and writing, synthetic task generation, and
//! token/label vocabularies.
//!
//! Line formats by task (one JSON object per line):
//! - classification: `{"text": [...], "label": "..."}`
//! - pair_inference: `{"text1": [...], "text2": [...], "label": "..."}`
//! - relation: `{"text": [...], "e1": [s,e], "e2": [s,e], "label": "..."}`
//! - seq2seq_toy: `{"source": [...], "target": [...]}`
//!
//! Classification, pair, and relation lines may carry optional `heads`,
//! `deprels`, and `pos` arrays holding a dependency parse (needed by the
//! ms_encoder and block_relation models and the syntactic role).

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde_json::{json, Map, Value};

use crate::encoders::{DependencyTree, Span};
use crate::error::{Error, Result};
use crate::rng::Prng;

use super::config::TaskKind;

/// One data point; which fields are set depends on the task.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub tokens: Vec<String>,
    pub tokens2: Option<Vec<String>>,
    pub tree: Option<DependencyTree>,
    pub e1: Option<Span>,
    pub e2: Option<Span>,
    pub target: Option<Vec<String>>,
    pub label: Option<String>,
}

impl Sample {
    pub fn classification(tokens: Vec<String>, label: &str) -> Sample {
        Sample {
            tokens,
            tokens2: None,
            tree: None,
            e1: None,
            e2: None,
            target: None,
            label: Some(label.to_string()),
        }
    }

    pub fn seq2seq(source: Vec<String>, target: Vec<String>) -> Sample {
        Sample {
            tokens: source,
            tokens2: None,
            tree: None,
            e1: None,
            e2: None,
            target: Some(target),
            label: None,
        }
    }
}

/// Samples plus the label vocabulary (sorted, deduplicated).
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub task: TaskKind,
    pub samples: Vec<Sample>,
    pub labels: Vec<String>,
}

impl LabeledDataset {
    pub fn new(task: TaskKind, samples: Vec<Sample>) -> Result<LabeledDataset> {
        if samples.is_empty() {
            return Err(Error::Contract("dataset is empty".to_string()));
        }
        let labels: BTreeSet<String> =
            samples.iter().filter_map(|s| s.label.clone()).collect();
        Ok(LabeledDataset { task, samples, labels: labels.into_iter().collect() })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// A new dataset holding the given sample indices, keeping the full
    /// label vocabulary.
    pub fn subset(&self, indices: &[usize]) -> Result<LabeledDataset> {
        if indices.is_empty() {
            return Err(Error::Contract("empty dataset subset".to_string()));
        }
        Ok(LabeledDataset {
            task: self.task,
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
            labels: self.labels.clone(),
        })
    }

    /// Sorted token vocabulary over every text field in the dataset.
    pub fn token_vocabulary(&self) -> Vec<String> {
        let mut words = BTreeSet::new();
        for s in &self.samples {
            words.extend(s.tokens.iter().cloned());
            if let Some(t2) = &s.tokens2 {
                words.extend(t2.iter().cloned());
            }
            if let Some(t) = &s.target {
                words.extend(t.iter().cloned());
            }
        }
        words.into_iter().collect()
    }
}

// ───────────────────────── JSONL reading ─────────────────────────

fn field<'v>(obj: &'v Map<String, Value>, name: &str, line: usize) -> Result<&'v Value> {
    obj.get(name).ok_or_else(|| Error::Format {
        line,
        detail: format!("missing field '{name}'"),
    })
}

fn tokens_from(value: &Value, name: &str, line: usize) -> Result<Vec<String>> {
    match value {
        Value::String(s) => Ok(s.split_whitespace().map(str::to_string).collect()),
        Value::Array(items) => items
            .iter()
            .map(|v| {
                v.as_str().map(str::to_string).ok_or_else(|| Error::Format {
                    line,
                    detail: format!("'{name}' must hold strings"),
                })
            })
            .collect(),
        _ => Err(Error::Format {
            line,
            detail: format!("'{name}' must be a string or an array of tokens"),
        }),
    }
}

fn span_from(value: &Value, name: &str, line: usize) -> Result<Span> {
    let arr = value.as_array().ok_or_else(|| Error::Format {
        line,
        detail: format!("'{name}' must be a [start, end] pair"),
    })?;
    if arr.len() != 2 {
        return Err(Error::Format {
            line,
            detail: format!("'{name}' must have exactly two entries"),
        });
    }
    let get = |v: &Value| -> Option<usize> { v.as_u64().map(|x| x as usize) };
    match (get(&arr[0]), get(&arr[1])) {
        (Some(s), Some(e)) => Ok(Span::new(s, e)),
        _ => Err(Error::Format {
            line,
            detail: format!("'{name}' entries must be non-negative integers"),
        }),
    }
}

fn optional_tree(
    obj: &Map<String, Value>,
    tokens: &[String],
    line: usize,
) -> Result<Option<DependencyTree>> {
    let Some(heads_val) = obj.get("heads") else {
        return Ok(None);
    };
    let heads: Vec<usize> = heads_val
        .as_array()
        .ok_or_else(|| Error::Format { line, detail: "'heads' must be an array".into() })?
        .iter()
        .map(|v| {
            v.as_u64().map(|x| x as usize).ok_or_else(|| Error::Format {
                line,
                detail: "'heads' entries must be non-negative integers".into(),
            })
        })
        .collect::<Result<_>>()?;
    let deprels = tokens_from(field(obj, "deprels", line)?, "deprels", line)?;
    let pos = tokens_from(field(obj, "pos", line)?, "pos", line)?;
    let tree = DependencyTree::new(tokens.to_vec(), heads, deprels, pos)
        .map_err(|e| Error::Format { line, detail: e.to_string() })?;
    Ok(Some(tree))
}

fn label_from(obj: &Map<String, Value>, line: usize) -> Result<String> {
    let v = field(obj, "label", line)?;
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        _ => Err(Error::Format { line, detail: "'label' must be a string or number".into() }),
    }
}

/// Parse one JSONL file into a dataset, validating the fields the task
/// needs. Errors carry the 1-based line number.
pub fn load_jsonl_dataset(path: &Path, task: TaskKind) -> Result<LabeledDataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut samples = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(raw)
            .map_err(|e| Error::Format { line, detail: e.to_string() })?;
        let obj = value
            .as_object()
            .ok_or_else(|| Error::Format { line, detail: "expected a JSON object".into() })?;
        let sample = match task {
            TaskKind::Classification => {
                let tokens = tokens_from(field(obj, "text", line)?, "text", line)?;
                let tree = optional_tree(obj, &tokens, line)?;
                Sample {
                    tree,
                    ..Sample::classification(tokens, &label_from(obj, line)?)
                }
            }
            TaskKind::PairInference => {
                let t1 = tokens_from(field(obj, "text1", line)?, "text1", line)?;
                let t2 = tokens_from(field(obj, "text2", line)?, "text2", line)?;
                Sample {
                    tokens: t1,
                    tokens2: Some(t2),
                    tree: None,
                    e1: None,
                    e2: None,
                    target: None,
                    label: Some(label_from(obj, line)?),
                }
            }
            TaskKind::Relation => {
                let tokens = tokens_from(field(obj, "text", line)?, "text", line)?;
                let e1 = span_from(field(obj, "e1", line)?, "e1", line)?;
                let e2 = span_from(field(obj, "e2", line)?, "e2", line)?;
                let tree = optional_tree(obj, &tokens, line)?;
                Sample {
                    tokens,
                    tokens2: None,
                    tree,
                    e1: Some(e1),
                    e2: Some(e2),
                    target: None,
                    label: Some(label_from(obj, line)?),
                }
            }
            TaskKind::Seq2seqToy => {
                let source = tokens_from(field(obj, "source", line)?, "source", line)?;
                let target = tokens_from(field(obj, "target", line)?, "target", line)?;
                Sample::seq2seq(source, target)
            }
            TaskKind::Compositionality => {
                return Err(Error::Contract(
                    "compositionality tasks use the phrase task file, not a labeled dataset"
                        .to_string(),
                ));
            }
        };
        samples.push(sample);
    }
    LabeledDataset::new(task, samples)
}

/// Write a dataset back to JSONL; the loader reads its own output.
pub fn write_jsonl_dataset(path: &Path, dataset: &LabeledDataset) -> Result<()> {
    let mut out = String::new();
    for s in &dataset.samples {
        let mut obj = Map::new();
        match dataset.task {
            TaskKind::Seq2seqToy => {
                obj.insert("source".into(), json!(s.tokens));
                obj.insert("target".into(), json!(s.target.clone().unwrap_or_default()));
            }
            TaskKind::PairInference => {
                obj.insert("text1".into(), json!(s.tokens));
                obj.insert("text2".into(), json!(s.tokens2.clone().unwrap_or_default()));
                obj.insert("label".into(), json!(s.label.clone().unwrap_or_default()));
            }
            _ => {
                obj.insert("text".into(), json!(s.tokens));
                if let Some(e1) = s.e1 {
                    obj.insert("e1".into(), json!([e1.start, e1.end]));
                }
                if let Some(e2) = s.e2 {
                    obj.insert("e2".into(), json!([e2.start, e2.end]));
                }
                obj.insert("label".into(), json!(s.label.clone().unwrap_or_default()));
            }
        }
        if let Some(tree) = &s.tree {
            obj.insert("heads".into(), json!(tree.heads()));
            obj.insert("deprels".into(), json!(tree.deprels()));
            obj.insert("pos".into(), json!(tree.pos()));
        }
        out.push_str(&Value::Object(obj).to_string());
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

// ───────────────────────── synthetic tasks ─────────────────────────

/// Desk-scale stand-ins for the real tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyntheticTask {
    /// Binary classification: label "1" iff the marker token sits within
    /// `window` positions of the anchor token. Both tokens appear in every
    /// sequence, so bag-of-words carries no signal.
    MarkerWindow { window: usize },
    /// Sequence transduction: target equals source.
    Copy,
    /// Sequence transduction: target is the reversed source.
    Reverse,
}

impl SyntheticTask {
    pub fn parse(name: &str, window: Option<usize>) -> Result<SyntheticTask> {
        match name {
            "marker_window" => Ok(SyntheticTask::MarkerWindow { window: window.unwrap_or(2) }),
            "copy" => Ok(SyntheticTask::Copy),
            "reverse" => Ok(SyntheticTask::Reverse),
            other => Err(Error::Contract(format!("unknown synthetic task '{other}'"))),
        }
    }

    pub fn task_kind(&self) -> TaskKind {
        match self {
            SyntheticTask::MarkerWindow { .. } => TaskKind::Classification,
            _ => TaskKind::Seq2seqToy,
        }
    }
}

pub const ANCHOR_TOKEN: &str = "anchor";
pub const MARKER_TOKEN: &str = "marker";

/// Deterministically generate a synthetic dataset.
pub fn generate_synthetic(
    task: SyntheticTask,
    size: usize,
    length: usize,
    vocab: usize,
    seed: u64,
) -> Result<LabeledDataset> {
    if size == 0 || length == 0 {
        return Err(Error::Contract("size and length must be positive".to_string()));
    }
    let mut rng = Prng::seed_from_u64(seed);
    match task {
        SyntheticTask::MarkerWindow { window } => {
            if vocab < 3 {
                return Err(Error::Contract(format!(
                    "marker_window needs vocab >= 3 (anchor, marker, filler), got {vocab}"
                )));
            }
            if length < window + 2 {
                return Err(Error::Contract(format!(
                    "length {length} cannot separate marker and anchor by more than {window}"
                )));
            }
            let fillers: Vec<String> =
                (0..vocab - 2).map(|i| format!("t{i}")).collect();
            let marker_slots = |anchor: usize, positive: bool| -> Vec<usize> {
                (0..length)
                    .filter(|&p| {
                        p != anchor
                            && if positive {
                                p.abs_diff(anchor) <= window
                            } else {
                                p.abs_diff(anchor) > window
                            }
                    })
                    .collect()
            };
            let mut samples = Vec::with_capacity(size);
            for _ in 0..size {
                let positive = rng.below(2) == 1;
                let mut anchor = rng.below(length);
                let mut candidates = marker_slots(anchor, positive);
                if candidates.is_empty() {
                    // a central anchor may have no far slot; the edge always does
                    anchor = 0;
                    candidates = marker_slots(anchor, positive);
                }
                let marker = candidates[rng.below(candidates.len())];
                samples.push(marker_sample(length, anchor, marker, positive, &fillers, &mut rng));
            }
            LabeledDataset::new(TaskKind::Classification, samples)
        }
        SyntheticTask::Copy | SyntheticTask::Reverse => {
            if vocab == 0 {
                return Err(Error::Contract("copy/reverse need a positive vocab".to_string()));
            }
            let words: Vec<String> = (0..vocab).map(|i| format!("w{i}")).collect();
            let mut samples = Vec::with_capacity(size);
            for _ in 0..size {
                let source: Vec<String> =
                    (0..length).map(|_| words[rng.below(vocab)].clone()).collect();
                let target = match task {
                    SyntheticTask::Reverse => source.iter().rev().cloned().collect(),
                    _ => source.clone(),
                };
                samples.push(Sample::seq2seq(source, target));
            }
            LabeledDataset::new(TaskKind::Seq2seqToy, samples)
        }
    }
}

fn marker_sample(
    length: usize,
    anchor: usize,
    marker: usize,
    positive: bool,
    fillers: &[String],
    rng: &mut Prng,
) -> Sample {
    let tokens: Vec<String> = (0..length)
        .map(|p| {
            if p == anchor {
                ANCHOR_TOKEN.to_string()
            } else if p == marker {
                MARKER_TOKEN.to_string()
            } else {
                fillers[rng.below(fillers.len())].clone()
            }
        })
        .collect();
    Sample::classification(tokens, if positive { "1" } else { "0" })
}

// ───────────────────────── vocabulary ─────────────────────────

pub const UNK: &str = "<unk>";
pub const BOS: &str = "<bos>";
pub const EOS: &str = "<eos>";

/// Token-to-id map with reserved `<unk>`, `<bos>`, `<eos>` slots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    words: Vec<String>,
}

impl Vocab {
    pub fn build(tokens: &[String]) -> Vocab {
        let mut words = vec![UNK.to_string(), BOS.to_string(), EOS.to_string()];
        let reserved: BTreeSet<&str> = [UNK, BOS, EOS].into();
        let unique: BTreeSet<&String> =
            tokens.iter().filter(|t| !reserved.contains(t.as_str())).collect();
        words.extend(unique.into_iter().cloned());
        Vocab { words }
    }

    pub fn from_words(words: Vec<String>) -> Vocab {
        Vocab { words }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn unk_id(&self) -> usize {
        0
    }

    pub fn bos_id(&self) -> usize {
        1
    }

    pub fn eos_id(&self) -> usize {
        2
    }

    pub fn id(&self, token: &str) -> usize {
        self.words.iter().position(|w| w == token).unwrap_or(0)
    }

    pub fn ids(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t)).collect()
    }

    pub fn word(&self, id: usize) -> &str {
        &self.words[id]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp_path(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!("seqlab-data-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    #[test]
    fn classification_file_loads() {
        let path = tmp_path("cls.jsonl");
        fs::write(
            &path,
            "{\"text\": [\"a\", \"b\"], \"label\": \"x\"}\n{\"text\": \"c d\", \"label\": \"y\"}\n",
        )
        .unwrap();
        let ds = load_jsonl_dataset(&path, TaskKind::Classification).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.labels, vec!["x", "y"]);
        assert_eq!(ds.samples[1].tokens, vec!["c", "d"]);
    }

    #[test]
    fn missing_label_names_line() {
        let path = tmp_path("missing.jsonl");
        fs::write(&path, "{\"text\": [\"a\"], \"label\": \"x\"}\n{\"text\": [\"b\"]}\n").unwrap();
        match load_jsonl_dataset(&path, TaskKind::Classification) {
            Err(Error::Format { line, detail }) => {
                assert_eq!(line, 2);
                assert!(detail.contains("label"), "{detail}");
            }
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn relation_file_round_trips() {
        let path = tmp_path("rel.jsonl");
        let tree = DependencyTree::new(
            vec!["a".into(), "b".into(), "c".into()],
            vec![2, 0, 2],
            vec!["dep".into(), "root".into(), "dep".into()],
            vec!["X".into(), "Y".into(), "X".into()],
        )
        .unwrap();
        let sample = Sample {
            tokens: vec!["a".into(), "b".into(), "c".into()],
            tokens2: None,
            tree: Some(tree),
            e1: Some(Span::new(1, 1)),
            e2: Some(Span::new(3, 3)),
            target: None,
            label: Some("rel:part".into()),
        };
        let ds = LabeledDataset::new(TaskKind::Relation, vec![sample]).unwrap();
        write_jsonl_dataset(&path, &ds).unwrap();
        let back = load_jsonl_dataset(&path, TaskKind::Relation).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn pair_and_seq2seq_round_trip() {
        let pair_path = tmp_path("pair.jsonl");
        let pair = Sample {
            tokens: vec!["a".into()],
            tokens2: Some(vec!["b".into(), "c".into()]),
            tree: None,
            e1: None,
            e2: None,
            target: None,
            label: Some("yes".into()),
        };
        let ds = LabeledDataset::new(TaskKind::PairInference, vec![pair]).unwrap();
        write_jsonl_dataset(&pair_path, &ds).unwrap();
        assert_eq!(load_jsonl_dataset(&pair_path, TaskKind::PairInference).unwrap(), ds);

        let seq_path = tmp_path("seq.jsonl");
        let ds = generate_synthetic(SyntheticTask::Copy, 5, 4, 6, 11).unwrap();
        write_jsonl_dataset(&seq_path, &ds).unwrap();
        assert_eq!(load_jsonl_dataset(&seq_path, TaskKind::Seq2seqToy).unwrap(), ds);
    }

    #[test]
    fn marker_window_construction_laws() {
        let window = 2;
        let ds = generate_synthetic(
            SyntheticTask::MarkerWindow { window },
            500,
            10,
            8,
            21,
        )
        .unwrap();
        assert_eq!(ds.labels, vec!["0", "1"]);
        for s in &ds.samples {
            let anchor = s.tokens.iter().position(|t| t == ANCHOR_TOKEN).unwrap();
            let marker = s.tokens.iter().position(|t| t == MARKER_TOKEN).unwrap();
            let near = anchor.abs_diff(marker) <= window;
            assert_eq!(s.label.as_deref().unwrap() == "1", near);
            assert_eq!(s.tokens.iter().filter(|t| *t == ANCHOR_TOKEN).count(), 1);
            assert_eq!(s.tokens.iter().filter(|t| *t == MARKER_TOKEN).count(), 1);
        }
    }

    #[test]
    fn marker_window_is_roughly_balanced() {
        for seed in [1, 2, 3] {
            let ds = generate_synthetic(
                SyntheticTask::MarkerWindow { window: 2 },
                1000,
                12,
                10,
                seed,
            )
            .unwrap();
            let ones =
                ds.samples.iter().filter(|s| s.label.as_deref() == Some("1")).count();
            let frac = ones as f64 / 1000.0;
            assert!((0.45..=0.55).contains(&frac), "seed {seed}: balance {frac}");
        }
    }

    #[test]
    fn copy_targets_equal_sources() {
        let ds = generate_synthetic(SyntheticTask::Copy, 10, 6, 20, 5).unwrap();
        for s in &ds.samples {
            assert_eq!(s.target.as_ref().unwrap(), &s.tokens);
        }
        let rev = generate_synthetic(SyntheticTask::Reverse, 10, 6, 20, 5).unwrap();
        for s in &rev.samples {
            let mut r = s.tokens.clone();
            r.reverse();
            assert_eq!(s.target.as_ref().unwrap(), &r);
        }
    }

    #[test]
    fn generation_is_deterministic_per_seed() {
        let a = generate_synthetic(SyntheticTask::Copy, 20, 5, 10, 77).unwrap();
        let b = generate_synthetic(SyntheticTask::Copy, 20, 5, 10, 77).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic(SyntheticTask::Copy, 20, 5, 10, 78).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn vocab_too_small_rejected() {
        assert!(generate_synthetic(SyntheticTask::MarkerWindow { window: 1 }, 5, 6, 2, 0)
            .is_err());
    }

    #[test]
    fn vocab_reserves_specials_and_maps_unknowns() {
        let vocab = Vocab::build(&["b".into(), "a".into(), "b".into()]);
        assert_eq!(vocab.words()[..3], [UNK, BOS, EOS].map(String::from));
        assert_eq!(vocab.len(), 5);
        assert_eq!(vocab.id("a"), 3);
        assert_eq!(vocab.id("zzz"), vocab.unk_id());
    }
}
