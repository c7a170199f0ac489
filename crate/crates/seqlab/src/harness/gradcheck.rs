//! Model-level gradient verification: every model kind is rebuilt at toy
//! dimensions and every parameter group's analytic gradient is compared
//! against central finite differences of the batch loss.

use serde::{Deserialize, Serialize};

use crate::encoders::{DependencyTree, Span};
use crate::error::{Error, Result};
use crate::gradcheck::{numeric_grad, worst_rel_err, DEFAULT_STEP};
use crate::rng::Prng;
use crate::tensor::Tape;

use super::config::{ExperimentConfig, ModelKind, ModelSettings, TaskKind};
use super::data::{LabeledDataset, Sample};
use super::model::Model;
use crate::attention::Role;

pub const GRADCHECK_THRESHOLD: f64 = 1e-4;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GradcheckEntry {
    pub model: String,
    pub group: String,
    pub worst_rel_err: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GradcheckReport {
    pub threshold: f64,
    pub pass: bool,
    pub entries: Vec<GradcheckEntry>,
}

impl GradcheckReport {
    pub fn worst(&self) -> f64 {
        self.entries.iter().map(|e| e.worst_rel_err).fold(0.0, f64::max)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn tiny_settings(kind: ModelKind, base: Option<&ModelSettings>) -> Result<ModelSettings> {
    let (d_model, d_k, heads) = match base {
        Some(s) => (s.d_model, s.d_k, s.heads),
        None => (8, 4, 2),
    };
    if d_model > 16 {
        return Err(Error::Contract(format!(
            "gradcheck requires d_model <= 16, got {d_model}"
        )));
    }
    Ok(ModelSettings {
        kind,
        d_model,
        d_k,
        heads,
        layers: 1,
        d_ffn: Some(d_model + 4),
        kernel_sizes: vec![1, 2],
        filters: 3,
        roles: None,
        role_assignment: None,
        use_positions: false,
        tag_dim: 3,
        activation: crate::tensor::Activation::Tanh,
    })
}

fn fixture_tree(tokens: &[&str]) -> DependencyTree {
    // star tree: first token is the root, the rest attach to it
    let n = tokens.len();
    let heads: Vec<usize> = (0..n).map(|i| if i == 0 { 0 } else { 1 }).collect();
    let mut deprels = vec!["root".to_string()];
    deprels.extend(["nsubj", "obj", "det", "advmod"].iter().cycle().take(n - 1).map(|s| s.to_string()));
    let pos: Vec<String> =
        ["VERB", "NOUN", "DET"].iter().cycle().take(n).map(|s| s.to_string()).collect();
    DependencyTree::new(
        tokens.iter().map(|s| s.to_string()).collect(),
        heads,
        deprels,
        pos,
    )
    .expect("fixture tree")
}

fn classification_fixture(with_trees: bool) -> LabeledDataset {
    let texts: [&[&str]; 3] = [&["sun", "warm", "sky"], &["rain", "cold"], &["sun", "cold", "wind", "sky"]];
    let labels = ["a", "b", "a"];
    let samples = texts
        .iter()
        .zip(labels)
        .map(|(toks, label)| {
            let mut s =
                Sample::classification(toks.iter().map(|t| t.to_string()).collect(), label);
            if with_trees {
                s.tree = Some(fixture_tree(toks));
            }
            s
        })
        .collect();
    LabeledDataset::new(TaskKind::Classification, samples).expect("fixture")
}

fn relation_fixture() -> LabeledDataset {
    let mk = |toks: &[&str], e1: (usize, usize), e2: (usize, usize), label: &str| Sample {
        tokens: toks.iter().map(|t| t.to_string()).collect(),
        tokens2: None,
        tree: Some(fixture_tree(toks)),
        e1: Some(Span::new(e1.0, e1.1)),
        e2: Some(Span::new(e2.0, e2.1)),
        target: None,
        label: Some(label.to_string()),
    };
    LabeledDataset::new(
        TaskKind::Relation,
        vec![
            mk(&["corp", "bought", "startup", "fast"], (1, 1), (3, 3), "acquired"),
            mk(&["founder", "left", "corp"], (1, 1), (3, 3), "left"),
        ],
    )
    .expect("fixture")
}

fn seq2seq_fixture() -> LabeledDataset {
    let mk = |src: &[&str]| {
        Sample::seq2seq(
            src.iter().map(|t| t.to_string()).collect(),
            src.iter().map(|t| t.to_string()).collect(),
        )
    };
    LabeledDataset::new(TaskKind::Seq2seqToy, vec![mk(&["w1", "w2", "w3"]), mk(&["w2", "w0"])])
        .expect("fixture")
}

fn batch_loss(model: &Model, dataset: &LabeledDataset) -> f64 {
    let tape = Tape::new();
    let losses: Vec<_> = dataset
        .samples
        .iter()
        .map(|s| model.sample_loss(&tape, s).expect("fixture forward"))
        .collect();
    let stacked = tape.concat(&losses, 0).expect("stack losses");
    tape.mean_all(&stacked).entry(0)
}

fn check_model(
    name: &str,
    model: &Model,
    dataset: &LabeledDataset,
    entries: &mut Vec<GradcheckEntry>,
) -> Result<()> {
    let params = model.params();
    for (_, p) in &params {
        p.clear_grad();
    }
    let tape = Tape::new();
    let losses: Vec<_> = dataset
        .samples
        .iter()
        .map(|s| model.sample_loss(&tape, s))
        .collect::<Result<_>>()?;
    let stacked = tape.concat(&losses, 0)?;
    let loss = tape.mean_all(&stacked);
    tape.backward(&loss)?;

    for (group, p) in &params {
        let analytic = p.grad().unwrap_or_else(|| vec![0.0; p.numel()]);
        let numeric = numeric_grad(p, || batch_loss(model, dataset), DEFAULT_STEP);
        entries.push(GradcheckEntry {
            model: name.to_string(),
            group: group.clone(),
            worst_rel_err: worst_rel_err(&analytic, &numeric),
        });
        p.clear_grad();
    }
    Ok(())
}

/// Build every model kind at toy size and finite-difference every parameter
/// group. `config`, when given, only contributes its (clamped) dimensions.
pub fn run_gradcheck(config: Option<&ExperimentConfig>) -> Result<GradcheckReport> {
    let base = config.map(|c| &c.model);
    let mut entries = Vec::new();

    for kind in ModelKind::ALL {
        let mut settings = tiny_settings(kind, base)?;
        let (task, dataset) = match kind {
            ModelKind::BlockRelation => (TaskKind::Relation, relation_fixture()),
            ModelKind::MsEncoder => (TaskKind::Classification, classification_fixture(true)),
            ModelKind::TransformerMasked => {
                (TaskKind::Classification, classification_fixture(true))
            }
            _ => (TaskKind::Classification, classification_fixture(false)),
        };
        let roles = match kind {
            ModelKind::TransformerMasked => {
                let mut roles = vec![Role::Local(1), Role::Syntactic];
                roles.truncate(settings.heads);
                while roles.len() < settings.heads {
                    roles.push(Role::Forward);
                }
                Some(roles)
            }
            _ => None,
        };
        settings.kind = kind;
        let mut rng = Prng::seed_from_u64(31 + kind as u64);
        let model = Model::build(&settings, task, roles, &[&dataset], &mut rng)?;
        check_model(kind.name(), &model, &dataset, &mut entries)?;
    }

    // the encoder-decoder path has its own parameters; check it too
    let settings = tiny_settings(ModelKind::TransformerConcat, base)?;
    let dataset = seq2seq_fixture();
    let mut rng = Prng::seed_from_u64(97);
    let model = Model::build(&settings, TaskKind::Seq2seqToy, None, &[&dataset], &mut rng)?;
    check_model("seq2seq_concat", &model, &dataset, &mut entries)?;

    let worst = entries.iter().map(|e| e.worst_rel_err).fold(0.0, f64::max);
    Ok(GradcheckReport { threshold: GRADCHECK_THRESHOLD, pass: worst < GRADCHECK_THRESHOLD, entries })
}
