//! Training and evaluation loops. Plain minibatch SGD with cross-entropy;
//! everything random flows from the run seed, so a fixed (seed, config)
//! pair reproduces losses and metrics bit for bit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{kfold_split, split_dataset, BleuStats, MetricReport};
use crate::rng::Prng;
use crate::tensor::{sgd_step, Tape};

use super::config::{ExperimentConfig, TaskKind};
use super::data::{generate_synthetic, load_jsonl_dataset, LabeledDataset, SyntheticTask};
use super::model::{resolve_roles, Model};

/// Full dataset when small, minibatches of 32 otherwise.
pub fn batch_size(n: usize) -> usize {
    if n <= 256 {
        n
    } else {
        32
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_metric: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochStats>,
}

impl History {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_metric\n");
        for e in &self.epochs {
            out.push_str(&format!("{},{},{}\n", e.epoch, e.train_loss, e.val_metric));
        }
        out
    }

    pub fn best_val_metric(&self) -> Option<f64> {
        self.epochs.iter().map(|e| e.val_metric).fold(None, |best, v| match best {
            Some(b) if b >= v => Some(b),
            _ => Some(v),
        })
    }
}

pub struct TrainOutcome {
    pub model: Model,
    pub history: History,
    pub train_data: LabeledDataset,
    pub val_data: LabeledDataset,
}

/// Load or generate the dataset and cut it into train/val parts.
pub fn prepare_datasets(
    config: &ExperimentConfig,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    let full = load_full_dataset(config)?;
    if let Some(val_path) = &config.data.val {
        let val = load_jsonl_dataset(&config.resolve_existing(val_path)?, config.task)?;
        return Ok((full, val));
    }
    let ratios = config.data.split.unwrap_or([0.8, 0.2, 0.0]);
    let split_seed = config.data.split_seed.unwrap_or(seed);
    let (train_idx, val_idx, _test_idx) =
        split_dataset(full.len(), (ratios[0], ratios[1], ratios[2]), split_seed)?;
    if val_idx.is_empty() {
        return Err(Error::Contract(
            "training needs a validation set: give data.val or a nonzero val ratio".to_string(),
        ));
    }
    Ok((full.subset(&train_idx)?, full.subset(&val_idx)?))
}

/// The dataset named by `data.generate` or `data.train`.
pub fn load_full_dataset(config: &ExperimentConfig) -> Result<LabeledDataset> {
    if let Some(gen) = &config.data.generate {
        let task = SyntheticTask::parse(&gen.task, gen.window)?;
        if task.task_kind() != config.task {
            return Err(Error::Contract(format!(
                "synthetic task '{}' produces {:?} data but the config task is {:?}",
                gen.task,
                task.task_kind(),
                config.task
            )));
        }
        return generate_synthetic(task, gen.size, gen.length, gen.vocab, config.training.seed);
    }
    let train_path = config.data.train.as_ref().ok_or_else(|| {
        Error::Contract("config needs data.train or data.generate".to_string())
    })?;
    load_jsonl_dataset(&config.resolve_existing(train_path)?, config.task)
}

/// Train per the config: prepares data, builds the model, runs the epochs.
pub fn train(config: &ExperimentConfig) -> Result<TrainOutcome> {
    let seed = config.training.seed;
    let (train_ds, val_ds) = prepare_datasets(config, seed)?;
    let roles = resolve_roles(config)?;
    let mut rng = Prng::seed_from_u64(seed);
    let model = Model::build(&config.model, config.task, roles, &[&train_ds, &val_ds], &mut rng)?;
    let (model, history) = fit(config, model, &train_ds, &val_ds, &mut rng)?;
    Ok(TrainOutcome { model, history, train_data: train_ds, val_data: val_ds })
}

/// The inner loop: epochs of shuffled minibatch SGD plus one validation
/// evaluation per epoch. Zero epochs returns the initial model untouched.
pub fn fit(
    config: &ExperimentConfig,
    model: Model,
    train_ds: &LabeledDataset,
    val_ds: &LabeledDataset,
    rng: &mut Prng,
) -> Result<(Model, History)> {
    let mut model = model;
    if let Model::Seq2Seq(m) = &mut model {
        let longest = train_ds
            .samples
            .iter()
            .chain(&val_ds.samples)
            .map(|s| s.target.as_ref().map_or(0, Vec::len))
            .max()
            .unwrap_or(0);
        m.max_decode_len = longest + 2;
    }
    let params: Vec<_> = model.params().into_iter().map(|(_, t)| t).collect();
    let n = train_ds.len();
    let batch = batch_size(n);
    let lr = config.training.learning_rate;
    let mut history = History::default();

    for epoch in 0..config.training.epochs {
        let mut order: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(batch) {
            let tape = Tape::new();
            let mut losses = Vec::with_capacity(chunk.len());
            for &i in chunk {
                losses.push(model.sample_loss(&tape, &train_ds.samples[i])?);
            }
            let stacked = tape.concat(&losses, 0)?;
            let batch_loss = tape.mean_all(&stacked);
            let loss_value = batch_loss.entry(0);
            if !loss_value.is_finite() {
                return Err(Error::Diverged { epoch, loss: loss_value });
            }
            loss_sum += loss_value * chunk.len() as f64;
            tape.backward(&batch_loss)?;
            sgd_step(&params, lr)?;
        }
        let val_metric = headline_metric(&model, val_ds)?;
        history.epochs.push(EpochStats {
            epoch,
            train_loss: loss_sum / n as f64,
            val_metric,
        });
        if let Some(target) = config.training.stop_at_val_metric {
            if val_metric >= target {
                break;
            }
        }
    }
    Ok((model, history))
}

/// Accuracy for classifiers, corpus BLEU for sequence models.
pub fn headline_metric(model: &Model, dataset: &LabeledDataset) -> Result<f64> {
    let evaluation = evaluate(model, dataset)?;
    match model {
        Model::Classifier(_) => evaluation
            .report
            .accuracy
            .ok_or_else(|| Error::Contract("accuracy undefined on this dataset".to_string())),
        Model::Seq2Seq(_) => evaluation
            .report
            .bleu
            .ok_or_else(|| Error::Contract("BLEU missing from sequence report".to_string())),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub index: usize,
    pub predicted: String,
    pub actual: String,
}

pub struct Evaluation {
    pub report: MetricReport,
    pub predictions: Vec<PredictionRow>,
}

pub fn predictions_to_tsv(rows: &[PredictionRow]) -> String {
    let mut out = String::new();
    for r in rows {
        out.push_str(&format!("{}\t{}\t{}\n", r.index, r.predicted, r.actual));
    }
    out
}

/// Score a model on a dataset: per-sample predictions plus the metric
/// report. Fails on an empty dataset or a label outside the model's set.
pub fn evaluate(model: &Model, dataset: &LabeledDataset) -> Result<Evaluation> {
    if dataset.is_empty() {
        return Err(Error::Contract("cannot evaluate on an empty dataset".to_string()));
    }
    match model {
        Model::Classifier(m) => {
            for label in &dataset.labels {
                if !m.labels.contains(label) {
                    return Err(Error::Contract(format!(
                        "dataset label '{label}' is outside the model's label set"
                    )));
                }
            }
            let mut rows = Vec::with_capacity(dataset.len());
            let mut pairs = Vec::with_capacity(dataset.len());
            for (i, sample) in dataset.samples.iter().enumerate() {
                let actual = sample.label.clone().ok_or_else(|| {
                    Error::Contract(format!("sample {i} has no label"))
                })?;
                let predicted = m.predict(sample)?;
                pairs.push((predicted.clone(), actual.clone()));
                rows.push(PredictionRow { index: i, predicted, actual });
            }
            let cm = crate::eval::confusion_from_pairs(&pairs, &m.labels.clone())?;
            let report = MetricReport::from_confusion(task_name(dataset.task), &cm);
            Ok(Evaluation { report, predictions: rows })
        }
        Model::Seq2Seq(m) => {
            let mut stats = BleuStats::new(4, None)?;
            let mut rows = Vec::with_capacity(dataset.len());
            for (i, sample) in dataset.samples.iter().enumerate() {
                let target = sample.target.clone().ok_or_else(|| {
                    Error::Contract(format!("sample {i} has no target sequence"))
                })?;
                let decoded = m.greedy_decode(&sample.tokens)?;
                if !decoded.is_empty() {
                    stats.accumulate(&decoded, std::slice::from_ref(&target))?;
                }
                rows.push(PredictionRow {
                    index: i,
                    predicted: decoded.join(" "),
                    actual: target.join(" "),
                });
            }
            let mut report = MetricReport {
                task: task_name(dataset.task).to_string(),
                samples: dataset.len(),
                accuracy: None,
                macro_precision: None,
                macro_recall: None,
                macro_f1: None,
                micro_precision: None,
                micro_recall: None,
                micro_f1: None,
                per_class: Default::default(),
                bleu: None,
            };
            report.bleu = Some(stats.score());
            Ok(Evaluation { report, predictions: rows })
        }
    }
}

fn task_name(task: TaskKind) -> &'static str {
    match task {
        TaskKind::Classification => "classification",
        TaskKind::PairInference => "pair_inference",
        TaskKind::Relation => "relation",
        TaskKind::Seq2seqToy => "seq2seq_toy",
        TaskKind::Compositionality => "compositionality",
    }
}

// ───────────────────────── cross-validation ─────────────────────────

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvOutcome {
    pub k: usize,
    pub fold_metrics: Vec<f64>,
    pub mean_metric: f64,
    pub fold_reports: Vec<MetricReport>,
    #[serde(skip)]
    pub predictions: Vec<PredictionRow>,
}

/// The k-fold procedure: shuffle, partition, rotate each fold through the
/// validation role, train on the rest, and average the k validation scores.
pub fn cross_validate(config: &ExperimentConfig, k: usize) -> Result<CvOutcome> {
    let full = load_full_dataset(config)?;
    let assignment = kfold_split(full.len(), k, config.training.seed)?;
    let roles = resolve_roles(config)?;

    let mut fold_metrics = Vec::with_capacity(k);
    let mut fold_reports = Vec::with_capacity(k);
    let mut predictions = Vec::with_capacity(full.len());
    for (fold, (train_idx, val_idx)) in assignment.splits().into_iter().enumerate() {
        let train_ds = full.subset(&train_idx)?;
        let val_ds = full.subset(&val_idx)?;
        let mut rng = Prng::seed_from_u64(config.training.seed.wrapping_add(fold as u64));
        let model =
            Model::build(&config.model, config.task, roles.clone(), &[&full], &mut rng)?;
        let (model, _) = fit(config, model, &train_ds, &val_ds, &mut rng)?;
        let evaluation = evaluate(&model, &val_ds)?;
        let metric = match &model {
            Model::Classifier(_) => evaluation.report.accuracy.unwrap_or(0.0),
            Model::Seq2Seq(_) => evaluation.report.bleu.unwrap_or(0.0),
        };
        fold_metrics.push(metric);
        fold_reports.push(evaluation.report);
        for row in evaluation.predictions {
            predictions.push(PredictionRow {
                index: val_idx[row.index],
                predicted: row.predicted,
                actual: row.actual,
            });
        }
    }
    predictions.sort_by_key(|r| r.index);
    let mean_metric = fold_metrics.iter().sum::<f64>() / k as f64;
    Ok(CvOutcome { k, fold_metrics, mean_metric, fold_reports, predictions })
}
