//! Command implementations behind the thin `seqlab` binary. Every command
//! takes a JSON config; outputs land in the `--out` directory as
//! `metrics.json`, `predictions.tsv`, `history.csv`, and `model.json`.

use std::fs;
use std::path::{Path, PathBuf};

use crate::compositionality::{load_embeddings, read_phrase_tasks, score_tasks};
use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;
use crate::harness::data::write_jsonl_dataset;
use crate::harness::gradcheck::run_gradcheck;
use crate::harness::model::Model;
use crate::harness::train::{
    cross_validate, evaluate, predictions_to_tsv, train, load_full_dataset,
};

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path.display().to_string(), e))
}

fn load_config(path: &Path, seed_override: Option<u64>) -> Result<ExperimentConfig> {
    let mut config = ExperimentConfig::load(path)?;
    if let Some(seed) = seed_override {
        config.training.seed = seed;
    }
    Ok(config)
}

/// `train`: fit the model, then write `model.json`, validation
/// `metrics.json` / `predictions.tsv`, and the per-epoch `history.csv`.
pub fn cmd_train(config_path: &Path, seed: Option<u64>, out: &Path) -> Result<()> {
    let config = load_config(config_path, seed)?;
    ensure_dir(out)?;
    let outcome = train(&config)?;
    let evaluation = evaluate(&outcome.model, &outcome.val_data)?;
    outcome.model.save(&out.join("model.json"))?;
    write_file(&out.join("metrics.json"), &(evaluation.report.to_json_pretty() + "\n"))?;
    write_file(&out.join("predictions.tsv"), &predictions_to_tsv(&evaluation.predictions))?;
    write_file(&out.join("history.csv"), &outcome.history.to_csv())?;
    println!(
        "trained {} epochs; final val metric {}",
        outcome.history.epochs.len(),
        outcome.history.epochs.last().map_or(f64::NAN, |e| e.val_metric)
    );
    Ok(())
}

/// `eval`: score a saved model (config.model_path) on `data.test`
/// (falling back to `data.val`).
pub fn cmd_eval(config_path: &Path, seed: Option<u64>, out: &Path) -> Result<()> {
    let config = load_config(config_path, seed)?;
    ensure_dir(out)?;
    let model_path = config.model_path.as_ref().ok_or_else(|| {
        Error::Contract("eval needs model_path in the config".to_string())
    })?;
    let model = Model::load(&config.resolve_existing(model_path)?)?;
    let data_path = config
        .data
        .test
        .as_ref()
        .or(config.data.val.as_ref())
        .ok_or_else(|| Error::Contract("eval needs data.test or data.val".to_string()))?;
    let dataset = crate::harness::data::load_jsonl_dataset(
        &config.resolve_existing(data_path)?,
        config.task,
    )?;
    let evaluation = evaluate(&model, &dataset)?;
    write_file(&out.join("metrics.json"), &(evaluation.report.to_json_pretty() + "\n"))?;
    write_file(&out.join("predictions.tsv"), &predictions_to_tsv(&evaluation.predictions))?;
    println!("evaluated {} samples", evaluation.predictions.len());
    Ok(())
}

/// `cv`: k-fold cross-validation; metrics.json holds per-fold and mean
/// scores, predictions.tsv the out-of-fold prediction for every sample.
pub fn cmd_cv(config_path: &Path, k: usize, seed: Option<u64>, out: &Path) -> Result<()> {
    let config = load_config(config_path, seed)?;
    ensure_dir(out)?;
    let outcome = cross_validate(&config, k)?;
    let json = serde_json::to_string_pretty(&outcome)? + "\n";
    write_file(&out.join("metrics.json"), &json)?;
    write_file(&out.join("predictions.tsv"), &predictions_to_tsv(&outcome.predictions))?;
    println!("cv mean metric over {} folds: {}", outcome.k, outcome.mean_metric);
    Ok(())
}

/// `gradcheck`: finite-difference verification across every model kind.
pub fn cmd_gradcheck(config_path: Option<&Path>, out: Option<&Path>) -> Result<()> {
    let config = match config_path {
        Some(p) => Some(ExperimentConfig::load(p)?),
        None => None,
    };
    let report = run_gradcheck(config.as_ref())?;
    for e in &report.entries {
        println!("{}\t{}\t{}", e.model, e.group, e.worst_rel_err);
    }
    println!(
        "gradcheck {}: worst rel err {} (threshold {})",
        if report.pass { "PASS" } else { "FAIL" },
        report.worst(),
        report.threshold
    );
    if let Some(out) = out {
        ensure_dir(out)?;
        write_file(&out.join("metrics.json"), &(report.to_json_pretty() + "\n"))?;
    }
    if !report.pass {
        return Err(Error::Contract("gradient check failed".to_string()));
    }
    Ok(())
}

/// `score-compositionality`: phrase<TAB>score lines on stdout (and in
/// `scores.tsv` when an output directory is given).
pub fn cmd_score_compositionality(config_path: &Path, out: Option<&Path>) -> Result<()> {
    let config = ExperimentConfig::load(config_path)?;
    let embeddings_path = config.embeddings.as_ref().ok_or_else(|| {
        Error::Contract("score-compositionality needs 'embeddings' in the config".to_string())
    })?;
    let phrases_path = config.phrases.as_ref().ok_or_else(|| {
        Error::Contract("score-compositionality needs 'phrases' in the config".to_string())
    })?;
    let store = load_embeddings(&config.resolve_existing(embeddings_path)?)?;
    let tasks = read_phrase_tasks(&config.resolve_existing(phrases_path)?)?;
    let scores = score_tasks(&store, &tasks)?;
    let mut lines = String::new();
    for (phrase, score) in &scores {
        lines.push_str(&format!("{phrase}\t{score}\n"));
    }
    print!("{lines}");
    if let Some(out) = out {
        ensure_dir(out)?;
        write_file(&out.join("scores.tsv"), &lines)?;
    }
    Ok(())
}

/// `gen-data`: write the synthetic dataset described by `data.generate`
/// to `<out>/data.jsonl`.
pub fn cmd_gen_data(config_path: &Path, seed: Option<u64>, out: &Path) -> Result<()> {
    let config = load_config(config_path, seed)?;
    if config.data.generate.is_none() {
        return Err(Error::Contract("gen-data needs data.generate in the config".to_string()));
    }
    ensure_dir(out)?;
    let dataset = load_full_dataset(&config)?;
    let path: PathBuf = out.join("data.jsonl");
    write_jsonl_dataset(&path, &dataset)?;
    println!("wrote {} samples to {}", dataset.len(), path.display());
    Ok(())
}
