//! Deterministic data splitting and k-fold cross-validation, end to end:
//! shuffle, partition into folds, rotate each fold through validation, and
//! report the mean of the per-fold scores.
//!
//! Run with: `cargo run --release --example cross_validation`

use seqlab::eval::{kfold_split, split_dataset};
use seqlab::harness::{
    cross_validate, DataSettings, ExperimentConfig, GenerateSettings, ModelKind, ModelSettings,
    TaskKind, TrainingSettings,
};
use seqlab::tensor::Activation;

fn main() -> seqlab::Result<()> {
    // plain splitting: deterministic given the seed
    let (train, val, test) = split_dataset(10, (0.6, 0.2, 0.2), 42)?;
    println!("split of 10 at 60/20/20: train {train:?}, val {val:?}, test {test:?}");

    let assignment = kfold_split(10, 5, 42)?;
    println!("5-fold assignment: {:?}", assignment.folds());

    // the full procedure on a synthetic classification task
    let config = ExperimentConfig {
        task: TaskKind::Classification,
        model: ModelSettings {
            kind: ModelKind::TransformerMasked,
            d_model: 16,
            d_k: 8,
            heads: 2,
            layers: 1,
            d_ffn: Some(32),
            kernel_sizes: vec![],
            filters: 0,
            roles: Some(vec!["local:2".into(), "local:2".into()]),
            role_assignment: None,
            use_positions: false,
            tag_dim: 4,
            activation: Activation::Tanh,
        },
        training: TrainingSettings {
            epochs: 10,
            learning_rate: 0.5,
            seed: 9,
            stop_at_val_metric: None,
        },
        data: DataSettings {
            generate: Some(GenerateSettings {
                task: "marker_window".into(),
                size: 200,
                length: 10,
                vocab: 10,
                window: Some(2),
            }),
            ..Default::default()
        },
        embeddings: None,
        phrases: None,
        model_path: None,
        base_dir: Default::default(),
    };
    let outcome = cross_validate(&config, 4)?;
    for (fold, metric) in outcome.fold_metrics.iter().enumerate() {
        println!("fold {fold}: val accuracy {metric:.3}");
    }
    println!("mean of {} folds: {:.3}", outcome.k, outcome.mean_metric);
    Ok(())
}
