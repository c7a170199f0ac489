//! Role masks change what heads can compute: on the marker-window task
//! (label 1 iff the marker token falls within w positions of the anchor), a
//! one-layer model with local(w) heads learns the rule, while the same model
//! restricted to self-only heads cannot beat chance.
//!
//! Run with: `cargo run --release --example train_marker_window`

use seqlab::harness::{
    train, DataSettings, ExperimentConfig, GenerateSettings, ModelKind, ModelSettings, TaskKind,
    TrainingSettings,
};
use seqlab::tensor::Activation;

fn config(roles: &[&str]) -> ExperimentConfig {
    ExperimentConfig {
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
            roles: Some(roles.iter().map(|r| r.to_string()).collect()),
            role_assignment: None,
            // the masks themselves carry the positional structure
            use_positions: false,
            tag_dim: 4,
            activation: Activation::Tanh,
        },
        training: TrainingSettings {
            epochs: 50,
            learning_rate: 0.5,
            seed: 7,
            stop_at_val_metric: None,
        },
        data: DataSettings {
            generate: Some(GenerateSettings {
                task: "marker_window".into(),
                size: 1200,
                length: 12,
                vocab: 12,
                window: Some(2),
            }),
            // 1000 train / 200 validation
            split: Some([5.0 / 6.0, 1.0 / 6.0, 0.0]),
            ..Default::default()
        },
        embeddings: None,
        phrases: None,
        model_path: None,
        base_dir: Default::default(),
    }
}

fn main() -> seqlab::Result<()> {
    for (name, roles) in [("local(2) heads", ["local:2", "local:2"]), ("self-only heads", ["self", "self"])] {
        let outcome = train(&config(&roles))?;
        let best = outcome.history.best_val_metric().unwrap_or(0.0);
        let last = outcome.history.epochs.last().map_or(0.0, |e| e.val_metric);
        println!("{name}: best val accuracy {best:.3}, final {last:.3}");
        for e in outcome.history.epochs.iter().step_by(10) {
            println!("  epoch {:>2}: train loss {:.4}, val accuracy {:.3}", e.epoch, e.train_loss, e.val_metric);
        }
    }
    Ok(())
}
