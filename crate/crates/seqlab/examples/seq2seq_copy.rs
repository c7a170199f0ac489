//! Toy sequence transduction: an encoder-decoder with concatenated heads
//! learns to copy its input, evaluated with greedy decoding and corpus BLEU.
//!
//! Run with: `cargo run --release --example seq2seq_copy`

use seqlab::harness::{
    train, DataSettings, ExperimentConfig, GenerateSettings, ModelKind, ModelSettings, TaskKind,
    TrainingSettings,
};
use seqlab::tensor::Activation;

fn main() -> seqlab::Result<()> {
    let config = ExperimentConfig {
        task: TaskKind::Seq2seqToy,
        model: ModelSettings {
            kind: ModelKind::TransformerConcat,
            d_model: 16,
            d_k: 8,
            heads: 2,
            layers: 1,
            d_ffn: Some(32),
            kernel_sizes: vec![],
            filters: 0,
            roles: None,
            role_assignment: None,
            use_positions: true,
            tag_dim: 4,
            activation: Activation::Tanh,
        },
        training: TrainingSettings {
            epochs: 100,
            learning_rate: 0.1,
            seed: 11,
            stop_at_val_metric: Some(0.95),
        },
        data: DataSettings {
            generate: Some(GenerateSettings {
                task: "copy".into(),
                size: 2200,
                length: 8,
                vocab: 20,
                window: None,
            }),
            // 2000 train / 200 validation
            split: Some([10.0 / 11.0, 1.0 / 11.0, 0.0]),
            ..Default::default()
        },
        embeddings: None,
        phrases: None,
        model_path: None,
        base_dir: Default::default(),
    };

    let outcome = train(&config)?;
    for e in &outcome.history.epochs {
        println!("epoch {:>3}: train loss {:.4}, val BLEU {:.4}", e.epoch, e.train_loss, e.val_metric);
    }
    let best = outcome.history.best_val_metric().unwrap_or(0.0);
    println!("best corpus BLEU: {best:.4}");
    Ok(())
}
