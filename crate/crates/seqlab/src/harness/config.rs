//! Experiment configuration: a single JSON document describing the task,
//! the model, training, and data sources. All paths are resolved relative
//! to the config file's directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Activation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Classification,
    PairInference,
    Relation,
    Seq2seqToy,
    Compositionality,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Rnn,
    CnnMultiscale,
    TransformerConcat,
    TransformerMasked,
    TransformerGated,
    MsEncoder,
    BlockRelation,
}

impl ModelKind {
    pub const ALL: [ModelKind; 7] = [
        ModelKind::Rnn,
        ModelKind::CnnMultiscale,
        ModelKind::TransformerConcat,
        ModelKind::TransformerMasked,
        ModelKind::TransformerGated,
        ModelKind::MsEncoder,
        ModelKind::BlockRelation,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Rnn => "rnn",
            ModelKind::CnnMultiscale => "cnn_multiscale",
            ModelKind::TransformerConcat => "transformer_concat",
            ModelKind::TransformerMasked => "transformer_masked",
            ModelKind::TransformerGated => "transformer_gated",
            ModelKind::MsEncoder => "ms_encoder",
            ModelKind::BlockRelation => "block_relation",
        }
    }
}

fn default_d_model() -> usize {
    16
}
fn default_d_k() -> usize {
    8
}
fn default_heads() -> usize {
    2
}
fn default_layers() -> usize {
    1
}
fn default_kernel_sizes() -> Vec<usize> {
    vec![2, 3]
}
fn default_filters() -> usize {
    8
}
fn default_true() -> bool {
    true
}
fn default_tag_dim() -> usize {
    4
}
fn default_activation() -> Activation {
    Activation::Tanh
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSettings {
    pub kind: ModelKind,
    #[serde(default = "default_d_model")]
    pub d_model: usize,
    #[serde(default = "default_d_k")]
    pub d_k: usize,
    #[serde(default = "default_heads")]
    pub heads: usize,
    #[serde(default = "default_layers")]
    pub layers: usize,
    /// Feed-forward width; defaults to `2 * d_model`.
    #[serde(default)]
    pub d_ffn: Option<usize>,
    #[serde(default = "default_kernel_sizes")]
    pub kernel_sizes: Vec<usize>,
    #[serde(default = "default_filters")]
    pub filters: usize,
    /// Inline per-head roles (`"local:2"`, `"self"`, ...).
    #[serde(default)]
    pub roles: Option<Vec<String>>,
    /// Role assignment file, one `head<TAB>role` line per head.
    #[serde(default)]
    pub role_assignment: Option<PathBuf>,
    #[serde(default = "default_true")]
    pub use_positions: bool,
    /// Width of the deprel and POS tag embeddings (block_relation).
    #[serde(default = "default_tag_dim")]
    pub tag_dim: usize,
    #[serde(default = "default_activation")]
    pub activation: Activation,
}

impl ModelSettings {
    pub fn d_ffn(&self) -> usize {
        self.d_ffn.unwrap_or(2 * self.d_model)
    }

    pub fn kernel_pairs(&self) -> Vec<(usize, usize)> {
        self.kernel_sizes.iter().map(|&h| (h, self.filters)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_model == 0 || self.d_k == 0 || self.heads == 0 || self.layers == 0 {
            return Err(Error::Contract(
                "model dimensions and layer/head counts must be positive".to_string(),
            ));
        }
        if self.kernel_sizes.is_empty() && self.kind == ModelKind::CnnMultiscale {
            return Err(Error::Contract("cnn model needs kernel sizes".to_string()));
        }
        Ok(())
    }
}

fn default_epochs() -> usize {
    10
}
fn default_lr() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSettings {
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default)]
    pub seed: u64,
    /// Stop as soon as the validation metric reaches this value.
    #[serde(default)]
    pub stop_at_val_metric: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateSettings {
    /// `marker_window`, `copy`, or `reverse`.
    pub task: String,
    pub size: usize,
    pub length: usize,
    pub vocab: usize,
    #[serde(default)]
    pub window: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct DataSettings {
    #[serde(default)]
    pub train: Option<PathBuf>,
    #[serde(default)]
    pub val: Option<PathBuf>,
    #[serde(default)]
    pub test: Option<PathBuf>,
    /// Generate a synthetic dataset instead of reading files.
    #[serde(default)]
    pub generate: Option<GenerateSettings>,
    /// Train/val/test ratios applied when only one source is given.
    #[serde(default)]
    pub split: Option<[f64; 3]>,
    #[serde(default)]
    pub split_seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub task: TaskKind,
    pub model: ModelSettings,
    #[serde(default = "TrainingSettings::default_settings")]
    pub training: TrainingSettings,
    #[serde(default)]
    pub data: DataSettings,
    /// Word-vector file (compositionality scoring).
    #[serde(default)]
    pub embeddings: Option<PathBuf>,
    /// Phrase task JSONL file (compositionality scoring).
    #[serde(default)]
    pub phrases: Option<PathBuf>,
    /// A previously trained model, for `eval`.
    #[serde(default)]
    pub model_path: Option<PathBuf>,
    /// Directory the config was loaded from; never serialized.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl TrainingSettings {
    fn default_settings() -> TrainingSettings {
        TrainingSettings {
            epochs: default_epochs(),
            learning_rate: default_lr(),
            seed: 0,
            stop_at_val_metric: None,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let text =
            fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut config: ExperimentConfig = serde_json::from_str(&text)?;
        config.base_dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        config.model.validate()?;
        Ok(config)
    }

    /// Resolve a config-relative path.
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Resolve and require that the file exists.
    pub fn resolve_existing(&self, p: &Path) -> Result<PathBuf> {
        let full = self.resolve(p);
        if !full.exists() {
            return Err(Error::Contract(format!(
                "referenced file does not exist: {}",
                full.display()
            )));
        }
        Ok(full)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}
