//! Experiment harness: configs, datasets, the model zoo, training and
//! evaluation loops, cross-validation, model-level gradient checks, and the
//! command layer the `seqlab` binary calls into.

pub mod config;
pub mod data;
pub mod gradcheck;
pub mod model;
pub mod run;
pub mod train;

pub use config::{
    DataSettings, ExperimentConfig, GenerateSettings, ModelKind, ModelSettings, TaskKind,
    TrainingSettings,
};
pub use data::{
    generate_synthetic, load_jsonl_dataset, write_jsonl_dataset, LabeledDataset, Sample,
    SyntheticTask, Vocab,
};
pub use gradcheck::{run_gradcheck, GradcheckReport, GRADCHECK_THRESHOLD};
pub use model::{resolve_roles, ClassifierModel, Model, Seq2SeqModel};
pub use train::{
    cross_validate, evaluate, headline_metric, train, CvOutcome, Evaluation, History,
    PredictionRow, TrainOutcome,
};
