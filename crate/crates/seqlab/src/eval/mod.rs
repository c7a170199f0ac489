//! Evaluation machinery: confusion-matrix classification metrics, BLEU for
//! sequence outputs, and deterministic data splitting / k-fold rotation.

mod bleu;
mod confusion;
mod report;
mod splits;

pub use bleu::{bleu, BleuStats};
pub use confusion::{confusion_from_pairs, ConfusionMatrix};
pub use report::{ClassMetrics, MetricReport};
pub use splits::{kfold_split, split_dataset, FoldAssignment};
