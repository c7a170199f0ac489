//! The JSON metric report. Field set is fixed and per-class entries live in
//! a sorted map, so serializing the same report twice is byte-identical.
//! Undefined metrics serialize as `null`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ConfusionMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    /// How many samples actually carry this label.
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub task: String,
    pub samples: usize,
    pub accuracy: Option<f64>,
    pub macro_precision: Option<f64>,
    pub macro_recall: Option<f64>,
    pub macro_f1: Option<f64>,
    pub micro_precision: Option<f64>,
    pub micro_recall: Option<f64>,
    pub micro_f1: Option<f64>,
    pub per_class: BTreeMap<String, ClassMetrics>,
    /// Corpus BLEU; only present for sequence tasks.
    pub bleu: Option<f64>,
}

impl MetricReport {
    pub fn from_confusion(task: &str, cm: &ConfusionMatrix) -> MetricReport {
        let mut per_class = BTreeMap::new();
        for (c, label) in cm.labels().iter().enumerate() {
            let (tp, _, fn_, _) = cm.one_vs_rest(c);
            per_class.insert(
                label.clone(),
                ClassMetrics {
                    precision: cm.precision(c),
                    recall: cm.recall(c),
                    f1: cm.f1(c),
                    support: tp + fn_,
                },
            );
        }
        MetricReport {
            task: task.to_string(),
            samples: cm.total(),
            accuracy: cm.accuracy(),
            macro_precision: cm.macro_precision(),
            macro_recall: cm.macro_recall(),
            macro_f1: cm.macro_f1(),
            micro_precision: cm.micro_precision(),
            micro_recall: cm.micro_recall(),
            micro_f1: cm.micro_f1(),
            per_class,
            bleu: None,
        }
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::confusion_from_pairs;

    #[test]
    fn report_serialization_is_stable_and_null_for_undefined() {
        let pairs = [("a", "a"), ("a", "b")];
        let cm = confusion_from_pairs(&pairs, &["a", "b"]).unwrap();
        let report = MetricReport::from_confusion("classification", &cm);
        let one = report.to_json_pretty();
        let two = report.to_json_pretty();
        assert_eq!(one, two);
        assert!(one.contains("\"precision\": null"), "undefined must render as null:\n{one}");
        let back: MetricReport = serde_json::from_str(&one).unwrap();
        assert_eq!(back, report);
    }
}
