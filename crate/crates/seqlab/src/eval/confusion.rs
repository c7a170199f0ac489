//! Confusion matrix and the classification metrics derived from it.
//!
//! A metric whose denominator is zero is reported as `None` rather than 0,
//! so undefined values can never silently drag an average down.

use crate::error::{Error, Result};

/// Per-class tally of predictions: `counts[predicted][actual]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    labels: Vec<String>,
    counts: Vec<usize>,
}

/// Tally (predicted, actual) pairs against a fixed label set.
pub fn confusion_from_pairs<S: AsRef<str>>(
    pairs: &[(S, S)],
    labels: &[S],
) -> Result<ConfusionMatrix> {
    let labels: Vec<String> = labels.iter().map(|l| l.as_ref().to_string()).collect();
    let mut cm = ConfusionMatrix { counts: vec![0; labels.len() * labels.len()], labels };
    for (pred, actual) in pairs {
        cm.record(pred.as_ref(), actual.as_ref())?;
    }
    Ok(cm)
}

impl ConfusionMatrix {
    pub fn new(labels: &[&str]) -> ConfusionMatrix {
        let labels: Vec<String> = labels.iter().map(|s| s.to_string()).collect();
        ConfusionMatrix { counts: vec![0; labels.len() * labels.len()], labels }
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    fn index_of(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn record(&mut self, predicted: &str, actual: &str) -> Result<()> {
        let p = self.index_of(predicted)?;
        let a = self.index_of(actual)?;
        let n = self.labels.len();
        self.counts[p * n + a] += 1;
        Ok(())
    }

    pub fn count(&self, predicted: usize, actual: usize) -> usize {
        self.counts[predicted * self.labels.len() + actual]
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    fn diagonal(&self) -> usize {
        (0..self.labels.len()).map(|i| self.count(i, i)).sum()
    }

    /// `tp / (tp + fp + fn + tn)` — proportion of correct predictions.
    pub fn accuracy(&self) -> Option<f64> {
        let total = self.total();
        if total == 0 {
            return None;
        }
        Some(self.diagonal() as f64 / total as f64)
    }

    /// One-vs-rest counts for `class`: (tp, fp, fn, tn).
    pub fn one_vs_rest(&self, class: usize) -> (usize, usize, usize, usize) {
        let n = self.labels.len();
        let tp = self.count(class, class);
        let fp: usize = (0..n).filter(|&a| a != class).map(|a| self.count(class, a)).sum();
        let fn_: usize = (0..n).filter(|&p| p != class).map(|p| self.count(p, class)).sum();
        let tn = self.total() - tp - fp - fn_;
        (tp, fp, fn_, tn)
    }

    /// Binary view: (tp, fp, fn, tn) with the first label as the positive
    /// class. Only defined for two-label matrices.
    pub fn binary_counts(&self) -> Option<(usize, usize, usize, usize)> {
        if self.labels.len() != 2 {
            return None;
        }
        Some(self.one_vs_rest(0))
    }

    /// `tp / (tp + fp)`; `None` when the class was never predicted.
    pub fn precision(&self, class: usize) -> Option<f64> {
        let (tp, fp, _, _) = self.one_vs_rest(class);
        ratio(tp, tp + fp)
    }

    /// `tp / (tp + fn)`; `None` when the class never occurs.
    pub fn recall(&self, class: usize) -> Option<f64> {
        let (tp, _, fn_, _) = self.one_vs_rest(class);
        ratio(tp, tp + fn_)
    }

    /// Harmonic mean of precision and recall; `None` when either is
    /// undefined or both are zero.
    pub fn f1(&self, class: usize) -> Option<f64> {
        let p = self.precision(class)?;
        let r = self.recall(class)?;
        if p + r == 0.0 {
            return None;
        }
        Some(2.0 * p * r / (p + r))
    }

    /// Unweighted mean over classes; undefined if any class is undefined.
    pub fn macro_metric(&self, f: impl Fn(usize) -> Option<f64>) -> Option<f64> {
        let n = self.labels.len();
        let mut sum = 0.0;
        for c in 0..n {
            sum += f(c)?;
        }
        Some(sum / n as f64)
    }

    pub fn macro_precision(&self) -> Option<f64> {
        self.macro_metric(|c| self.precision(c))
    }

    pub fn macro_recall(&self) -> Option<f64> {
        self.macro_metric(|c| self.recall(c))
    }

    pub fn macro_f1(&self) -> Option<f64> {
        self.macro_metric(|c| self.f1(c))
    }

    /// Pooled one-vs-rest precision: `Σ tp / Σ (tp + fp)`.
    pub fn micro_precision(&self) -> Option<f64> {
        let (tp, den) = (0..self.labels.len())
            .map(|c| self.one_vs_rest(c))
            .fold((0, 0), |(t, d), (tp, fp, _, _)| (t + tp, d + tp + fp));
        ratio(tp, den)
    }

    /// Pooled one-vs-rest recall: `Σ tp / Σ (tp + fn)`.
    pub fn micro_recall(&self) -> Option<f64> {
        let (tp, den) = (0..self.labels.len())
            .map(|c| self.one_vs_rest(c))
            .fold((0, 0), |(t, d), (tp, _, fn_, _)| (t + tp, d + tp + fn_));
        ratio(tp, den)
    }

    pub fn micro_f1(&self) -> Option<f64> {
        let p = self.micro_precision()?;
        let r = self.micro_recall()?;
        if p + r == 0.0 {
            return None;
        }
        Some(2.0 * p * r / (p + r))
    }
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    if den == 0 {
        None
    } else {
        Some(num as f64 / den as f64)
    }
}
