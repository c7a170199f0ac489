//! BLEU: geometric mean of modified (clipped) n-gram precisions times an
//! exponential brevity penalty. Candidate counts are clipped by the maximum
//! count of the n-gram in any single reference; the effective reference
//! length is the one closest to the candidate (ties to the shorter).

use std::collections::HashMap;
use std::hash::Hash;

use crate::error::{Error, Result};

/// Accumulated corpus-level BLEU sufficient statistics.
#[derive(Debug, Clone)]
pub struct BleuStats {
    max_n: usize,
    weights: Vec<f64>,
    matches: Vec<usize>,
    totals: Vec<usize>,
    candidate_len: usize,
    effective_ref_len: usize,
}

impl BleuStats {
    /// Uniform weights when `weights` is `None`. Weights must sum to 1.
    pub fn new(max_n: usize, weights: Option<&[f64]>) -> Result<BleuStats> {
        if max_n == 0 {
            return Err(Error::Contract("BLEU needs max_n >= 1".to_string()));
        }
        let weights = match weights {
            Some(w) => {
                if w.len() != max_n {
                    return Err(Error::Contract(format!(
                        "{} weights for max_n {max_n}",
                        w.len()
                    )));
                }
                let sum: f64 = w.iter().sum();
                if (sum - 1.0).abs() > 1e-9 || w.iter().any(|&x| x < 0.0) {
                    return Err(Error::Contract(format!(
                        "BLEU weights must be non-negative and sum to 1, got sum {sum}"
                    )));
                }
                w.to_vec()
            }
            None => vec![1.0 / max_n as f64; max_n],
        };
        Ok(BleuStats {
            max_n,
            weights,
            matches: vec![0; max_n],
            totals: vec![0; max_n],
            candidate_len: 0,
            effective_ref_len: 0,
        })
    }

    /// Clipped match and total counts for one candidate against its
    /// references.
    pub fn accumulate<T: Eq + Hash + Clone>(
        &mut self,
        candidate: &[T],
        references: &[Vec<T>],
    ) -> Result<()> {
        if candidate.is_empty() {
            return Err(Error::Contract("BLEU candidate is empty".to_string()));
        }
        if references.is_empty() {
            return Err(Error::Contract("BLEU needs at least one reference".to_string()));
        }
        for n in 1..=self.max_n {
            let cand_grams = ngram_counts(candidate, n);
            let total: usize = cand_grams.values().sum();
            let mut clipped = 0;
            for (gram, &count) in &cand_grams {
                let best_ref = references
                    .iter()
                    .map(|r| ngram_count_of(r, gram, n))
                    .max()
                    .unwrap_or(0);
                clipped += count.min(best_ref);
            }
            self.matches[n - 1] += clipped;
            self.totals[n - 1] += total;
        }
        self.candidate_len += candidate.len();
        self.effective_ref_len += closest_ref_len(candidate.len(), references);
        Ok(())
    }

    pub fn modified_precision(&self, n: usize) -> f64 {
        if self.totals[n - 1] == 0 {
            0.0
        } else {
            self.matches[n - 1] as f64 / self.totals[n - 1] as f64
        }
    }

    pub fn brevity_penalty(&self) -> f64 {
        let (c, r) = (self.candidate_len as f64, self.effective_ref_len as f64);
        if c > r {
            1.0
        } else {
            (1.0 - r / c).exp()
        }
    }

    /// `BP * exp(Σ w_n log p_n)`; zero whenever any p_n is zero.
    pub fn score(&self) -> f64 {
        let mut log_sum = 0.0;
        for n in 1..=self.max_n {
            let p = self.modified_precision(n);
            if p == 0.0 {
                return 0.0;
            }
            log_sum += self.weights[n - 1] * p.ln();
        }
        self.brevity_penalty() * log_sum.exp()
    }
}

/// Sentence-level BLEU with up-to-`max_n` grams.
pub fn bleu<T: Eq + Hash + Clone>(
    candidate: &[T],
    references: &[Vec<T>],
    max_n: usize,
    weights: Option<&[f64]>,
) -> Result<f64> {
    let mut stats = BleuStats::new(max_n, weights)?;
    stats.accumulate(candidate, references)?;
    Ok(stats.score())
}

fn ngram_counts<T: Eq + Hash + Clone>(tokens: &[T], n: usize) -> HashMap<Vec<T>, usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w.to_vec()).or_insert(0) += 1;
        }
    }
    counts
}

fn ngram_count_of<T: Eq + Hash + Clone>(tokens: &[T], gram: &[T], n: usize) -> usize {
    if tokens.len() < n {
        return 0;
    }
    tokens.windows(n).filter(|w| *w == gram).count()
}

/// Reference length closest to `c`; ties go to the shorter reference.
fn closest_ref_len<T>(c: usize, references: &[Vec<T>]) -> usize {
    references
        .iter()
        .map(|r| r.len())
        .min_by_key(|&len| (len.abs_diff(c), len))
        .expect("non-empty references")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<&str> {
        s.split_whitespace().collect()
    }

    #[test]
    fn identical_candidate_scores_exactly_one() {
        let cand = toks("the cat sat on the mat");
        let refs = vec![toks("the cat sat on the mat")];
        assert_eq!(bleu(&cand, &refs, 4, None).unwrap(), 1.0);
    }

    #[test]
    fn clipped_unigram_two_sevenths() {
        let cand = toks("the the the the the the the");
        let refs = vec![toks("the cat is on the mat")];
        let mut stats = BleuStats::new(1, None).unwrap();
        stats.accumulate(&cand, &refs).unwrap();
        assert_eq!(stats.modified_precision(1), 2.0 / 7.0);
    }

    #[test]
    fn short_candidate_pays_brevity_penalty() {
        // candidate is a strict prefix: all precisions 1, c < r
        let cand = toks("a b c");
        let refs = vec![toks("a b c d e")];
        let score = bleu(&cand, &refs, 2, None).unwrap();
        let expected = (1.0 - 5.0 / 3.0f64).exp();
        assert!((score - expected).abs() < 1e-15);
        assert!(score < 1.0);
    }

    #[test]
    fn any_zero_precision_zeroes_the_score() {
        let cand = toks("x y");
        let refs = vec![toks("a b c")];
        assert_eq!(bleu(&cand, &refs, 2, None).unwrap(), 0.0);
    }

    #[test]
    fn candidate_shorter_than_n_scores_zero() {
        let cand = toks("a");
        let refs = vec![toks("a")];
        assert_eq!(bleu(&cand, &refs, 4, None).unwrap(), 0.0);
    }

    #[test]
    fn reference_order_does_not_matter() {
        let cand = toks("a b c d");
        let r1 = toks("a b c");
        let r2 = toks("a b c d e f");
        let fwd = bleu(&cand, &[r1.clone(), r2.clone()], 4, None).unwrap();
        let rev = bleu(&cand, &[r2, r1], 4, None).unwrap();
        assert_eq!(fwd, rev);
    }

    #[test]
    fn tie_on_reference_length_picks_shorter() {
        // c = 4; refs of length 3 and 5 are both distance 1 -> r = 3 -> BP = 1
        let cand = toks("a b c d");
        let refs = vec![toks("a b c"), toks("a b c d e")];
        let mut stats = BleuStats::new(1, None).unwrap();
        stats.accumulate(&cand, &refs).unwrap();
        assert_eq!(stats.brevity_penalty(), 1.0);
    }

    #[test]
    fn empty_candidate_is_an_error() {
        let refs = vec![toks("a")];
        assert!(bleu::<&str>(&[], &refs, 4, None).is_err());
    }

    #[test]
    fn bad_weights_rejected() {
        assert!(BleuStats::new(2, Some(&[0.9, 0.3])).is_err());
        assert!(BleuStats::new(2, Some(&[0.5])).is_err());
        assert!(BleuStats::new(0, None).is_err());
    }

    #[test]
    fn never_exceeds_one() {
        let cand = toks("a a b b c");
        let refs = vec![toks("a b c a b"), toks("c b a")];
        let score = bleu(&cand, &refs, 3, None).unwrap();
        assert!((0.0..=1.0).contains(&score));
    }
}
