//! Deterministic dataset splitting and k-fold rotation, driven by the
//! seeded generator in [`crate::rng`].

use crate::error::{Error, Result};
use crate::rng::Prng;

/// Shuffle `n` sample indices and cut them into train/val/test parts sized
/// by largest-remainder rounding of the ratios. A part with a positive
/// ratio must receive at least one sample.
pub fn split_dataset(
    n: usize,
    ratios: (f64, f64, f64),
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>, Vec<usize>)> {
    let parts = [ratios.0, ratios.1, ratios.2];
    if parts.iter().any(|&r| r < 0.0) {
        return Err(Error::Contract(format!("negative split ratio in {ratios:?}")));
    }
    let sum: f64 = parts.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Contract(format!("split ratios must sum to 1, got {sum}")));
    }
    if n == 0 {
        return Err(Error::Contract("cannot split an empty dataset".to_string()));
    }

    let mut sizes = [0usize; 3];
    let mut fractions = [0.0f64; 3];
    for (i, &r) in parts.iter().enumerate() {
        let exact = n as f64 * r;
        sizes[i] = exact.floor() as usize;
        fractions[i] = exact - exact.floor();
    }
    let mut leftover = n - sizes.iter().sum::<usize>();
    // hand leftovers to the largest fractional parts, earlier part on ties
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| fractions[b].partial_cmp(&fractions[a]).unwrap().then(a.cmp(&b)));
    for &i in &order {
        if leftover == 0 {
            break;
        }
        sizes[i] += 1;
        leftover -= 1;
    }
    for (i, &r) in parts.iter().enumerate() {
        if r > 0.0 && sizes[i] == 0 {
            return Err(Error::Contract(format!(
                "{n} samples are too few for split ratios {ratios:?}"
            )));
        }
    }

    let mut indices: Vec<usize> = (0..n).collect();
    Prng::seed_from_u64(seed).shuffle(&mut indices);
    let val_start = sizes[0];
    let test_start = sizes[0] + sizes[1];
    Ok((
        indices[..val_start].to_vec(),
        indices[val_start..test_start].to_vec(),
        indices[test_start..].to_vec(),
    ))
}

/// Which fold each sample landed in, for `k`-fold cross-validation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldAssignment {
    pub k: usize,
    pub seed: u64,
    /// fold index per sample
    pub fold_of: Vec<usize>,
}

impl FoldAssignment {
    pub fn num_samples(&self) -> usize {
        self.fold_of.len()
    }

    /// Sample indices per fold, in shuffled order.
    pub fn folds(&self) -> Vec<Vec<usize>> {
        let mut folds = vec![Vec::new(); self.k];
        for (sample, &fold) in self.fold_of.iter().enumerate() {
            folds[fold].push(sample);
        }
        folds
    }

    /// The k (train, validation) rotations: each fold validates exactly
    /// once while the remaining k-1 folds train.
    pub fn splits(&self) -> Vec<(Vec<usize>, Vec<usize>)> {
        (0..self.k)
            .map(|fold| {
                let mut train = Vec::new();
                let mut val = Vec::new();
                for (sample, &f) in self.fold_of.iter().enumerate() {
                    if f == fold {
                        val.push(sample);
                    } else {
                        train.push(sample);
                    }
                }
                (train, val)
            })
            .collect()
    }
}

/// Shuffle, then deal `n` samples into `k` folds whose sizes differ by at
/// most one (the first `n % k` folds take the extra sample).
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 || k > n {
        return Err(Error::Contract(format!(
            "k must satisfy 2 <= k <= n, got k={k} for n={n}"
        )));
    }
    let mut indices: Vec<usize> = (0..n).collect();
    Prng::seed_from_u64(seed).shuffle(&mut indices);
    let mut fold_of = vec![0usize; n];
    let base = n / k;
    let extra = n % k;
    let mut cursor = 0;
    for fold in 0..k {
        let size = base + usize::from(fold < extra);
        for &sample in &indices[cursor..cursor + size] {
            fold_of[sample] = fold;
        }
        cursor += size;
    }
    Ok(FoldAssignment { k, seed, fold_of })
}
