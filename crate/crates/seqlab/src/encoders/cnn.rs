//! Convolutional text features: a filter of width `h` slides over the token
//! rows, each window producing `act(w · window + b)` per filter; a
//! multi-scale bank max-pools each filter's feature map and concatenates
//! the pooled values across kernel sizes.

use crate::error::{Error, Result};
use crate::rng::Prng;
use crate::tensor::{broadcast_row, gather_rows, xavier_init, Activation, Tape, Tensor};

/// All filters of one window width: `w` is `[h·d × filters]`.
#[derive(Debug, Clone)]
pub struct KernelGroup {
    pub width: usize,
    pub w: Tensor,
    pub bias: Tensor,
}

/// Filters at several window widths over `d`-dimensional token rows.
#[derive(Debug, Clone)]
pub struct CnnFilterBank {
    pub d: usize,
    pub kernels: Vec<KernelGroup>,
    pub activation: Activation,
}

impl CnnFilterBank {
    /// `sizes` pairs a window width with its filter count.
    pub fn init(
        rng: &mut Prng,
        d: usize,
        sizes: &[(usize, usize)],
        activation: Activation,
    ) -> Result<CnnFilterBank> {
        if sizes.is_empty() {
            return Err(Error::Contract("filter bank needs at least one kernel size".into()));
        }
        let mut kernels = Vec::with_capacity(sizes.len());
        for &(width, filters) in sizes {
            if width == 0 || filters == 0 {
                return Err(Error::Contract(format!(
                    "kernel width and filter count must be positive, got ({width}, {filters})"
                )));
            }
            kernels.push(KernelGroup {
                width,
                w: xavier_init(rng, width * d, filters),
                bias: Tensor::param(vec![0.0; filters], &[1, filters]).expect("bias"),
            });
        }
        Ok(CnnFilterBank { d, kernels, activation })
    }

    /// Total pooled output width: one value per filter across all sizes.
    pub fn output_width(&self) -> usize {
        self.kernels.iter().map(|k| k.w.shape()[1]).sum()
    }

    pub fn max_kernel_width(&self) -> usize {
        self.kernels.iter().map(|k| k.width).max().unwrap_or(0)
    }

    pub fn params(&self, out: &mut Vec<(String, Tensor)>, prefix: &str) {
        for k in &self.kernels {
            out.push((format!("{prefix}.w{}", k.width), k.w.clone()));
            out.push((format!("{prefix}.b{}", k.width), k.bias.clone()));
        }
    }
}

/// Feature map of one kernel group over `[n × d]`: every window of `width`
/// consecutive rows yields one feature per filter, giving
/// `[n - width + 1 × filters]`.
pub fn cnn_feature_map(
    tape: &Tape,
    sequence: &Tensor,
    kernel: &KernelGroup,
    activation: Activation,
) -> Result<Tensor> {
    let (n, d) = sequence.dims2("cnn_feature_map")?;
    let h = kernel.width;
    if n < h {
        return Err(Error::dim(
            "cnn_feature_map",
            format!("sequence length {n} is shorter than kernel width {h}"),
        ));
    }
    let windows = n - h + 1;
    // im2col: row list [0..h, 1..h+1, ...], then flatten each window
    let mut rows = Vec::with_capacity(windows * h);
    for i in 0..windows {
        rows.extend(i..i + h);
    }
    let stacked = gather_rows(tape, sequence, &rows)?;
    let flat = tape.reshape(&stacked, &[windows, h * d])?;
    let scores = tape.matmul(&flat, &kernel.w)?;
    let biased = tape.add(&scores, &broadcast_row(tape, &kernel.bias, windows)?)?;
    Ok(tape.activate(&biased, activation))
}

/// Multi-scale encoding: per kernel size, max-pool each filter's feature map
/// over the windows, then concatenate the pooled values across sizes into a
/// flat vector of length [`CnnFilterBank::output_width`].
pub fn multi_scale_cnn_encode(
    tape: &Tape,
    sequence: &Tensor,
    bank: &CnnFilterBank,
) -> Result<Tensor> {
    let mut pooled = Vec::with_capacity(bank.kernels.len());
    for kernel in &bank.kernels {
        let fm = cnn_feature_map(tape, sequence, kernel, bank.activation)?;
        let (best, _) = tape.max_over_axis(&fm, 0)?;
        pooled.push(best);
    }
    tape.concat(&pooled, 0)
}
