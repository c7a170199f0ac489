//! Central finite-difference gradient probes.
//!
//! The numeric side only ever calls a forward closure, so it stays
//! independent of the tape's backward rules — that is the point.

use crate::tensor::Tensor;

pub const DEFAULT_STEP: f64 = 1e-5;

/// Central-difference gradient of `loss_fn` with respect to every entry of
/// `param`. The closure must rebuild the forward pass from scratch on each
/// call; `param` is restored afterwards.
pub fn numeric_grad(param: &Tensor, mut loss_fn: impl FnMut() -> f64, h: f64) -> Vec<f64> {
    let n = param.numel();
    let mut grad = Vec::with_capacity(n);
    for i in 0..n {
        let orig = param.entry(i);
        param.set_entry(i, orig + h);
        let up = loss_fn();
        param.set_entry(i, orig - h);
        let down = loss_fn();
        param.set_entry(i, orig);
        grad.push((up - down) / (2.0 * h));
    }
    grad
}

/// Relative error with an absolute floor so finite-difference noise on
/// near-zero gradients does not dominate.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-4)
}

/// Worst entrywise relative error between two gradient vectors.
pub fn worst_rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len(), "gradient length mismatch");
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| rel_err(a, n))
        .fold(0.0, f64::max)
}
