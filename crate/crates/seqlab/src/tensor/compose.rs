//! Helpers composed from the primitive tape ops. Row gathering and
//! broadcasting are expressed as matmuls with constant selection matrices,
//! so they need no backward rules of their own.

use super::{Tape, Tensor};
use crate::error::{Error, Result};

/// Constant `[rows.len() × width]` matrix with a single 1 per row.
pub fn one_hot_rows(rows: &[usize], width: usize) -> Result<Tensor> {
    if rows.is_empty() {
        return Err(Error::dim("one_hot_rows", "no rows requested".to_string()));
    }
    let mut data = vec![0.0; rows.len() * width];
    for (r, &idx) in rows.iter().enumerate() {
        if idx >= width {
            return Err(Error::dim(
                "one_hot_rows",
                format!("row index {idx} out of range for width {width}"),
            ));
        }
        data[r * width + idx] = 1.0;
    }
    Tensor::new(data, &[rows.len(), width])
}

/// Select rows of a `[n × d]` tensor, differentiably: gradient scatters back
/// to the chosen rows.
pub fn gather_rows(tape: &Tape, x: &Tensor, rows: &[usize]) -> Result<Tensor> {
    let (n, _) = x.dims2("gather_rows")?;
    let sel = one_hot_rows(rows, n)?;
    tape.matmul(&sel, x)
}

/// Mean over the rows of a `[n × d]` tensor, producing `[1 × d]`.
pub fn mean_rows(tape: &Tape, x: &Tensor) -> Result<Tensor> {
    let (n, _) = x.dims2("mean_rows")?;
    let weights = Tensor::new(vec![1.0 / n as f64; n], &[1, n])?;
    tape.matmul(&weights, x)
}

/// Repeat a `[1 × m]` row `n` times into `[n × m]` (bias broadcasting).
pub fn broadcast_row(tape: &Tape, row: &Tensor, n: usize) -> Result<Tensor> {
    let (r, _) = row.dims2("broadcast_row")?;
    if r != 1 {
        return Err(Error::dim(
            "broadcast_row",
            format!("expected a [1 x m] row, got shape {:?}", row.shape()),
        ));
    }
    let ones = Tensor::new(vec![1.0; n], &[n, 1])?;
    tape.matmul(&ones, row)
}
