//! Vanilla recurrent cell: `h_t = act(x_t W_x + h_{t-1} W_h + b)`.

use crate::error::{Error, Result};
use crate::rng::Prng;
use crate::tensor::{xavier_init, Activation, Tape, Tensor};

#[derive(Debug, Clone)]
pub struct RnnCell {
    pub w_x: Tensor,
    pub w_h: Tensor,
    pub bias: Tensor,
    pub activation: Activation,
}

impl RnnCell {
    pub fn init(rng: &mut Prng, d_in: usize, d_h: usize, activation: Activation) -> RnnCell {
        RnnCell {
            w_x: xavier_init(rng, d_in, d_h),
            w_h: xavier_init(rng, d_h, d_h),
            bias: Tensor::param(vec![0.0; d_h], &[1, d_h]).expect("bias"),
            activation,
        }
    }

    pub fn hidden_size(&self) -> usize {
        self.w_h.shape()[0]
    }

    pub fn params(&self, out: &mut Vec<(String, Tensor)>, prefix: &str) {
        out.push((format!("{prefix}.w_x"), self.w_x.clone()));
        out.push((format!("{prefix}.w_h"), self.w_h.clone()));
        out.push((format!("{prefix}.bias"), self.bias.clone()));
    }
}

fn as_row(tape: &Tape, t: &Tensor, op: &'static str) -> Result<Tensor> {
    match t.shape().as_slice() {
        [_, _] => Ok(t.clone()),
        [d] => tape.reshape(t, &[1, *d]),
        other => Err(Error::dim(op, format!("expected a vector or row, got shape {other:?}"))),
    }
}

/// One recurrence step. `x_t` and `h_prev` may be vectors or `[1 × d]` rows;
/// the result is a `[1 × d_h]` row.
pub fn rnn_step(tape: &Tape, cell: &RnnCell, x_t: &Tensor, h_prev: &Tensor) -> Result<Tensor> {
    let x = as_row(tape, x_t, "rnn_step")?;
    let h = as_row(tape, h_prev, "rnn_step")?;
    let from_input = tape.matmul(&x, &cell.w_x)?;
    let from_state = tape.matmul(&h, &cell.w_h)?;
    let pre = tape.add(&tape.add(&from_input, &from_state)?, &cell.bias)?;
    Ok(tape.activate(&pre, cell.activation))
}

/// Left-to-right recurrence over `[n × d_in]`, stacking all hidden states
/// into `[n × d_h]`; the last row summarizes the sequence. `h0` defaults to
/// zeros.
pub fn rnn_encode(
    tape: &Tape,
    cell: &RnnCell,
    sequence: &Tensor,
    h0: Option<&Tensor>,
) -> Result<Tensor> {
    let (n, _) = sequence.dims2("rnn_encode")?;
    let zero;
    let mut h = match h0 {
        Some(h) => as_row(tape, h, "rnn_encode")?,
        None => {
            zero = Tensor::zeros(&[1, cell.hidden_size()])?;
            zero.clone()
        }
    };
    let mut states = Vec::with_capacity(n);
    for t in 0..n {
        let x_t = crate::tensor::gather_rows(tape, sequence, &[t])?;
        h = rnn_step(tape, cell, &x_t, &h)?;
        states.push(h.clone());
    }
    tape.concat(&states, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::{numeric_grad, worst_rel_err, DEFAULT_STEP};

    fn cell_with(w_x: Vec<f64>, w_h: Vec<f64>, bias: Vec<f64>, d_in: usize, d_h: usize) -> RnnCell {
        RnnCell {
            w_x: Tensor::param(w_x, &[d_in, d_h]).unwrap(),
            w_h: Tensor::param(w_h, &[d_h, d_h]).unwrap(),
            bias: Tensor::param(bias, &[1, d_h]).unwrap(),
            activation: Activation::Tanh,
        }
    }

    #[test]
    fn zero_everything_gives_zero_state() {
        let cell = cell_with(vec![0.0; 4], vec![0.0; 4], vec![0.0; 2], 2, 2);
        let tape = Tape::new();
        let x = Tensor::new(vec![1.0, -1.0], &[2]).unwrap();
        let h0 = Tensor::zeros(&[1, 2]).unwrap();
        let h = rnn_step(&tape, &cell, &x, &h0).unwrap();
        assert_eq!(h.to_vec(), vec![0.0, 0.0]);
    }

    #[test]
    fn zero_recurrence_ignores_previous_state() {
        let cell = cell_with(vec![0.5, -0.25, 1.0, 0.75], vec![0.0; 4], vec![0.1, 0.2], 2, 2);
        let tape = Tape::new();
        let x = Tensor::new(vec![1.0, 2.0], &[2]).unwrap();
        let h_a = Tensor::new(vec![0.0, 0.0], &[1, 2]).unwrap();
        let h_b = Tensor::new(vec![5.0, -5.0], &[1, 2]).unwrap();
        let out_a = rnn_step(&tape, &cell, &x, &h_a).unwrap();
        let out_b = rnn_step(&tape, &cell, &x, &h_b).unwrap();
        assert_eq!(out_a.to_vec(), out_b.to_vec());
    }

    #[test]
    fn step_matches_hand_affine_tanh() {
        // d_in = d_h = 3, everything written out by hand
        let w_x = vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];
        let w_h = vec![0.05, 0.0, -0.05, 0.1, -0.1, 0.0, 0.2, 0.0, -0.2];
        let bias = vec![0.01, -0.02, 0.03];
        let x = [1.0, -0.5, 0.25];
        let h = [0.5, 0.0, -0.5];
        let cell = cell_with(w_x.clone(), w_h.clone(), bias.clone(), 3, 3);
        let tape = Tape::new();
        let xt = Tensor::new(x.to_vec(), &[3]).unwrap();
        let hp = Tensor::new(h.to_vec(), &[1, 3]).unwrap();
        let out = rnn_step(&tape, &cell, &xt, &hp).unwrap();
        for j in 0..3 {
            let mut pre = bias[j];
            for i in 0..3 {
                pre += x[i] * w_x[i * 3 + j] + h[i] * w_h[i * 3 + j];
            }
            assert!((out.to_vec()[j] - pre.tanh()).abs() < 1e-12);
        }
    }

    #[test]
    fn encode_length_one_is_single_step() {
        let mut rng = Prng::seed_from_u64(2);
        let cell = RnnCell::init(&mut rng, 3, 2, Activation::Tanh);
        let seq = Tensor::new(vec![0.3, -0.1, 0.9], &[1, 3]).unwrap();
        let tape = Tape::new();
        let enc = rnn_encode(&tape, &cell, &seq, None).unwrap();
        let h0 = Tensor::zeros(&[1, 2]).unwrap();
        let step = rnn_step(&tape, &cell, &seq, &h0).unwrap();
        assert_eq!(enc.to_vec(), step.to_vec());
    }

    #[test]
    fn zero_fixed_point_holds() {
        // W_x = 0, b = 0, h0 = 0: every state stays exactly zero
        let cell = cell_with(vec![0.0; 6], vec![0.3, -0.2, 0.1, 0.4], vec![0.0, 0.0], 3, 2);
        let seq = Tensor::new(vec![1.0; 12], &[4, 3]).unwrap();
        let tape = Tape::new();
        let enc = rnn_encode(&tape, &cell, &seq, None).unwrap();
        assert_eq!(enc.to_vec(), vec![0.0; 8]);
    }

    #[test]
    fn encode_equals_manual_fold_for_lengths_1_to_8() {
        let mut rng = Prng::seed_from_u64(77);
        let cell = RnnCell::init(&mut rng, 3, 4, Activation::Tanh);
        for n in 1..=8 {
            let data: Vec<f64> = (0..n * 3).map(|_| rng.uniform(-1.0, 1.0)).collect();
            let seq = Tensor::new(data.clone(), &[n, 3]).unwrap();
            let tape = Tape::new();
            let enc = rnn_encode(&tape, &cell, &seq, None).unwrap();
            // independent fold: feed rows through rnn_step one by one
            let mut h = Tensor::zeros(&[1, 4]).unwrap();
            for t in 0..n {
                let x = Tensor::new(data[t * 3..(t + 1) * 3].to_vec(), &[1, 3]).unwrap();
                h = rnn_step(&tape, &cell, &x, &h).unwrap();
            }
            let enc_last = enc.to_vec()[(n - 1) * 4..].to_vec();
            assert_eq!(enc_last, h.to_vec(), "length {n}");
        }
    }

    #[test]
    fn encode_gradients_match_finite_differences() {
        let mut rng = Prng::seed_from_u64(78);
        let cell = RnnCell::init(&mut rng, 2, 3, Activation::Tanh);
        let seq_data: Vec<f64> = (0..10).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let seq = Tensor::new(seq_data, &[5, 2]).unwrap();
        let forward = || {
            let tape = Tape::new();
            let enc = rnn_encode(&tape, &cell, &seq, None).unwrap();
            let sq = tape.mul(&enc, &enc).unwrap();
            tape.sum_all(&sq).entry(0)
        };
        let tape = Tape::new();
        let enc = rnn_encode(&tape, &cell, &seq, None).unwrap();
        let sq = tape.mul(&enc, &enc).unwrap();
        let loss = tape.sum_all(&sq);
        tape.backward(&loss).unwrap();
        for p in [&cell.w_x, &cell.w_h, &cell.bias] {
            let analytic = p.grad().unwrap();
            let fd = numeric_grad(p, forward, DEFAULT_STEP);
            assert!(worst_rel_err(&analytic, &fd) < 1e-4);
        }
    }
}
