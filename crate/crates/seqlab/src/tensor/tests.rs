use super::*;
use crate::gradcheck::{numeric_grad, worst_rel_err, DEFAULT_STEP};
use crate::rng::Prng;

fn assert_close(actual: &[f64], expected: &[f64], tol: f64) {
    assert_eq!(actual.len(), expected.len());
    for (a, e) in actual.iter().zip(expected) {
        assert!((a - e).abs() <= tol, "{a} vs {e} (tol {tol})");
    }
}

fn random_tensor(rng: &mut Prng, shape: &[usize], trainable: bool) -> Tensor {
    let numel: usize = shape.iter().product();
    let data: Vec<f64> = (0..numel).map(|_| rng.uniform(-1.0, 1.0)).collect();
    if trainable {
        Tensor::param(data, shape).unwrap()
    } else {
        Tensor::new(data, shape).unwrap()
    }
}

// ── matmul ──

#[test]
fn matmul_identity() {
    let tape = Tape::new();
    let id = Tensor::new(vec![1.0, 0.0, 0.0, 1.0], &[2, 2]).unwrap();
    let m = Tensor::new(vec![3.0, -1.0, 2.5, 7.0], &[2, 2]).unwrap();
    let out = tape.matmul(&id, &m).unwrap();
    assert_eq!(out.to_vec(), m.to_vec());
}

#[test]
fn matmul_hand_oracle() {
    // [[1,2],[3,4]] x [[0],[1]] = [[2],[4]]
    let tape = Tape::new();
    let a = Tensor::new(vec![1.0, 2.0, 3.0, 4.0], &[2, 2]).unwrap();
    let b = Tensor::new(vec![0.0, 1.0], &[2, 1]).unwrap();
    let c = tape.matmul(&a, &b).unwrap();
    assert_eq!(c.shape(), vec![2, 1]);
    assert_eq!(c.to_vec(), vec![2.0, 4.0]);
}

#[test]
fn matmul_zero_annihilates() {
    let tape = Tape::new();
    let z = Tensor::zeros(&[2, 2]).unwrap();
    let m = Tensor::new(vec![5.0, 6.0, 7.0, 8.0], &[2, 2]).unwrap();
    assert_eq!(tape.matmul(&z, &m).unwrap().to_vec(), vec![0.0; 4]);
}

#[test]
fn matmul_shape_mismatch_names_shapes() {
    let tape = Tape::new();
    let a = Tensor::zeros(&[2, 3]).unwrap();
    let b = Tensor::zeros(&[2, 3]).unwrap();
    let err = tape.matmul(&a, &b).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("[2, 3]"), "error should name both shapes: {msg}");
}

// ── softmax ──

#[test]
fn softmax_uniform() {
    let tape = Tape::new();
    let x = Tensor::new(vec![0.0, 0.0, 0.0], &[3]).unwrap();
    let y = tape.softmax(&x, 0).unwrap();
    assert_close(&y.to_vec(), &[1.0 / 3.0; 3], 1e-15);
}

#[test]
fn softmax_neg_inf_saturates() {
    let tape = Tape::new();
    let x = Tensor::new(vec![f64::NEG_INFINITY, 0.0], &[2]).unwrap();
    let y = tape.softmax(&x, 0).unwrap();
    assert_eq!(y.to_vec(), vec![0.0, 1.0]);
}

#[test]
fn softmax_matches_brute_force() {
    let tape = Tape::new();
    let vals = [1.0, 2.0, 3.0];
    let x = Tensor::new(vals.to_vec(), &[3]).unwrap();
    let y = tape.softmax(&x, 0).unwrap();
    let z: f64 = vals.iter().map(|v| v.exp()).sum();
    let expected: Vec<f64> = vals.iter().map(|v| v.exp() / z).collect();
    assert_close(&y.to_vec(), &expected, 1e-12);
}

#[test]
fn softmax_all_neg_inf_is_degenerate() {
    let tape = Tape::new();
    let x = Tensor::new(vec![f64::NEG_INFINITY; 3], &[3]).unwrap();
    match tape.softmax(&x, 0) {
        Err(Error::DegenerateSlice { .. }) => {}
        other => panic!("expected degenerate-slice error, got {other:?}"),
    }
}

#[test]
fn softmax_rows_sum_to_one_and_shift_invariant() {
    let mut rng = Prng::seed_from_u64(11);
    for _ in 0..20 {
        let x = random_tensor(&mut rng, &[4, 5], false);
        let tape = Tape::new();
        let y = tape.softmax(&x, 1).unwrap();
        let yd = y.to_vec();
        for r in 0..4 {
            let s: f64 = yd[r * 5..(r + 1) * 5].iter().sum();
            assert!((s - 1.0).abs() < 1e-12, "row sum {s}");
        }
        // adding a constant to each entry leaves the result unchanged
        let c = rng.uniform(-3.0, 3.0);
        let shifted_data: Vec<f64> = x.data().iter().map(|v| v + c).collect();
        let shifted = Tensor::new(shifted_data, &[4, 5]).unwrap();
        let y2 = tape.softmax(&shifted, 1).unwrap();
        assert_close(&y2.to_vec(), &yd, 1e-12);
    }
}

// ── elementwise ──

#[test]
fn sigmoid_at_zero() {
    let tape = Tape::new();
    let x = Tensor::new(vec![0.0], &[1]).unwrap();
    assert_eq!(tape.sigmoid(&x).to_vec(), vec![0.5]);
}

#[test]
fn relu_clamps_negative() {
    let tape = Tape::new();
    let x = Tensor::new(vec![-3.0], &[1]).unwrap();
    assert_eq!(tape.relu(&x).to_vec(), vec![0.0]);
}

#[test]
fn tanh_matches_exp_formula() {
    // independent route: tanh(x) = (e^x - e^-x) / (e^x + e^-x)
    let tape = Tape::new();
    let x = Tensor::new(vec![1.0], &[1]).unwrap();
    let y = tape.tanh(&x).to_vec()[0];
    let (ep, em) = (1.0f64.exp(), (-1.0f64).exp());
    assert!((y - (ep - em) / (ep + em)).abs() < 1e-12);
}

#[test]
fn elementwise_shape_mismatch() {
    let tape = Tape::new();
    let a = Tensor::zeros(&[2]).unwrap();
    let b = Tensor::zeros(&[3]).unwrap();
    assert!(matches!(tape.add(&a, &b), Err(Error::Dim { .. })));
}

#[test]
fn activation_ranges() {
    let mut rng = Prng::seed_from_u64(5);
    let x = random_tensor(&mut rng, &[50], false);
    let tape = Tape::new();
    assert!(tape.sigmoid(&x).data().iter().all(|&v| v > 0.0 && v < 1.0));
    assert!(tape.tanh(&x).data().iter().all(|&v| v > -1.0 && v < 1.0));
    assert!(tape.relu(&x).data().iter().all(|&v| v >= 0.0));
}

// ── concat ──

#[test]
fn concat_single_is_identity() {
    let tape = Tape::new();
    let a = Tensor::new(vec![1.0, 2.0, 3.0], &[3]).unwrap();
    let out = tape.concat(std::slice::from_ref(&a), 0).unwrap();
    assert_eq!(out.to_vec(), a.to_vec());
}

#[test]
fn concat_vectors() {
    let tape = Tape::new();
    let a = Tensor::new(vec![1.0, 2.0], &[2]).unwrap();
    let b = Tensor::new(vec![3.0], &[1]).unwrap();
    let out = tape.concat(&[a, b], 0).unwrap();
    assert_eq!(out.to_vec(), vec![1.0, 2.0, 3.0]);
}

#[test]
fn concat_incompatible_shapes() {
    let tape = Tape::new();
    let a = Tensor::zeros(&[2, 2]).unwrap();
    let b = Tensor::zeros(&[2, 3]).unwrap();
    assert!(tape.concat(&[a, b], 0).is_err());
}

#[test]
fn concat_gradient_splits() {
    // d(sum over concat)/d(input) is all ones for each input
    let a = Tensor::param(vec![0.1, 0.2], &[1, 2]).unwrap();
    let b = Tensor::param(vec![0.3, 0.4, 0.5], &[1, 3]).unwrap();
    let tape = Tape::new();
    let cat = tape.concat(&[a.clone(), b.clone()], 1).unwrap();
    let loss = tape.sum_all(&cat);
    tape.backward(&loss).unwrap();
    let ga = a.grad().unwrap();
    assert_eq!(ga, vec![1.0, 1.0]);
    assert_eq!(b.grad().unwrap(), vec![1.0, 1.0, 1.0]);

    // finite differences agree
    let fd = numeric_grad(
        &a,
        || {
            let t = Tape::new();
            let cat = t.concat(&[a.clone(), b.clone()], 1).unwrap();
            t.sum_all(&cat).entry(0)
        },
        DEFAULT_STEP,
    );
    assert!(worst_rel_err(&ga, &fd) < 1e-6);
}

// ── max_over_axis ──

#[test]
fn max_basic_and_argmax() {
    let tape = Tape::new();
    let x = Tensor::new(vec![1.0, 3.0, 2.0], &[3]).unwrap();
    let (m, idx) = tape.max_over_axis(&x, 0).unwrap();
    assert_eq!(m.to_vec(), vec![3.0]);
    assert_eq!(idx, vec![1]);
}

#[test]
fn max_tie_breaks_to_first() {
    let tape = Tape::new();
    let x = Tensor::new(vec![7.0, 7.0, 7.0], &[3]).unwrap();
    let (_, idx) = tape.max_over_axis(&x, 0).unwrap();
    assert_eq!(idx, vec![0]);
}

#[test]
fn max_gradient_routes_to_argmax_only() {
    let mut rng = Prng::seed_from_u64(21);
    let x = random_tensor(&mut rng, &[3, 4], true);
    let tape = Tape::new();
    let (m, argmax) = tape.max_over_axis(&x, 0).unwrap();
    let loss = tape.sum_all(&m);
    tape.backward(&loss).unwrap();
    let grad = x.grad().unwrap();
    for (i, g) in grad.iter().enumerate() {
        if argmax.contains(&i) {
            assert_eq!(*g, 1.0);
        } else {
            assert_eq!(*g, 0.0);
        }
    }

    let fd = numeric_grad(
        &x,
        || {
            let t = Tape::new();
            let (m, _) = t.max_over_axis(&x, 0).unwrap();
            t.sum_all(&m).entry(0)
        },
        DEFAULT_STEP,
    );
    assert!(worst_rel_err(&grad, &fd) < 1e-6);
}

// ── backward ──

#[test]
fn backward_of_sum_is_ones() {
    let x = Tensor::param(vec![1.0, -2.0, 0.5], &[3]).unwrap();
    let tape = Tape::new();
    let loss = tape.sum_all(&x);
    tape.backward(&loss).unwrap();
    assert_eq!(x.grad().unwrap(), vec![1.0, 1.0, 1.0]);
}

#[test]
fn backward_of_square_is_two_x() {
    let x = Tensor::param(vec![1.0, -2.0, 0.5], &[3]).unwrap();
    let tape = Tape::new();
    let sq = tape.mul(&x, &x).unwrap();
    let loss = tape.sum_all(&sq);
    tape.backward(&loss).unwrap();
    assert_eq!(x.grad().unwrap(), vec![2.0, -4.0, 1.0]);
}

#[test]
fn backward_composition_matches_finite_differences() {
    let mut rng = Prng::seed_from_u64(3);
    let w = random_tensor(&mut rng, &[3, 2], true);
    let x = random_tensor(&mut rng, &[2, 3], false);
    let forward = |tape: &Tape| -> Tensor {
        let h = tape.matmul(&x, &w).unwrap();
        let a = tape.tanh(&h);
        let s = tape.mul(&a, &a).unwrap();
        tape.sum_all(&s)
    };
    let tape = Tape::new();
    let loss = forward(&tape);
    tape.backward(&loss).unwrap();
    let analytic = w.grad().unwrap();
    let fd = numeric_grad(&w, || forward(&Tape::new()).entry(0), DEFAULT_STEP);
    assert!(worst_rel_err(&analytic, &fd) < 1e-4);
}

#[test]
fn backward_rejects_non_scalar_loss() {
    let x = Tensor::param(vec![1.0, 2.0], &[2]).unwrap();
    let tape = Tape::new();
    let y = tape.tanh(&x);
    assert!(matches!(tape.backward(&y), Err(Error::Contract(_))));
}

#[test]
fn double_backward_without_reset_rejected() {
    let x = Tensor::param(vec![1.0], &[1]).unwrap();
    let tape = Tape::new();
    let loss = tape.sum_all(&x);
    tape.backward(&loss).unwrap();
    assert!(matches!(tape.backward(&loss), Err(Error::State(_))));
    // reset clears the recording and permits a fresh pass
    tape.reset();
    let loss2 = tape.sum_all(&x);
    tape.backward(&loss2).unwrap();
}

#[test]
fn backward_visits_each_node_once() {
    let x = Tensor::param(vec![0.3, 0.7], &[1, 2]).unwrap();
    let w = Tensor::param(vec![0.5, -0.5, 1.0, 0.25], &[2, 2]).unwrap();
    let tape = Tape::new();
    let h = tape.matmul(&x, &w).unwrap();
    let a = tape.sigmoid(&h);
    let loss = tape.sum_all(&a);
    tape.backward(&loss).unwrap();
    assert_eq!(tape.last_backward_visits(), tape.num_nodes());
}

#[test]
fn frozen_tensors_get_no_grad() {
    let x = Tensor::new(vec![1.0, 2.0], &[2]).unwrap(); // not a param
    let w = Tensor::param(vec![3.0, 4.0], &[2]).unwrap();
    let tape = Tape::new();
    let p = tape.mul(&x, &w).unwrap();
    let loss = tape.sum_all(&p);
    tape.backward(&loss).unwrap();
    assert!(x.grad().is_none());
    assert_eq!(w.grad().unwrap(), vec![1.0, 2.0]);
}

// ── gradient oracle across the op set ──

#[test]
fn every_differentiable_op_matches_finite_differences() {
    let mut rng = Prng::seed_from_u64(42);
    type Builder = fn(&Tape, &Tensor, &Tensor) -> Tensor;
    let cases: Vec<(&str, Builder)> = vec![
        ("matmul", |t, a, b| {
            let y = t.matmul(a, b).unwrap();
            t.sum_all(&y)
        }),
        ("transpose", |t, a, _| {
            let y = t.transpose(a).unwrap();
            let s = t.mul(&y, &y).unwrap();
            t.sum_all(&s)
        }),
        ("add", |t, a, _| {
            let y = t.add(a, a).unwrap();
            let s = t.mul(&y, &y).unwrap();
            t.sum_all(&s)
        }),
        ("sub", |t, a, _| {
            let c = Tensor::new(vec![0.25; a.numel()], &a.shape()).unwrap();
            let y = t.sub(a, &c).unwrap();
            let s = t.mul(&y, &y).unwrap();
            t.sum_all(&s)
        }),
        ("mul", |t, a, _| {
            let y = t.mul(a, a).unwrap();
            t.sum_all(&y)
        }),
        ("scale", |t, a, _| {
            let y = t.scale(a, -1.7).unwrap();
            let s = t.mul(&y, &y).unwrap();
            t.sum_all(&s)
        }),
        ("sigmoid", |t, a, _| {
            let y = t.sigmoid(a);
            t.sum_all(&y)
        }),
        ("tanh", |t, a, _| {
            let y = t.tanh(a);
            let s = t.mul(&y, &y).unwrap();
            t.sum_all(&s)
        }),
        ("relu", |t, a, _| {
            let y = t.relu(a);
            let s = t.mul(&y, &y).unwrap();
            t.sum_all(&s)
        }),
        ("softmax", |t, a, _| {
            let y = t.softmax(a, 1).unwrap();
            let s = t.mul(&y, &y).unwrap();
            t.sum_all(&s)
        }),
        ("concat", |t, a, b| {
            let y = t.concat(&[a.clone(), b.clone()], 0).unwrap();
            let s = t.mul(&y, &y).unwrap();
            t.sum_all(&s)
        }),
        ("max_over_axis", |t, a, _| {
            let (m, _) = t.max_over_axis(a, 1).unwrap();
            let s = t.mul(&m, &m).unwrap();
            t.sum_all(&s)
        }),
        ("reshape", |t, a, _| {
            let y = t.reshape(a, &[1, a.numel()]).unwrap();
            let s = t.mul(&y, &y).unwrap();
            t.sum_all(&s)
        }),
        ("scale_by", |t, a, b| {
            // fixed scalar factor derived from b; only a's gradient is checked
            let factor = Tensor::new(vec![b.entry(0)], &[1]).unwrap();
            let s = t.scale_by(a, &factor).unwrap();
            let q = t.mul(&s, &s).unwrap();
            t.sum_all(&q)
        }),
        ("cross_entropy", |t, a, _| {
            t.cross_entropy_logits(a, &[1, 0, 2]).unwrap()
        }),
    ];

    for (name, build) in cases {
        let a = random_tensor(&mut rng, &[3, 3], true);
        let b = random_tensor(&mut rng, &[3, 3], true);
        let tape = Tape::new();
        let loss = build(&tape, &a, &b);
        tape.backward(&loss).unwrap();
        let analytic = a.grad().unwrap();
        let fd = numeric_grad(&a, || build(&Tape::new(), &a, &b).entry(0), DEFAULT_STEP);
        let err = worst_rel_err(&analytic, &fd);
        assert!(err < 1e-4, "{name}: worst rel err {err}");
        a.clear_grad();
        b.clear_grad();
    }
}

// ── sgd ──

#[test]
fn sgd_zero_lr_is_noop() {
    let x = Tensor::param(vec![1.0, 2.0], &[2]).unwrap();
    let tape = Tape::new();
    let loss = tape.sum_all(&x);
    tape.backward(&loss).unwrap();
    sgd_step(std::slice::from_ref(&x), 0.0).unwrap();
    assert_eq!(x.to_vec(), vec![1.0, 2.0]);
    assert!(x.grad().is_none(), "grads cleared after step");
}

#[test]
fn sgd_single_scalar_step() {
    let x = Tensor::param(vec![1.0], &[1]).unwrap();
    let tape = Tape::new();
    let loss = tape.sum_all(&x); // grad = 1
    tape.backward(&loss).unwrap();
    sgd_step(std::slice::from_ref(&x), 0.1).unwrap();
    assert!((x.entry(0) - 0.9).abs() < 1e-15);
}

#[test]
fn sgd_descends_quadratic() {
    // loss = sum((x - 3)^2), strictly decreasing under small steps
    let x = Tensor::param(vec![0.0, 5.0, -2.0], &[3]).unwrap();
    let target = Tensor::new(vec![3.0; 3], &[3]).unwrap();
    let mut prev = f64::INFINITY;
    for _ in 0..10 {
        let tape = Tape::new();
        let d = tape.sub(&x, &target).unwrap();
        let sq = tape.mul(&d, &d).unwrap();
        let loss = tape.sum_all(&sq);
        let lv = loss.entry(0);
        assert!(lv < prev, "loss must strictly decrease: {lv} !< {prev}");
        prev = lv;
        tape.backward(&loss).unwrap();
        sgd_step(std::slice::from_ref(&x), 0.1).unwrap();
    }
}

#[test]
fn sgd_missing_grad_errors() {
    let x = Tensor::param(vec![1.0], &[1]).unwrap();
    assert!(matches!(sgd_step(&[x], 0.1), Err(Error::State(_))));
}

// ── composition helpers ──

#[test]
fn gather_rows_selects_and_backprops() {
    let x = Tensor::param(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0], &[3, 2]).unwrap();
    let tape = Tape::new();
    let picked = gather_rows(&tape, &x, &[2, 0]).unwrap();
    assert_eq!(picked.to_vec(), vec![5.0, 6.0, 1.0, 2.0]);
    let loss = tape.sum_all(&picked);
    tape.backward(&loss).unwrap();
    assert_eq!(x.grad().unwrap(), vec![1.0, 1.0, 0.0, 0.0, 1.0, 1.0]);
}

#[test]
fn mean_rows_and_broadcast_row() {
    let x = Tensor::new(vec![1.0, 3.0, 5.0, 7.0], &[2, 2]).unwrap();
    let tape = Tape::new();
    let m = mean_rows(&tape, &x).unwrap();
    assert_eq!(m.to_vec(), vec![3.0, 5.0]);
    let b = broadcast_row(&tape, &m, 3).unwrap();
    assert_eq!(b.shape(), vec![3, 2]);
    assert_eq!(b.to_vec(), vec![3.0, 5.0, 3.0, 5.0, 3.0, 5.0]);
}

#[test]
fn tensor_invariants() {
    assert!(Tensor::new(vec![1.0], &[2]).is_err());
    assert!(Tensor::new(vec![], &[0]).is_err());
    let t = Tensor::new(vec![1.0, 2.0], &[2, 1]).unwrap();
    assert_eq!(t.numel(), 2);
}
