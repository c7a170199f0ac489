use super::*;
use crate::gradcheck::{numeric_grad, worst_rel_err, DEFAULT_STEP};
use crate::rng::Prng;

fn random(rng: &mut Prng, shape: &[usize], trainable: bool) -> Tensor {
    let numel: usize = shape.iter().product();
    let data: Vec<f64> = (0..numel).map(|_| rng.uniform(-1.0, 1.0)).collect();
    if trainable {
        Tensor::param(data, shape).unwrap()
    } else {
        Tensor::new(data, shape).unwrap()
    }
}

fn assert_close(actual: &[f64], expected: &[f64], tol: f64) {
    assert_eq!(actual.len(), expected.len());
    for (a, e) in actual.iter().zip(expected) {
        assert!((a - e).abs() <= tol, "{a} vs {e} (tol {tol})");
    }
}

/// Brute-force attention oracle: per-row score/exp/normalize/mix loops,
/// independent of the tape. `allowed` restricts each row to a column set.
fn attention_oracle(
    q: &[Vec<f64>],
    k: &[Vec<f64>],
    v: &[Vec<f64>],
    allowed: Option<&dyn Fn(usize, usize) -> bool>,
) -> Vec<Vec<f64>> {
    let d_k = q[0].len();
    let mut out = Vec::new();
    for (i, qi) in q.iter().enumerate() {
        let cols: Vec<usize> = (0..k.len())
            .filter(|&j| allowed.map(|f| f(i, j)).unwrap_or(true))
            .collect();
        let scores: Vec<f64> = cols
            .iter()
            .map(|&j| {
                qi.iter().zip(&k[j]).map(|(a, b)| a * b).sum::<f64>() / (d_k as f64).sqrt()
            })
            .collect();
        let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        let mut row = vec![0.0; v[0].len()];
        for (w, &j) in exps.iter().zip(&cols) {
            for (r, x) in row.iter_mut().zip(&v[j]) {
                *r += (w / z) * x;
            }
        }
        out.push(row);
    }
    out
}

fn to_rows(t: &Tensor) -> Vec<Vec<f64>> {
    let (r, c) = t.dims2("test").unwrap();
    let d = t.to_vec();
    (0..r).map(|i| d[i * c..(i + 1) * c].to_vec()).collect()
}

// ── scaled dot attention ──

#[test]
fn single_position_passes_value_through() {
    let mut rng = Prng::seed_from_u64(1);
    for _ in 0..5 {
        let q = random(&mut rng, &[1, 3], false);
        let k = random(&mut rng, &[1, 3], false);
        let v = random(&mut rng, &[1, 4], false);
        let tape = Tape::new();
        let out = scaled_dot_attention(&tape, &q, &k, &v).unwrap();
        assert_eq!(out.to_vec(), v.to_vec());
    }
}

#[test]
fn equal_scores_average_values() {
    // zero query with d_k = 1 scores every key identically
    let q = Tensor::new(vec![0.0, 0.0, 0.0], &[3, 1]).unwrap();
    let k = Tensor::new(vec![1.0, -2.0, 0.5], &[3, 1]).unwrap();
    let v = Tensor::new(vec![3.0, 0.0, 6.0], &[3, 1]).unwrap();
    let tape = Tape::new();
    let out = scaled_dot_attention(&tape, &q, &k, &v).unwrap();
    assert_close(&out.to_vec(), &[3.0; 3], 1e-12);
}

#[test]
fn matches_brute_force_oracle() {
    let mut rng = Prng::seed_from_u64(7);
    let q = random(&mut rng, &[3, 2], false);
    let k = random(&mut rng, &[3, 2], false);
    let v = random(&mut rng, &[3, 2], false);
    let tape = Tape::new();
    let out = scaled_dot_attention(&tape, &q, &k, &v).unwrap();
    let expect = attention_oracle(&to_rows(&q), &to_rows(&k), &to_rows(&v), None);
    for (row, erow) in to_rows(&out).iter().zip(&expect) {
        assert_close(row, erow, 1e-10);
    }
}

#[test]
fn shape_mismatch_is_an_error() {
    let tape = Tape::new();
    let q = Tensor::zeros(&[2, 3]).unwrap();
    let k = Tensor::zeros(&[2, 4]).unwrap();
    let v = Tensor::zeros(&[2, 4]).unwrap();
    assert!(scaled_dot_attention(&tape, &q, &k, &v).is_err());
}

// ── masked attention ──

#[test]
fn single_zero_row_selects_value_exactly() {
    let mut rng = Prng::seed_from_u64(13);
    let n = 4;
    let q = random(&mut rng, &[n, 2], false);
    let k = random(&mut rng, &[n, 2], false);
    let v = random(&mut rng, &[n, 3], false);
    // self mask: row i keeps only column i
    let mask = build_role_mask(Role::SelfOnly, n, None).unwrap();
    let tape = Tape::new();
    let out = masked_attention(&tape, &q, &k, &v, &mask).unwrap();
    let (orows, vrows) = (to_rows(&out), to_rows(&v));
    for i in 0..n {
        assert_eq!(orows[i], vrows[i], "row {i} must equal v row {i} exactly");
    }
}

#[test]
fn all_zero_mask_is_bit_identical_to_unmasked() {
    let mut rng = Prng::seed_from_u64(29);
    for _ in 0..20 {
        let n = 3 + rng.below(4);
        let q = random(&mut rng, &[n, 3], false);
        let k = random(&mut rng, &[n, 3], false);
        let v = random(&mut rng, &[n, 2], false);
        let mask = build_role_mask(Role::Global, n, None).unwrap();
        let tape = Tape::new();
        let plain = scaled_dot_attention(&tape, &q, &k, &v).unwrap();
        let masked = masked_attention(&tape, &q, &k, &v, &mask).unwrap();
        for (a, b) in plain.to_vec().iter().zip(masked.to_vec()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}

#[test]
fn local_window_matches_windowed_oracle() {
    let mut rng = Prng::seed_from_u64(31);
    let n = 4;
    let w = 1usize;
    let q = random(&mut rng, &[n, 2], false);
    let k = random(&mut rng, &[n, 2], false);
    let v = random(&mut rng, &[n, 2], false);
    let mask = build_role_mask(Role::Local(w), n, None).unwrap();
    let tape = Tape::new();
    let out = masked_attention(&tape, &q, &k, &v, &mask).unwrap();
    let in_window = |i: usize, j: usize| i.abs_diff(j) <= w;
    let expect = attention_oracle(&to_rows(&q), &to_rows(&k), &to_rows(&v), Some(&in_window));
    for (row, erow) in to_rows(&out).iter().zip(&expect) {
        assert_close(row, erow, 1e-10);
    }
}

#[test]
fn masked_weights_sum_to_one_with_exact_zeros() {
    let mut rng = Prng::seed_from_u64(37);
    let n = 5;
    let q = random(&mut rng, &[n, 3], false);
    let k = random(&mut rng, &[n, 3], false);
    let mask = build_role_mask(Role::Forward, n, None).unwrap();
    let tape = Tape::new();
    let w = attention_weights(&tape, &q, &k, Some(&mask)).unwrap();
    let rows = to_rows(&w);
    for (i, row) in rows.iter().enumerate() {
        let sum: f64 = row.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        for (j, &wij) in row.iter().enumerate() {
            if !mask.allows(i, j) {
                assert_eq!(wij, 0.0, "masked weight at ({i},{j}) must be exactly 0");
            }
        }
    }
}

#[test]
fn self_mask_argmax_stays_diagonal_under_query_scaling() {
    let mut rng = Prng::seed_from_u64(41);
    let n = 4;
    let q = random(&mut rng, &[n, 3], false);
    let k = random(&mut rng, &[n, 3], false);
    let mask = build_role_mask(Role::SelfOnly, n, None).unwrap();
    for &c in &[0.5, 1.0, 3.0, 17.0] {
        let scaled_q = Tensor::new(q.data().iter().map(|x| x * c).collect(), &[n, 3]).unwrap();
        let tape = Tape::new();
        let w = attention_weights(&tape, &scaled_q, &k, Some(&mask)).unwrap();
        for (i, row) in to_rows(&w).iter().enumerate() {
            let argmax = row
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0;
            assert_eq!(argmax, i);
        }
    }
}

// ── role masks ──

#[test]
fn global_mask_is_all_zero() {
    let m = build_role_mask(Role::Global, 3, None).unwrap();
    for i in 0..3 {
        for j in 0..3 {
            assert!(m.allows(i, j));
        }
    }
}

#[test]
fn self_mask_is_diagonal() {
    let m = build_role_mask(Role::SelfOnly, 3, None).unwrap();
    for i in 0..3 {
        for j in 0..3 {
            assert_eq!(m.allows(i, j), i == j);
        }
    }
}

#[test]
fn syntactic_mask_from_hand_enumerated_arcs() {
    // three-token chain: token 1 and token 3 both headed by token 2 (1-based)
    let tree = DependencyTree::new(
        vec!["a".into(), "b".into(), "c".into()],
        vec![2, 0, 2],
        vec!["dep".into(), "root".into(), "dep".into()],
        vec!["X".into(), "X".into(), "X".into()],
    )
    .unwrap();
    let m = build_role_mask(Role::Syntactic, 3, Some(&tree)).unwrap();
    // row 2 (0-based 1) sees all three: itself plus both children
    assert!(m.allows(1, 0) && m.allows(1, 1) && m.allows(1, 2));
    // row 1 sees itself and its head (2), not token 3
    assert!(m.allows(0, 0) && m.allows(0, 1) && !m.allows(0, 2));
    // row 3 mirrors row 1
    assert!(m.allows(2, 2) && m.allows(2, 1) && !m.allows(2, 0));
}

#[test]
fn syntactic_mask_requires_matching_tree() {
    let tree = DependencyTree::new(
        vec!["a".into(), "b".into()],
        vec![2, 0],
        vec!["dep".into(), "root".into()],
        vec!["X".into(), "X".into()],
    )
    .unwrap();
    assert!(build_role_mask(Role::Syntactic, 3, Some(&tree)).is_err());
    assert!(build_role_mask(Role::Syntactic, 2, None).is_err());
}

#[test]
fn every_mask_row_has_an_include() {
    for role in [Role::Global, Role::SelfOnly, Role::Forward, Role::Backward, Role::Local(2)] {
        for n in 1..6 {
            let m = build_role_mask(role, n, None).unwrap();
            for i in 0..n {
                assert!((0..n).any(|j| m.allows(i, j)), "{role} row {i} fully masked");
            }
        }
    }
}

#[test]
fn role_parsing_round_trips() {
    for role in
        [Role::Global, Role::SelfOnly, Role::Forward, Role::Backward, Role::Local(3), Role::Syntactic]
    {
        assert_eq!(parse_role(&role.to_string()).unwrap(), role);
    }
    assert!(parse_role("sideways").is_err());
    assert!(parse_role("local:x").is_err());
}

// ── multi-head blocks ──

#[test]
fn one_head_with_identity_output_equals_plain_attention() {
    let mut rng = Prng::seed_from_u64(43);
    let (n, d) = (3, 4);
    let x = random(&mut rng, &[n, d], false);
    let head = HeadParams::init(&mut rng, d, d);
    let mut eye = vec![0.0; d * d];
    for i in 0..d {
        eye[i * d + i] = 1.0;
    }
    let w_o = Tensor::new(eye, &[d, d]).unwrap();
    let tape = Tape::new();
    let block = multi_head_concat(&tape, &x, std::slice::from_ref(&head), None, &w_o).unwrap();
    let q = tape.matmul(&x, &head.w_q).unwrap();
    let k = tape.matmul(&x, &head.w_k).unwrap();
    let v = tape.matmul(&x, &head.w_v).unwrap();
    let single = scaled_dot_attention(&tape, &q, &k, &v).unwrap();
    assert_close(&block.to_vec(), &single.to_vec(), 1e-14);
}

#[test]
fn duplicate_heads_with_stacked_identity_mix_to_double() {
    let mut rng = Prng::seed_from_u64(47);
    let (n, d, dk) = (3, 4, 2);
    let x = random(&mut rng, &[n, d], false);
    let head = HeadParams::init(&mut rng, d, dk);
    // w_o stacks two identity blocks: out = att0 + att1 = 2 * att
    let mut stacked = vec![0.0; 2 * dk * dk];
    for i in 0..dk {
        stacked[i * dk + i] = 1.0;
        stacked[(dk + i) * dk + i] = 1.0;
    }
    let w_o = Tensor::new(stacked, &[2 * dk, dk]).unwrap();
    let tape = Tape::new();
    let block =
        multi_head_concat(&tape, &x, &[head.clone(), head.clone()], None, &w_o).unwrap();
    let q = tape.matmul(&x, &head.w_q).unwrap();
    let k = tape.matmul(&x, &head.w_k).unwrap();
    let v = tape.matmul(&x, &head.w_v).unwrap();
    let single = scaled_dot_attention(&tape, &q, &k, &v).unwrap();
    let expect: Vec<f64> = single.to_vec().iter().map(|v| 2.0 * v).collect();
    assert_close(&block.to_vec(), &expect, 1e-12);
}

#[test]
fn concat_block_gradients_match_finite_differences() {
    let mut rng = Prng::seed_from_u64(53);
    let (n, d, dk) = (3, 4, 2);
    let x = random(&mut rng, &[n, d], false);
    let heads = vec![HeadParams::init(&mut rng, d, dk), HeadParams::init(&mut rng, d, dk)];
    let w_o = xavier_init(&mut rng, 2 * dk, d);
    let masks = vec![
        Some(build_role_mask(Role::Local(1), n, None).unwrap()),
        Some(build_role_mask(Role::Forward, n, None).unwrap()),
    ];
    let forward = || {
        let tape = Tape::new();
        let out = multi_head_concat(&tape, &x, &heads, Some(&masks), &w_o).unwrap();
        let sq = tape.mul(&out, &out).unwrap();
        tape.sum_all(&sq).entry(0)
    };
    let tape = Tape::new();
    let out = multi_head_concat(&tape, &x, &heads, Some(&masks), &w_o).unwrap();
    let sq = tape.mul(&out, &out).unwrap();
    let loss = tape.sum_all(&sq);
    tape.backward(&loss).unwrap();

    for p in [&heads[0].w_q, &heads[1].w_v, &w_o] {
        let analytic = p.grad().unwrap();
        let fd = numeric_grad(p, forward, DEFAULT_STEP);
        assert!(worst_rel_err(&analytic, &fd) < 1e-4);
    }
}

#[test]
fn saturated_gate_selects_single_head() {
    let mut rng = Prng::seed_from_u64(59);
    let (n, d, dk) = (4, 4, 3);
    for chosen in 0..3 {
        let x = random(&mut rng, &[n, d], false);
        let heads: Vec<HeadParams> =
            (0..3).map(|_| HeadParams::init(&mut rng, d, dk)).collect();
        let projs: Vec<Tensor> = (0..3).map(|_| xavier_init(&mut rng, dk, d)).collect();
        let raw: Vec<f64> = (0..3).map(|i| if i == chosen { 40.0 } else { -40.0 }).collect();
        let gates = HeadGates::from_raw(raw);
        let tape = Tape::new();
        let out = multi_head_gated(&tape, &x, &heads, &gates, &projs).unwrap();

        let q = tape.matmul(&x, &heads[chosen].w_q).unwrap();
        let k = tape.matmul(&x, &heads[chosen].w_k).unwrap();
        let v = tape.matmul(&x, &heads[chosen].w_v).unwrap();
        let att = scaled_dot_attention(&tape, &q, &k, &v).unwrap();
        let single = tape.matmul(&att, &projs[chosen]).unwrap();
        assert_close(&out.to_vec(), &single.to_vec(), 1e-9);
    }
}

#[test]
fn equal_gates_are_permutation_invariant() {
    let mut rng = Prng::seed_from_u64(61);
    let (n, d, dk) = (3, 4, 2);
    let x = random(&mut rng, &[n, d], false);
    let h0 = HeadParams::init(&mut rng, d, dk);
    let h1 = HeadParams::init(&mut rng, d, dk);
    let p0 = xavier_init(&mut rng, dk, d);
    let p1 = xavier_init(&mut rng, dk, d);
    let gates = HeadGates::from_raw(vec![0.3, 0.3]);

    let tape = Tape::new();
    let fwd = multi_head_gated(&tape, &x, &[h0.clone(), h1.clone()], &gates, &[p0.clone(), p1.clone()])
        .unwrap();
    let rev =
        multi_head_gated(&tape, &x, &[h1, h0], &gates, &[p1, p0]).unwrap();
    assert_eq!(fwd.to_vec(), rev.to_vec());
}

#[test]
fn gate_gradients_match_finite_differences() {
    let mut rng = Prng::seed_from_u64(67);
    let (n, d, dk) = (3, 4, 2);
    let x = random(&mut rng, &[n, d], false);
    let heads: Vec<HeadParams> = (0..2).map(|_| HeadParams::init(&mut rng, d, dk)).collect();
    let projs: Vec<Tensor> = (0..2).map(|_| xavier_init(&mut rng, dk, d)).collect();
    let gates = HeadGates::from_raw(vec![0.25, -0.5]);
    let forward = || {
        let tape = Tape::new();
        let out = multi_head_gated(&tape, &x, &heads, &gates, &projs).unwrap();
        let sq = tape.mul(&out, &out).unwrap();
        tape.sum_all(&sq).entry(0)
    };
    let tape = Tape::new();
    let out = multi_head_gated(&tape, &x, &heads, &gates, &projs).unwrap();
    let sq = tape.mul(&out, &out).unwrap();
    let loss = tape.sum_all(&sq);
    tape.backward(&loss).unwrap();
    for raw in gates.raw() {
        let analytic = raw.grad().unwrap();
        let fd = numeric_grad(raw, forward, DEFAULT_STEP);
        assert!(worst_rel_err(&analytic, &fd) < 1e-4);
    }
}

#[test]
fn gate_count_mismatch_is_contract_error() {
    let mut rng = Prng::seed_from_u64(71);
    let x = random(&mut rng, &[2, 4], false);
    let heads: Vec<HeadParams> = (0..2).map(|_| HeadParams::init(&mut rng, 4, 2)).collect();
    let projs: Vec<Tensor> = (0..2).map(|_| xavier_init(&mut rng, 2, 4)).collect();
    let gates = HeadGates::init(3);
    let tape = Tape::new();
    assert!(matches!(
        multi_head_gated(&tape, &x, &heads, &gates, &projs),
        Err(Error::Contract(_))
    ));
}

// ── positions ──

#[test]
fn position_zero_alternates_zero_one() {
    let pe = sinusoidal_positions(3, 6).unwrap();
    assert_eq!(&pe.to_vec()[..6], &[0.0, 1.0, 0.0, 1.0, 0.0, 1.0]);
}

#[test]
fn positions_are_bounded_and_distinct() {
    let (n, d) = (512, 16);
    let pe = sinusoidal_positions(n, d).unwrap();
    assert!(pe.data().iter().all(|v| (-1.0..=1.0).contains(v)));
    let rows = to_rows(&pe);
    for i in 0..n {
        for j in i + 1..n {
            assert_ne!(rows[i], rows[j], "positions {i} and {j} collide");
        }
    }
}

#[test]
fn odd_dimension_rejected() {
    assert!(matches!(sinusoidal_positions(4, 5), Err(Error::Contract(_))));
}

// ── role assignment file ──

#[test]
fn role_file_round_trip() {
    let dir = std::env::temp_dir().join(format!("seqlab-roles-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("roles.tsv");
    std::fs::write(&path, "0\tlocal:2\n1\tself\n2\tglobal\n").unwrap();
    let roles = load_role_assignments(&path).unwrap();
    assert_eq!(roles, vec![Role::Local(2), Role::SelfOnly, Role::Global]);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn role_file_rejects_gaps() {
    let dir = std::env::temp_dir().join(format!("seqlab-roles-gap-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("roles.tsv");
    std::fs::write(&path, "0\tself\n2\tglobal\n").unwrap();
    assert!(load_role_assignments(&path).is_err());
    std::fs::remove_dir_all(&dir).ok();
}

// ── encoder layer ──

#[test]
fn encoder_layer_preserves_shape_and_backprops() {
    let mut rng = Prng::seed_from_u64(73);
    for agg in [Aggregation::Concat, Aggregation::Gated] {
        let cfg = MultiHeadConfig {
            num_heads: 2,
            d_model: 6,
            d_k: 3,
            aggregation: agg,
            roles: Some(vec![Role::Local(1), Role::Global]),
        };
        let layer = EncoderLayer::init(&mut rng, &cfg, 8, Activation::Tanh).unwrap();
        let x = random(&mut rng, &[4, 6], false);
        let tape = Tape::new();
        let y = layer.forward(&tape, &x, None).unwrap();
        assert_eq!(y.shape(), vec![4, 6]);
        let loss = tape.sum_all(&y);
        tape.backward(&loss).unwrap();
        let mut params = Vec::new();
        layer.params(&mut params, "enc");
        for (name, p) in &params {
            assert!(p.grad().is_some(), "{name} missing grad");
        }
    }
}
