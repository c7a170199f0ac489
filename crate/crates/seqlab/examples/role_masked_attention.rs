//! Role-guided attention masks: each mask is an n-by-n matrix of 0 / -inf
//! added to the attention scores, so a head can only look where its role
//! permits. Masked positions get exactly zero weight.
//!
//! Run with: `cargo run --example role_masked_attention`

use seqlab::attention::{attention_weights, build_role_mask, Role};
use seqlab::encoders::parse_conll;
use seqlab::rng::Prng;
use seqlab::tensor::{Tape, Tensor};

fn show_mask(role: Role, n: usize, tree: Option<&seqlab::encoders::DependencyTree>) {
    let mask = build_role_mask(role, n, tree).unwrap();
    println!("{role} mask ({n} positions):");
    for i in 0..n {
        let row: String =
            (0..n).map(|j| if mask.allows(i, j) { " 1" } else { " ." }).collect();
        println!("  {row}");
    }
}

fn main() -> seqlab::Result<()> {
    let n = 6;
    for role in [Role::Global, Role::SelfOnly, Role::Forward, Role::Local(1)] {
        show_mask(role, n, None);
    }

    // the syntactic role follows dependency arcs
    let conll = "1\tthe\tDET\t2\tdet\n2\tcat\tNOUN\t3\tnsubj\n3\tsat\tVERB\t0\troot\n4\tdown\tADV\t3\tadvmod\n";
    let tree = &parse_conll(conll)?[0];
    show_mask(Role::Syntactic, tree.len(), Some(tree));

    // attention weights under a local window: out-of-window weights are 0
    let mut rng = Prng::seed_from_u64(5);
    let q = Tensor::new((0..n * 4).map(|_| rng.uniform(-1.0, 1.0)).collect(), &[n, 4])?;
    let k = Tensor::new((0..n * 4).map(|_| rng.uniform(-1.0, 1.0)).collect(), &[n, 4])?;
    let mask = build_role_mask(Role::Local(1), n, None)?;
    let tape = Tape::new();
    let weights = attention_weights(&tape, &q, &k, Some(&mask))?;
    println!("local(1) attention weights:");
    let data = weights.to_vec();
    for i in 0..n {
        let row: Vec<String> =
            data[i * n..(i + 1) * n].iter().map(|w| format!("{w:.3}")).collect();
        println!("  [{}]", row.join(", "));
    }
    Ok(())
}
