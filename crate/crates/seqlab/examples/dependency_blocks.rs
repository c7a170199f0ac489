//! Dependency-tree machinery: parse CoNLL-style text, split sentences into
//! major/surrounding segments by core roles, and gather the structural
//! blocks (entity + parent + siblings + children) used for relation
//! representations.
//!
//! Run with: `cargo run --example dependency_blocks`

use seqlab::encoders::{
    extract_blocks, parse_conll, segment_sentence, Span, DEFAULT_CORE_ROLES,
};

fn main() -> seqlab::Result<()> {
    let conll = "\
1\tthe\tDET\t2\tdet
2\tfounder\tNOUN\t3\tnsubj
3\tsold\tVERB\t0\troot
4\tthe\tDET\t5\tdet
5\tcompany\tNOUN\t3\tobj
6\tquietly\tADV\t3\tadvmod
";
    let tree = &parse_conll(conll)?[0];
    println!("tokens: {:?}", tree.tokens());
    println!("heads:  {:?} (1-based, 0 = root)", tree.heads());

    let seg = segment_sentence(tree, &DEFAULT_CORE_ROLES);
    let words = |idx: &[usize]| -> Vec<&str> {
        idx.iter().map(|&i| tree.tokens()[i - 1].as_str()).collect()
    };
    println!("major segment:       {:?} -> {:?}", seg.major, words(&seg.major));
    println!("surrounding segment: {:?} -> {:?}", seg.surrounding, words(&seg.surrounding));

    // structural blocks for the entity pair (founder, company)
    let blocks = extract_blocks(tree, Span::new(2, 2), Span::new(5, 5))?;
    println!("block(founder): {:?} -> {:?}", blocks.e1_block, words(&blocks.e1_block));
    println!("block(company): {:?} -> {:?}", blocks.e2_block, words(&blocks.e2_block));
    Ok(())
}
