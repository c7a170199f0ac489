//! Evaluation toolkit: confusion-matrix metrics with explicit "undefined"
//! signaling, and BLEU with clipped n-gram precisions and the brevity
//! penalty.
//!
//! Run with: `cargo run --example metrics_and_bleu`

use seqlab::eval::{bleu, confusion_from_pairs, BleuStats, MetricReport};

fn main() -> seqlab::Result<()> {
    let pairs = [
        ("pos", "pos"),
        ("pos", "pos"),
        ("pos", "neg"),
        ("neg", "pos"),
        ("neg", "neg"),
        ("neu", "neu"),
    ];
    let cm = confusion_from_pairs(&pairs, &["pos", "neg", "neu"])?;
    println!("accuracy: {:?}", cm.accuracy());
    println!("precision(pos): {:?}, recall(pos): {:?}, f1(pos): {:?}",
        cm.precision(0), cm.recall(0), cm.f1(0));
    println!("macro f1: {:?}, micro f1: {:?}", cm.macro_f1(), cm.micro_f1());

    // a class that is never predicted has undefined precision, not zero
    let lopsided = confusion_from_pairs(&[("a", "a"), ("a", "b")], &["a", "b"])?;
    println!("never-predicted class precision: {:?}", lopsided.precision(1));

    let report = MetricReport::from_confusion("classification", &cm);
    println!("report:\n{}", report.to_json_pretty());

    // BLEU: perfect copy scores exactly 1
    let reference: Vec<&str> = "the cat sat on the mat".split(' ').collect();
    println!("BLEU(x, x) = {}", bleu(&reference, std::slice::from_ref(&reference), 4, None)?);

    // clipping: "the the the ..." gets credit for at most two "the"s
    let spam: Vec<&str> = std::iter::repeat_n("the", 7).collect();
    let mut stats = BleuStats::new(1, None)?;
    stats.accumulate(&spam, std::slice::from_ref(&reference))?;
    println!("modified unigram precision of 'the'x7: {} (= 2/7)", stats.modified_precision(1));

    // brevity: a too-short candidate is penalized even with perfect n-grams
    let short: Vec<&str> = reference[..3].to_vec();
    println!("BLEU(prefix of 3) = {:.4}", bleu(&short, &[reference], 2, None)?);
    Ok(())
}
