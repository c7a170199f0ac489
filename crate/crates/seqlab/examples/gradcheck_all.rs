//! Finite-difference verification of every model kind: each parameter
//! group's analytic gradient is compared against central differences of the
//! batch loss at toy dimensions.
//!
//! Run with: `cargo run --release --example gradcheck_all`

use seqlab::harness::run_gradcheck;

fn main() -> seqlab::Result<()> {
    let report = run_gradcheck(None)?;
    for entry in &report.entries {
        println!("{:>20} {:<22} worst rel err {:.3e}", entry.model, entry.group, entry.worst_rel_err);
    }
    println!(
        "\n{} parameter groups, worst {:.3e}, threshold {:.0e}: {}",
        report.entries.len(),
        report.worst(),
        report.threshold,
        if report.pass { "PASS" } else { "FAIL" }
    );
    Ok(())
}
