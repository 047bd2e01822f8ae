//! How often the automatic judge agrees with clinicians.
//!
//! The CSV holds one row per audited sentence: the judge's binary entailed
//! label and the clinician's. Raw accuracy is the share of matching rows;
//! the 2×2 table shows where the disagreements live (judge-only vs
//! reference-only).

use radguard::evaluation::{agreement_from_rows, read_clinician_csv};
use radguard::fixtures;

fn main() -> radguard::Result<()> {
    let rows = read_clinician_csv(&fixtures::fixtures_dir().join("agreement_labels.csv"))?;
    let (accuracy, table) = agreement_from_rows(&rows)?;

    println!("{} audited sentences", rows.len());
    println!("accuracy = {accuracy:.4} ({} matches)", table.matches());
    println!("\n                  clinician: entailed   not");
    println!(
        "judge: entailed   {:>18} {:>5}",
        table.both_entailed, table.judge_only
    );
    println!(
        "judge: not        {:>18} {:>5}",
        table.reference_only, table.neither
    );
    Ok(())
}
