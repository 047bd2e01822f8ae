//! Flagging one report and rewriting it without the flagged sentences.
//!
//! Sentence rule: flagged iff E(s) < λ₁. Report rule: flagged iff the
//! number of flagged sentences reaches λ₂. A flagged report goes to human
//! review whole; alternatively the flagged sentences can simply be removed,
//! trading completeness for reliability.

use radguard::corpus::{load_dataset, tokenize};
use radguard::entailment::{reference_backend, score};
use radguard::fixtures::{self, DESIGN_LAMBDA1, SAMPLES_PER_STUDY};
use radguard::flagging::{flag_report, flag_sentence, remove_flagged, ReportRule};

fn main() -> radguard::Result<()> {
    let corpus = load_dataset(
        &fixtures::fixtures_dir().join("medversa_corpus.jsonl"),
        SAMPLES_PER_STUDY,
    )?;
    let judge = reference_backend();
    let lambda1 = DESIGN_LAMBDA1;
    let lambda2 = 2;

    // Pick a study with at least two low-support sentences so the report
    // rule actually fires.
    for study in &corpus {
        let mut decisions = Vec::new();
        for sentence in tokenize(&study.candidate) {
            let scored = score(&sentence, &study.samples, &judge)?;
            decisions.push(flag_sentence(&scored, lambda1));
        }
        let report = flag_report(&decisions, lambda2, ReportRule::AtLeast)?;
        if !report.flagged {
            continue;
        }

        println!("study {}: {} of {} sentences flagged (lambda1 = {lambda1}), report flagged at lambda2 = {lambda2}\n",
            study.study_id, report.flag_count, decisions.len());
        for (sentence, decision) in tokenize(&study.candidate).iter().zip(&decisions) {
            let mark = if decision.flagged { "FLAG" } else { "  ok" };
            println!("  [{mark}] E = {:>2}  {}", decision.score, sentence.text);
        }

        let rewritten = remove_flagged(&study.candidate, &decisions)?;
        println!("\nrewritten candidate:\n  {}", rewritten.text);
        return Ok(());
    }
    println!("no report in the fixture corpus fires at lambda2 = {lambda2}");
    Ok(())
}
