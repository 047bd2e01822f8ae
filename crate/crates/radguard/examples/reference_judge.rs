//! The deterministic rule-based entailment judge.
//!
//! The judge answers the same wire contract as the LLM backend but from
//! finding-term matching with negation handling, so tests and offline runs
//! are hermetic. A claim sentence is reduced to its finding terms (content
//! words minus stopwords, anatomy, and modifiers); then:
//!
//! * CompletelyEntailed — some report sentence asserts all the claim's
//!   terms positively with matching severity/laterality modifiers; negated
//!   claims ("no pneumothorax") are entailed unless contradicted.
//! * PartiallyEntailed — the terms match but a modifier does not
//!   ("large" vs "small", "right" vs "left").
//! * NotEntailed — no report sentence covers the terms, or the report
//!   asserts positively what the claim negates.

use radguard::entailment::{reference_backend, JudgeBackend};

fn main() -> radguard::Result<()> {
    let judge = reference_backend();

    let report = "Heart size is normal. There is a small left pleural effusion. \
                  No pneumothorax. Lungs are otherwise clear.";

    let sentences = [
        "A small left pleural effusion is present.",
        "There is no pneumothorax.",
        "There is a large pneumothorax.",
        "There is a large right pleural effusion.",
        "The heart is enlarged.",
    ];

    println!("report:\n  {report}\n");
    for sentence in sentences {
        let verdict = judge.judge_single(sentence, report)?;
        println!("{verdict:?}\n  {sentence}");
    }

    // Batch form: one sentence against a study's samples, one verdict each.
    let samples = [
        "There is a left pleural effusion.",
        "Left effusion is seen.",
        "Lungs are clear.",
    ];
    let sample_refs: Vec<&str> = samples.to_vec();
    let verdicts = judge.judge_batch("A left effusion is present.", &sample_refs)?;
    println!("\nbatch: {verdicts:?}");
    Ok(())
}
