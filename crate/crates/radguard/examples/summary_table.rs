//! The headline evaluation table: what review budgets buy.
//!
//! Reports are split at each λ₂ into accepted and flagged; for every group
//! the table shows its size, the mean number of truly hallucinated
//! sentences per report (candidate sentences the reference report does not
//! completely entail), and the mean of every ingested external metric.
//! Flagging works when the flagged rows concentrate hallucinations: their
//! mean should sit far above the original average, and the accepted rows
//! below it.

use radguard::corpus::{load_dataset, split_dataset, tokenize};
use radguard::entailment::{label_against_ground_truth, reference_backend, score};
use radguard::evaluation::{render_summary_text, summary_table};
use radguard::fixtures::{
    self, CALIBRATION_STUDIES, DESIGN_LAMBDA1, FIXTURE_SEED, SAMPLES_PER_STUDY,
};
use radguard::flagging::flag_sentence;

fn main() -> radguard::Result<()> {
    let corpus = load_dataset(
        &fixtures::fixtures_dir().join("medversa_corpus.jsonl"),
        SAMPLES_PER_STUDY,
    )?;
    let (_, test) = split_dataset(corpus, CALIBRATION_STUDIES, FIXTURE_SEED)?;
    let judge = reference_backend();

    let mut decisions = Vec::new();
    let mut labels = Vec::new();
    for study in &test {
        let ground_truth = study.ground_truth.as_ref().expect("fixture has references");
        for sentence in tokenize(&study.candidate) {
            let scored = score(&sentence, &study.samples, &judge)?;
            decisions.push(flag_sentence(&scored, DESIGN_LAMBDA1));
            labels.push(label_against_ground_truth(&sentence, ground_truth, &judge)?);
        }
    }

    let rows = summary_table(&test, &decisions, &labels, &[2, 3, 4])?;
    print!("{}", render_summary_text(&rows));
    Ok(())
}
