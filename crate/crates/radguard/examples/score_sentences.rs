//! Support scores: how many samples back each candidate sentence.
//!
//! For each sentence s of the low-temperature candidate, the judge
//! classifies s against every usable high-temperature sample and the score
//! is E(s) = #completely entailed + #partially entailed, an integer in
//! [0, n]. A claim the model can reproduce under sampling noise earns a
//! high score; a one-off hallucination earns a low one. The ground-truth
//! label is stricter: entailed = 1 only on a Complete verdict against the
//! reference report, because a partially supported sentence still contains
//! unsupported content.

use radguard::corpus::tokenize;
use radguard::entailment::{label_against_ground_truth, reference_backend, score};
use radguard::fixtures::{self, SAMPLES_PER_STUDY};

fn main() -> radguard::Result<()> {
    let corpus = radguard::corpus::load_dataset(
        &fixtures::fixtures_dir().join("medversa_corpus.jsonl"),
        SAMPLES_PER_STUDY,
    )?;
    let judge = reference_backend();

    for study in corpus.iter().take(3) {
        println!("study {}:", study.study_id);
        let ground_truth = study.ground_truth.as_ref().expect("fixture has references");
        for sentence in tokenize(&study.candidate) {
            let scored = score(&sentence, &study.samples, &judge)?;
            let label = label_against_ground_truth(&sentence, ground_truth, &judge)?;
            println!(
                "  E = {:>2}/{}  entailed = {}  {}",
                scored.value,
                scored.effective_n,
                u8::from(label.entailed),
                sentence.text
            );
        }
    }
    Ok(())
}
