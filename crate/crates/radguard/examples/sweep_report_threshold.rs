//! Report-threshold sweep: trading review volume for catch rate.
//!
//! After λ₁ fixes which sentences are flagged, λ₂ decides which whole
//! reports go to a human: a report is flagged when at least λ₂ of its
//! sentences are. Raising λ₂ shrinks the review pile and lowers the catch
//! rate. The sweep picks, for each target review fraction f, the smallest
//! λ₂ whose flagged-report share on the calibration split is ≤ f.

use std::collections::BTreeMap;

use radguard::calibration::sweep_lambda2;
use radguard::corpus::{load_dataset, split_dataset, tokenize};
use radguard::entailment::{reference_backend, score};
use radguard::fixtures::{
    self, CALIBRATION_STUDIES, DESIGN_LAMBDA1, FIXTURE_SEED, SAMPLES_PER_STUDY,
};

fn main() -> radguard::Result<()> {
    let corpus = load_dataset(
        &fixtures::fixtures_dir().join("medversa_corpus.jsonl"),
        SAMPLES_PER_STUDY,
    )?;
    let (calibration, _) = split_dataset(corpus, CALIBRATION_STUDIES, FIXTURE_SEED)?;
    let judge = reference_backend();

    let lambda1 = DESIGN_LAMBDA1;
    let mut counts: BTreeMap<String, u32> = BTreeMap::new();
    for study in &calibration {
        let mut flagged = 0;
        for sentence in tokenize(&study.candidate) {
            if score(&sentence, &study.samples, &judge)?.value < lambda1 {
                flagged += 1;
            }
        }
        counts.insert(study.study_id.clone(), flagged);
    }

    let count_values: Vec<u32> = counts.values().copied().collect();
    let total = count_values.len() as f64;
    println!(
        "flag-count distribution over {} calibration reports (lambda1 = {lambda1}):",
        count_values.len()
    );
    let max = count_values.iter().copied().max().unwrap_or(0);
    for h in 0..=max {
        let n = count_values.iter().filter(|&&c| c == h).count();
        println!("  h = {h}: {n:>4} reports");
    }

    let swept = sweep_lambda2(&count_values, &[0.05, 0.10, 0.25])?;
    println!("\ntarget fraction -> lambda2 (achieved fraction):");
    for (fraction, lambda2) in &swept {
        let achieved = count_values.iter().filter(|&&h| h >= *lambda2).count() as f64 / total;
        println!("  {fraction:>5} -> {lambda2}  ({achieved:.4})");
    }
    Ok(())
}
