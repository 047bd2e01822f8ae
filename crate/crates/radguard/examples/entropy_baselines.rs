//! Token-probability baselines to compare flagging against.
//!
//! Two per-report uncertainty scores from the candidate's own token
//! probabilities, no sampling required:
//!
//! * average negative log-probability: −(1/T)·Σ_t ln p_t over the T
//!   realized tokens;
//! * average next-token entropy: (1/T)·Σ_t H_t where
//!   H_t = −Σ_w q_t(w)·ln q_t(w) over the distribution slice the serving
//!   API exposed at position t.
//!
//! Hand-checkable anchors: a report whose every token had probability 1
//! scores 0 on both; a uniform two-way distribution at every position has
//! entropy ln 2 ≈ 0.6931. The demo then ranks a fixture corpus by each
//! score and shows that the top-k reports carry more true hallucinations
//! than the rest — the same accepted/flagged comparison the calibrated
//! pipeline is evaluated with.

use radguard::corpus::{Report, ReportKind};
use radguard::evaluation::{entropy_baselines, entropy_split};
use radguard::fixtures::{self, read_entropy_records};

fn probe(name: &str, logprobs: Vec<Vec<f64>>, dists: Option<Vec<Vec<Vec<f64>>>>) {
    let report = Report {
        study_id: name.into(),
        text: String::new(),
        temperature: 0.0,
        kind: ReportKind::Candidate,
        token_logprobs: Some(logprobs),
        token_distributions: dists,
    };
    let scores = entropy_baselines(&report).expect("probe inputs are valid");
    println!(
        "{name}: avg_neg_logprob = {:.6}, avg_entropy = {}",
        scores.avg_neg_logprob,
        scores
            .avg_entropy
            .map_or_else(|| "absent".into(), |h| format!("{h:.6}")),
    );
}

fn main() -> radguard::Result<()> {
    probe(
        "all-certain",
        vec![vec![1.0, 1.0, 1.0]],
        Some(vec![vec![vec![1.0], vec![1.0]]]),
    );
    probe(
        "uniform-pair",
        vec![vec![0.5; 4]],
        Some(vec![vec![vec![0.5, 0.5]; 4]]),
    );

    let records = read_entropy_records(&fixtures::fixtures_dir().join("entropy_baseline.json"))?;
    let total: usize = records.iter().map(|r| r.true_hallucinations).sum();
    println!(
        "\nfixture corpus: {} reports, {} true hallucinations total",
        records.len(),
        total
    );

    let mut by_entropy = Vec::new();
    let mut by_neg_logprob = Vec::new();
    let mut halluc = std::collections::BTreeMap::new();
    for record in &records {
        let scores = entropy_baselines(&record.as_report())?;
        by_entropy.push((
            record.study_id.clone(),
            scores.avg_entropy.expect("fixture has slices"),
        ));
        by_neg_logprob.push((record.study_id.clone(), scores.avg_neg_logprob));
        halluc.insert(record.study_id.clone(), record.true_hallucinations);
    }

    for (name, scores) in [("entropy", &by_entropy), ("neg-logprob", &by_neg_logprob)] {
        println!("\nranked by avg {name}:");
        for k in [10, 23, 54] {
            let (flagged, accepted) = entropy_split(scores, k)?;
            let mean = |ids: &[String]| {
                ids.iter().map(|id| halluc[id] as f64).sum::<f64>() / ids.len() as f64
            };
            println!(
                "  top {k:>2} flagged: {:.2} hallucinations/report vs {:.2} accepted",
                mean(&flagged),
                mean(&accepted)
            );
        }
    }
    Ok(())
}
