//! End-to-end acceptance checks over the committed fixture corpus.
//!
//! Each criterion is one test that prints a single `PASS`/`FAIL` line (run
//! with `--nocapture` to see them stream) and fails loudly with the first
//! mismatch. Tolerances are pinned here, next to the expected values:
//!
//! * rates quoted to three decimals (precision, recall, accuracy) — ±0.001;
//! * per-group hallucination means quoted to one or two decimals — ±0.05;
//! * token-probability baseline means quoted to two decimals — ±0.01;
//! * hand-computable baseline scores — ±1e-12.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use radguard::calibration::{calibrate_lambda1, empirical_risk, CalibrationPoint};
use radguard::config::PipelineConfig;
use radguard::corpus::{categorize, Category, Report, ReportKind};
use radguard::entailment::EntailmentScore;
use radguard::evaluation::{
    agreement_from_rows, category_breakdown, confusion, entropy_baselines, entropy_split,
    read_clinician_csv, ConfusionCounts, SplitLabel, SummaryRow,
};
use radguard::fixtures::{
    fixtures_dir, read_calibration_points, read_category_sentences, read_entropy_records,
    read_eval_rows, EvalRow, SyntheticSentenceModel,
};
use radguard::flagging::{flag_report, flag_sentence, ReportRule, SentenceDecision};
use radguard::pipeline::{cmd_run_all, StudyFlags, Summary};
use radguard::Error;

const RATE_TOL: f64 = 1e-3;
const MEAN_TOL: f64 = 0.05;
const BASELINE_TOL: f64 = 0.01;
const EXACT_TOL: f64 = 1e-12;

// ---------------------------------------------------------------------------
// Harness

fn check(id: u32, name: &str, body: impl FnOnce() -> Result<(), String>) {
    match body() {
        Ok(()) => println!("criterion {id:02} ({name}): PASS"),
        Err(message) => {
            println!("criterion {id:02} ({name}): FAIL - {message}");
            panic!("criterion {id:02} ({name}) failed: {message}");
        }
    }
}

fn expect_eq<T: PartialEq + std::fmt::Debug>(what: &str, got: T, want: T) -> Result<(), String> {
    if got == want {
        Ok(())
    } else {
        Err(format!("{what}: got {got:?}, want {want:?}"))
    }
}

fn expect_near(what: &str, got: f64, want: f64, tol: f64) -> Result<(), String> {
    if (got - want).abs() <= tol {
        Ok(())
    } else {
        Err(format!("{what}: got {got}, want {want} +- {tol}"))
    }
}

fn s(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// Runs the whole pipeline over the committed corpus into a fresh directory.
fn run_pipeline() -> Result<(tempfile::TempDir, Summary), String> {
    let dir = tempfile::tempdir().map_err(s)?;
    let config = PipelineConfig::load(&fixtures_dir().join("medversa.toml")).map_err(s)?;
    let summary =
        cmd_run_all(&config, &dir.path().join("out"), Some(&fixtures_dir())).map_err(s)?;
    Ok((dir, summary))
}

fn counts(fh: u64, ff: u64, af: u64, ah: u64) -> ConfusionCounts {
    ConfusionCounts {
        flag_halluc: fh,
        flag_factual: ff,
        accept_factual: af,
        accept_halluc: ah,
    }
}

fn eval_confusion(rows: &[EvalRow]) -> Result<ConfusionCounts, String> {
    let decisions: Vec<_> = rows.iter().map(EvalRow::decision).collect();
    let labels: Vec<_> = rows.iter().map(EvalRow::label).collect();
    confusion(&decisions, &labels).map_err(s)
}

// ---------------------------------------------------------------------------
// 1. Threshold selection on the two labeled calibration sets.

#[test]
fn criterion_01_calibrated_sentence_thresholds() {
    check(1, "calibrated sentence thresholds", || {
        let started = Instant::now();
        let med = read_calibration_points(&fixtures_dir().join("calibration_medversa.jsonl"))
            .map_err(s)?;
        let rad = read_calibration_points(&fixtures_dir().join("calibration_radialog.jsonl"))
            .map_err(s)?;
        expect_eq("medversa calibration size", med.len(), 2000)?;
        expect_eq("radialog calibration size", rad.len(), 2000)?;

        for (name, points, alpha, want) in [
            ("medversa", &med, 0.05, 6),
            ("medversa", &med, 0.02, 4),
            ("radialog", &rad, 0.05, 4),
            ("radialog", &rad, 0.02, 2),
        ] {
            let choice = calibrate_lambda1(points, alpha, 10).map_err(s)?;
            expect_eq(
                &format!("{name} lambda1 at alpha={alpha}"),
                choice.lambda1,
                want,
            )?;
            if choice.adjusted_bound > alpha {
                return Err(format!(
                    "{name} alpha={alpha}: adjusted bound {} exceeds alpha",
                    choice.adjusted_bound
                ));
            }
        }
        let elapsed = started.elapsed();
        if elapsed.as_secs_f64() >= 1.0 {
            return Err(format!("calibration took {elapsed:?}, budget is < 1s"));
        }
        Ok(())
    });
}

// ---------------------------------------------------------------------------
// 2. Sentence-level precision and recall for both model corpora.

#[test]
fn criterion_02_sentence_precision_recall() {
    check(2, "sentence precision/recall", || {
        let (_dir, summary) = run_pipeline()?;
        expect_eq(
            "medversa test confusion",
            summary.confusion.counts,
            counts(147, 54, 852, 375),
        )?;
        expect_near(
            "medversa precision",
            summary
                .confusion
                .precision
                .ok_or("medversa precision is null")?,
            0.731,
            RATE_TOL,
        )?;
        expect_near("medversa recall", summary.confusion.recall, 0.282, RATE_TOL)?;

        let rows =
            read_eval_rows(&fixtures_dir().join("sentence_eval_radialog.jsonl")).map_err(s)?;
        let rad = eval_confusion(&rows)?;
        expect_eq("radialog confusion", rad, counts(153, 61, 650, 491))?;
        expect_near(
            "radialog precision",
            rad.precision().ok_or("radialog precision is null")?,
            0.715,
            RATE_TOL,
        )?;
        expect_near("radialog recall", rad.recall(), 0.238, RATE_TOL)?;
        Ok(())
    });
}

// ---------------------------------------------------------------------------
// 3. The headline summary table on the held-out split.

fn find_row(
    rows: &[SummaryRow],
    label: SplitLabel,
    lambda2: Option<u32>,
) -> Result<&SummaryRow, String> {
    rows.iter()
        .find(|r| r.split_label == label && r.lambda2 == lambda2)
        .ok_or_else(|| format!("missing summary row {label:?} at lambda2 {lambda2:?}"))
}

#[test]
fn criterion_03_summary_table() {
    check(3, "held-out summary table", || {
        let (_dir, summary) = run_pipeline()?;

        expect_eq("lambda1", summary.thresholds.lambda1, 6)?;
        expect_eq("headline lambda2", summary.thresholds.lambda2, 4)?;
        let want_sweep: BTreeMap<String, u32> = [("0.05", 4u32), ("0.1", 3), ("0.25", 2)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        expect_eq(
            "lambda2 sweep",
            summary.thresholds.lambda2_by_fraction,
            want_sweep,
        )?;
        expect_eq(
            "calibration sentences",
            summary.thresholds.calibration_size,
            2000,
        )?;
        expect_eq(
            "tabulated lambda2 values",
            summary.lambda2_values.clone(),
            vec![2, 3, 4],
        )?;

        let original = find_row(&summary.rows, SplitLabel::Original, None)?;
        expect_eq("original row size", original.n_reports, 208)?;
        expect_near(
            "original mean",
            original.avg_true_hallucinations,
            2.51,
            MEAN_TOL,
        )?;

        for (lambda2, accepted_n, accepted_mean, flagged_n, flagged_mean) in [
            (2u32, 151usize, 1.87, 57usize, 4.19),
            (3, 184, 2.13, 24, 5.42),
            (4, 197, 2.21, 11, 7.82),
        ] {
            let accepted = find_row(&summary.rows, SplitLabel::Accepted, Some(lambda2))?;
            expect_eq(
                &format!("accepted size at lambda2={lambda2}"),
                accepted.n_reports,
                accepted_n,
            )?;
            expect_near(
                &format!("accepted mean at lambda2={lambda2}"),
                accepted.avg_true_hallucinations,
                accepted_mean,
                MEAN_TOL,
            )?;
            let flagged = find_row(&summary.rows, SplitLabel::Flagged, Some(lambda2))?;
            expect_eq(
                &format!("flagged size at lambda2={lambda2}"),
                flagged.n_reports,
                flagged_n,
            )?;
            expect_near(
                &format!("flagged mean at lambda2={lambda2}"),
                flagged.avg_true_hallucinations,
                flagged_mean,
                MEAN_TOL,
            )?;
        }
        Ok(())
    });
}

// ---------------------------------------------------------------------------
// 4. Judge-vs-clinician agreement.

#[test]
fn criterion_04_judge_agreement() {
    check(4, "judge/clinician agreement", || {
        let rows = read_clinician_csv(&fixtures_dir().join("agreement_labels.csv")).map_err(s)?;
        expect_eq("labeled sentence pairs", rows.len(), 547)?;
        let (accuracy, table) = agreement_from_rows(&rows).map_err(s)?;
        expect_eq("both entailed", table.both_entailed, 279)?;
        expect_eq("judge only", table.judge_only, 47)?;
        expect_eq("reference only", table.reference_only, 42)?;
        expect_eq("neither", table.neither, 179)?;
        expect_near("agreement accuracy", accuracy, 0.837, RATE_TOL)
    });
}

// ---------------------------------------------------------------------------
// 5. The risk guarantee holds on held-out data across repeated calibrations.

#[test]
fn criterion_05_heldout_risk_within_budget() {
    check(5, "held-out risk within budget", || {
        const TRIALS: usize = 1000;
        const CAL: usize = 300;
        const HOLDOUT: usize = 600;
        let started = Instant::now();
        let model = SyntheticSentenceModel::default();

        for (seed, alpha) in [(101u64, 0.02f64), (102, 0.05), (103, 0.1)] {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut risks = Vec::with_capacity(TRIALS);
            for _ in 0..TRIALS {
                let cal = model.draw_many(&mut rng, CAL);
                let choice = calibrate_lambda1(&cal, alpha, model.n).map_err(s)?;
                let holdout = model.draw_many(&mut rng, HOLDOUT);
                risks.push(empirical_risk(&holdout, choice.lambda1).map_err(s)?);
            }
            let mean = risks.iter().sum::<f64>() / risks.len() as f64;
            let var =
                risks.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (risks.len() - 1) as f64;
            let standard_error = (var / risks.len() as f64).sqrt();
            if mean > alpha + 2.0 * standard_error {
                return Err(format!(
                    "alpha={alpha}: mean held-out risk {mean:.5} exceeds budget \
                     (+2se = {:.5})",
                    alpha + 2.0 * standard_error
                ));
            }
        }
        let elapsed = started.elapsed();
        if elapsed.as_secs() >= 60 {
            return Err(format!("simulation took {elapsed:?}, budget is < 60s"));
        }
        Ok(())
    });
}

// ---------------------------------------------------------------------------
// 6. Threshold selection agrees with an independent brute-force oracle.

/// Recomputes the selection from the definitions alone: walk the whole grid,
/// count flagged-factual points, form the bound, keep the largest feasible.
fn oracle_lambda1(points: &[CalibrationPoint], alpha: f64, n: u32) -> Option<u32> {
    let c = points.len() as f64;
    let mut best = None;
    for lambda in 0..=n + 1 {
        let flagged_factual = points
            .iter()
            .filter(|p| p.entailed && p.score < lambda)
            .count() as f64;
        let bound = (flagged_factual + 1.0) / (c + 1.0);
        if bound <= alpha {
            best = Some(lambda);
        }
    }
    best
}

#[test]
fn criterion_06_selection_matches_bruteforce() {
    check(6, "selection matches brute force", || {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        for case in 0..500 {
            let c = 1 + (rng.next_u32() as usize % 400);
            let entail_rate = (rng.next_u32() % 1000) as f64 / 1000.0;
            let points: Vec<CalibrationPoint> = (0..c)
                .map(|_| CalibrationPoint {
                    score: rng.next_u32() % 11,
                    entailed: ((rng.next_u32() % 1000) as f64 / 1000.0) < entail_rate,
                })
                .collect();
            let alpha = 0.005 + (rng.next_u32() % 1000) as f64 / 2000.0;

            let got = match calibrate_lambda1(&points, alpha, 10) {
                Ok(choice) => Some(choice.lambda1),
                Err(Error::CalibrationInfeasible { .. }) => None,
                Err(other) => return Err(format!("case {case}: unexpected error {other}")),
            };
            let want = oracle_lambda1(&points, alpha, 10);
            if got != want {
                return Err(format!(
                    "case {case} (c={c}, alpha={alpha:.4}): selected {got:?}, oracle says {want:?}"
                ));
            }

            // Risk must be nondecreasing along the whole grid.
            let mut previous = 0.0;
            for lambda in 0..=11 {
                let risk = empirical_risk(&points, lambda).map_err(s)?;
                if risk < previous {
                    return Err(format!(
                        "case {case}: risk decreased from {previous} to {risk} at lambda={lambda}"
                    ));
                }
                previous = risk;
            }
        }
        Ok(())
    });
}

// ---------------------------------------------------------------------------
// 7. Flag sets are nested across both thresholds.

#[test]
fn criterion_07_threshold_monotonicity() {
    check(7, "threshold monotonicity", || {
        let mut rng = ChaCha8Rng::seed_from_u64(71);

        // Sentence flags: anything flagged at a lower lambda1 stays flagged
        // at a higher one.
        for case in 0..1000 {
            let sentences = 1 + (rng.next_u32() as usize % 40);
            let scores: Vec<EntailmentScore> = (0..sentences)
                .map(|index| EntailmentScore {
                    study_id: "case".into(),
                    index,
                    value: rng.next_u32() % 11,
                    effective_n: 10,
                })
                .collect();
            let mut lo = rng.next_u32() % 12;
            let mut hi = rng.next_u32() % 12;
            if lo > hi {
                std::mem::swap(&mut lo, &mut hi);
            }
            for score in &scores {
                let at_lo = flag_sentence(score, lo).flagged;
                let at_hi = flag_sentence(score, hi).flagged;
                if at_lo && !at_hi {
                    return Err(format!(
                        "case {case}: score {} flagged at lambda1={lo} but not at {hi}",
                        score.value
                    ));
                }
            }
        }

        // Report flags: anything flagged at a higher lambda2 stays flagged
        // at a lower one, under both comparison rules.
        for case in 0..1000 {
            let sentences = 1 + (rng.next_u32() as usize % 30);
            let decisions: Vec<SentenceDecision> = (0..sentences)
                .map(|index| SentenceDecision {
                    study_id: "case".into(),
                    index,
                    score: rng.next_u32() % 11,
                    flagged: rng.next_u32() % 2 == 0,
                })
                .collect();
            let mut lo = 1 + rng.next_u32() % 8;
            let mut hi = 1 + rng.next_u32() % 8;
            if lo > hi {
                std::mem::swap(&mut lo, &mut hi);
            }
            for rule in [ReportRule::AtLeast, ReportRule::MoreThan] {
                let at_lo = flag_report(&decisions, lo, rule).map_err(s)?.flagged;
                let at_hi = flag_report(&decisions, hi, rule).map_err(s)?.flagged;
                if at_hi && !at_lo {
                    return Err(format!(
                        "case {case} ({rule:?}): report flagged at lambda2={hi} but not at {lo}"
                    ));
                }
            }
        }
        Ok(())
    });
}

// ---------------------------------------------------------------------------
// 8. Token-probability baselines: exact hand cases, then ranked grouping.

fn probe_report(logprobs: Vec<Vec<f64>>, distributions: Vec<Vec<Vec<f64>>>) -> Report {
    Report {
        study_id: "probe".into(),
        text: "Probe.".into(),
        temperature: 0.1,
        kind: ReportKind::Candidate,
        token_logprobs: Some(logprobs),
        token_distributions: Some(distributions),
    }
}

#[test]
fn criterion_08_probability_baselines() {
    check(8, "token-probability baselines", || {
        // A report whose every token had probability 1 scores zero on both
        // baselines.
        let certain = probe_report(
            vec![vec![1.0, 1.0, 1.0], vec![1.0, 1.0]],
            vec![
                vec![vec![1.0], vec![1.0], vec![1.0]],
                vec![vec![1.0], vec![1.0]],
            ],
        );
        let scores = entropy_baselines(&certain).map_err(s)?;
        expect_near(
            "all-certain neg-logprob",
            scores.avg_neg_logprob,
            0.0,
            EXACT_TOL,
        )?;
        expect_near(
            "all-certain entropy",
            scores.avg_entropy.ok_or("all-certain entropy missing")?,
            0.0,
            EXACT_TOL,
        )?;

        // A uniform two-way choice at every position scores ln 2 on both.
        let ln2 = std::f64::consts::LN_2;
        let coin = probe_report(
            vec![vec![0.5, 0.5, 0.5, 0.5]],
            vec![vec![vec![0.5, 0.5]; 4]],
        );
        let scores = entropy_baselines(&coin).map_err(s)?;
        expect_near(
            "uniform-pair neg-logprob",
            scores.avg_neg_logprob,
            ln2,
            EXACT_TOL,
        )?;
        expect_near(
            "uniform-pair entropy",
            scores.avg_entropy.ok_or("uniform-pair entropy missing")?,
            ln2,
            EXACT_TOL,
        )?;

        // Rank the fixture reports by each baseline and compare group means
        // of true hallucination counts at the three flag budgets.
        let records =
            read_entropy_records(&fixtures_dir().join("entropy_baseline.json")).map_err(s)?;
        expect_eq("baseline corpus size", records.len(), 197)?;
        let truth: BTreeMap<&str, f64> = records
            .iter()
            .map(|r| (r.study_id.as_str(), r.true_hallucinations as f64))
            .collect();
        let mut entropy_scores = Vec::new();
        let mut logprob_scores = Vec::new();
        for record in &records {
            let scored = entropy_baselines(&record.as_report()).map_err(s)?;
            entropy_scores.push((
                record.study_id.clone(),
                scored
                    .avg_entropy
                    .ok_or("fixture record lacks distributions")?,
            ));
            logprob_scores.push((record.study_id.clone(), scored.avg_neg_logprob));
        }
        let group_mean = |ids: &[String]| -> f64 {
            ids.iter().map(|id| truth[id.as_str()]).sum::<f64>() / ids.len() as f64
        };

        for (name, scores, expected) in [
            (
                "entropy",
                &entropy_scores,
                [(10usize, 3.50, 2.63), (23, 3.30, 2.59), (54, 3.20, 2.46)],
            ),
            (
                "neg-logprob",
                &logprob_scores,
                [(10, 2.10, 2.70), (23, 3.30, 2.59), (54, 3.22, 2.46)],
            ),
        ] {
            for (k, flagged_mean, accepted_mean) in expected {
                let (flagged, accepted) = entropy_split(scores, k).map_err(s)?;
                expect_near(
                    &format!("{name} flagged mean at k={k}"),
                    group_mean(&flagged),
                    flagged_mean,
                    BASELINE_TOL,
                )?;
                expect_near(
                    &format!("{name} accepted mean at k={k}"),
                    group_mean(&accepted),
                    accepted_mean,
                    BASELINE_TOL,
                )?;
            }
        }
        Ok(())
    });
}

// ---------------------------------------------------------------------------
// 9. Finding categories: classifier accuracy and per-category tables.

#[test]
fn criterion_09_category_tables() {
    check(9, "finding categories", || {
        let labeled =
            read_category_sentences(&fixtures_dir().join("category_sentences.json")).map_err(s)?;
        expect_eq("labeled category sentences", labeled.len(), 30)?;
        for sentence in &labeled {
            let got = categorize(&sentence.text);
            if got != sentence.category {
                return Err(format!(
                    "{:?} classified as {got:?}, want {:?}",
                    sentence.text, sentence.category
                ));
            }
        }

        let med_expected: [(Category, ConfusionCounts); 6] = [
            (Category::Lungs, counts(24, 15, 99, 187)),
            (Category::Pleural, counts(9, 7, 63, 327)),
            (Category::Cardiomediastinal, counts(34, 14, 100, 216)),
            (Category::Musculoskeletal, counts(7, 0, 4, 50)),
            (Category::Devices, counts(54, 9, 87, 33)),
            (Category::Other, counts(19, 9, 22, 39)),
        ];
        let rad_expected: [(Category, ConfusionCounts); 6] = [
            (Category::Lungs, counts(41, 19, 160, 158)),
            (Category::Pleural, counts(10, 9, 60, 251)),
            (Category::Cardiomediastinal, counts(31, 16, 103, 134)),
            (Category::Musculoskeletal, counts(14, 5, 16, 32)),
            (Category::Devices, counts(26, 5, 79, 39)),
            (Category::Other, counts(31, 7, 73, 36)),
        ];

        for (file, expected) in [
            ("category_eval_medversa.jsonl", med_expected),
            ("category_eval_radialog.jsonl", rad_expected),
        ] {
            let rows = read_eval_rows(&fixtures_dir().join(file)).map_err(s)?;
            let decisions: Vec<_> = rows.iter().map(EvalRow::decision).collect();
            let labels: Vec<_> = rows.iter().map(EvalRow::label).collect();
            let assignments: Vec<_> = rows
                .iter()
                .map(|r| {
                    r.assignment()
                        .ok_or_else(|| format!("{file}: row without category"))
                })
                .collect::<Result<_, _>>()?;
            let table = category_breakdown(&decisions, &labels, &assignments).map_err(s)?;
            for (category, want) in expected {
                expect_eq(&format!("{file} {category:?}"), table[&category], want)?;
            }
            // The per-category cells must be an exact partition of the flat
            // confusion over the same rows.
            let mut summed = ConfusionCounts::default();
            for cell in table.values() {
                summed.add(cell);
            }
            expect_eq(
                &format!("{file} partition total"),
                summed,
                eval_confusion(&rows)?,
            )?;
        }
        Ok(())
    });
}

// ---------------------------------------------------------------------------
// 10. The command-line pipeline is byte-deterministic end to end.

fn artifact_names() -> [&'static str; 6] {
    [
        "scores.jsonl",
        "labels.jsonl",
        "thresholds.json",
        "flags.jsonl",
        "summary.json",
        "summary.txt",
    ]
}

fn run_cli(config: &Path, out_dir: &Path) -> Result<(), String> {
    let status = std::process::Command::new(env!("CARGO_BIN_EXE_radguard"))
        .arg("--config")
        .arg(config)
        .arg("run-all")
        .arg("--out-dir")
        .arg(out_dir)
        .arg("--fixtures")
        .arg(fixtures_dir())
        .output()
        .map_err(s)?;
    if !status.status.success() {
        return Err(format!(
            "run-all exited with {:?}: {}",
            status.status.code(),
            String::from_utf8_lossy(&status.stderr)
        ));
    }
    Ok(())
}

#[test]
fn criterion_10_repeated_runs_are_byte_identical() {
    check(10, "byte-identical reruns", || {
        let dir = tempfile::tempdir().map_err(s)?;
        let config = fixtures_dir().join("medversa.toml");
        let first = dir.path().join("first");
        let second = dir.path().join("second");
        run_cli(&config, &first)?;
        run_cli(&config, &second)?;
        for name in artifact_names() {
            let a = std::fs::read(first.join(name)).map_err(s)?;
            let b = std::fs::read(second.join(name)).map_err(s)?;
            if a.is_empty() {
                return Err(format!("{name} is empty"));
            }
            if a != b {
                return Err(format!("{name} differs between identical runs"));
            }
        }
        Ok(())
    });
}

// ---------------------------------------------------------------------------
// Supplementary: flagged-sentence counts behave like a conservative estimate
// of each report's true hallucination count on the held-out split.

#[test]
fn flag_counts_rarely_exceed_true_hallucinations() {
    let (dir, _summary) = run_pipeline().expect("pipeline run");
    let out = dir.path().join("out");

    let flags_text = std::fs::read_to_string(out.join("flags.jsonl")).expect("flags.jsonl");
    let flags: Vec<StudyFlags> = flags_text
        .lines()
        .map(|line| serde_json::from_str(line).expect("flags row"))
        .collect();

    let labels_text = std::fs::read_to_string(out.join("labels.jsonl")).expect("labels.jsonl");
    let mut halluc_by_study: BTreeMap<String, u32> = BTreeMap::new();
    for line in labels_text.lines() {
        let label: serde_json::Value = serde_json::from_str(line).expect("label row");
        let study_id = label["study_id"].as_str().expect("study_id").to_string();
        let entailed = label["entailed"].as_u64().expect("entailed bit");
        let entry = halluc_by_study.entry(study_id).or_insert(0);
        if entailed == 0 {
            *entry += 1;
        }
    }

    // Restrict to the held-out half: the true hallucination count is only an
    // evaluation quantity there.
    let config = PipelineConfig::load(&fixtures_dir().join("medversa.toml")).expect("config");
    let studies =
        radguard::corpus::load_dataset(&config.dataset_path, config.n as usize).expect("corpus");
    let (_cal, test) =
        radguard::corpus::split_dataset(studies, config.calibration_count, config.seed)
            .expect("split");
    let test_ids: std::collections::BTreeSet<&str> =
        test.iter().map(|study| study.study_id.as_str()).collect();

    let mut conservative = 0usize;
    let mut total = 0usize;
    for row in flags
        .iter()
        .filter(|row| test_ids.contains(row.study_id.as_str()))
    {
        total += 1;
        if row.flag_count <= halluc_by_study[&row.study_id] {
            conservative += 1;
        }
    }
    assert_eq!(total, 208, "held-out split size");
    let fraction = conservative as f64 / total as f64;
    assert!(
        fraction >= 0.70,
        "flag_count <= true hallucinations on only {conservative}/{total} reports ({fraction:.3})"
    );
}
