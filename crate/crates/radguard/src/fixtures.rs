//! Deterministic fixture data for examples and tests.
//!
//! Everything under the crate's `fixtures/` directory is generated by
//! [`generate_all`] from fixed seeds — never hand-edited. The generator
//! engineers score and label distributions so the full pipeline lands on
//! known round numbers, then replays the library's own code over the data
//! and asserts every one of those targets before a single file is written.
//! That makes the fixtures an executable cross-check of the arithmetic: if
//! calibration, flagging, evaluation, or the rule-based judge drift, the
//! generator (and the guard test that re-runs it) fails loudly.
//!
//! The designed targets, all verified by [`generate_all`]:
//!
//! * `calibration_medversa.jsonl` selects λ₁ = 6 at α = 0.05 and λ₁ = 4 at
//!   α = 0.02 on the 0..=11 grid (2000 points);
//!   `calibration_radialog.jsonl` selects 4 and 2.
//! * `medversa_corpus.jsonl` holds 508 studies. Split with
//!   [`CALIBRATION_STUDIES`] and [`FIXTURE_SEED`], the calibration half
//!   reproduces the `calibration_medversa` point multiset through the
//!   rule-based judge, and its per-report flag counts sweep to
//!   λ₂ = 4 / 3 / 2 at target fractions 0.05 / 0.10 / 0.25. The test half
//!   yields sentence confusion counts (147, 54, 852, 375) at λ₁ = 6 and
//!   report splits 151/57, 184/24, 197/11 at λ₂ = 2, 3, 4 with mean true
//!   hallucination counts 283/151, 239/57, 392/184, 130/24, 436/197, 86/11.
//! * `sentence_eval_radialog.jsonl` reduces to confusion counts
//!   (153, 61, 650, 491); the two `category_eval_*.jsonl` files reproduce
//!   fixed per-category tables.
//! * `agreement_labels.csv` holds 547 paired verdict bits agreeing on
//!   458 (accuracy 458/547 ≈ 0.837).
//! * `entropy_baseline.json` holds 197 token-probability records whose two
//!   baseline scores rank reports so the top 10 / 23 / 54 carry true
//!   hallucination sums 35 / 76 / 173 (entropy) and 21 / 76 / 174
//!   (negative log-probability) out of 526 total.
//! * `category_sentences.json` is a 30-sentence labeled set the keyword
//!   classifier must get 100% right, including priority conflicts.
//! * `medversa.toml` is a ready-to-run offline config for the corpus.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::calibration::{calibrate_lambda1, sweep_lambda2, CalibrationPoint};
use crate::config::{JudgeBackendKind, PipelineConfig};
use crate::corpus::{
    categorize, save_dataset, split_dataset, tokenize, Category, Report, ReportKind, Study,
};
use crate::entailment::{self, CalibrationLabel, EntailmentScore, JudgeBackend};
use crate::error::{Error, Result};
use crate::evaluation::{
    agreement_from_rows, category_breakdown, confusion, entropy_baselines, entropy_split,
    flag_counts, summary_table, write_clinician_csv, CategoryAssignment, ClinicianRow, SplitLabel,
};
use crate::flagging::{flag_sentence, SentenceDecision};
use crate::fsio::{read_json, read_jsonl, write_json_pretty, write_jsonl};

/// Seed for the corpus split and every cosmetic shuffle in the generator.
pub const FIXTURE_SEED: u64 = 17;
/// High-temperature samples per study in the fixture corpus.
pub const SAMPLES_PER_STUDY: usize = 10;
/// Calibration half of the 508-study corpus.
pub const CALIBRATION_STUDIES: usize = 300;

/// The sentence threshold the corpus is designed around: α = 0.05 on the
/// calibration half selects exactly this value.
pub const DESIGN_LAMBDA1: u32 = 6;

/// Single-finding vocabulary; every generated sentence asserts exactly one
/// of these, so the rule-based judge sees one finding term per claim.
const FINDINGS: [&str; 20] = [
    "pneumothorax",
    "effusion",
    "consolidation",
    "atelectasis",
    "edema",
    "cardiomegaly",
    "opacity",
    "pneumonia",
    "nodule",
    "fracture",
    "granuloma",
    "emphysema",
    "fibrosis",
    "thickening",
    "congestion",
    "hernia",
    "scoliosis",
    "kyphosis",
    "osteopenia",
    "infiltrate",
];

/// Neutral sentence present in every sample and ground-truth report so no
/// report is ever empty. Its words never overlap the finding vocabulary.
const FILLER: &str = "Comparison radiograph reviewed.";

// Per-score sentence counts for the calibration point sets; index = support
// score 0..=10. "Entailed" means the ground truth completely entails the
// sentence, so low-score entailed sentences are the miss-risk contributors.
const MEDVERSA_ENTAILED: [usize; 11] = [5, 5, 10, 10, 30, 30, 30, 150, 250, 300, 460];
const MEDVERSA_UNENTAILED: [usize; 11] = [50, 40, 35, 30, 20, 15, 80, 150, 150, 100, 50];
const RADIALOG_ENTAILED: [usize; 11] = [10, 20, 30, 30, 50, 100, 100, 150, 200, 250, 260];
const RADIALOG_UNENTAILED: [usize; 11] = [250, 180, 130, 90, 60, 35, 20, 15, 10, 5, 5];

/// Flagged-sentence counts per calibration report: 10×4, 18×3, 40×2, 106×1,
/// 126×0. Sums to the 280 low-score sentences in the calibration pool and
/// sweeps to λ₂ = 4/3/2 at fractions 0.05/0.10/0.25.
const CALIBRATION_FLAGS: [(usize, usize); 5] = [(4, 10), (3, 18), (2, 40), (1, 106), (0, 126)];

/// Per-category confusion targets, in [`ConfusionCounts`] field order:
/// (flagged hallucinated, flagged factual, accepted factual, accepted
/// hallucinated).
///
/// [`ConfusionCounts`]: crate::evaluation::ConfusionCounts
const MEDVERSA_CATEGORY_TABLE: [(Category, [u64; 4]); 6] = [
    (Category::Lungs, [24, 15, 99, 187]),
    (Category::Pleural, [9, 7, 63, 327]),
    (Category::Cardiomediastinal, [34, 14, 100, 216]),
    (Category::Musculoskeletal, [7, 0, 4, 50]),
    (Category::Devices, [54, 9, 87, 33]),
    (Category::Other, [19, 9, 22, 39]),
];

const RADIALOG_CATEGORY_TABLE: [(Category, [u64; 4]); 6] = [
    (Category::Lungs, [41, 19, 160, 158]),
    (Category::Pleural, [10, 9, 60, 251]),
    (Category::Cardiomediastinal, [31, 16, 103, 134]),
    (Category::Musculoskeletal, [14, 5, 16, 32]),
    (Category::Devices, [26, 5, 79, 39]),
    (Category::Other, [31, 7, 73, 36]),
];

/// Whole-collection confusion targets for the flat sentence eval file.
const RADIALOG_SENTENCE_EVAL: [u64; 4] = [153, 61, 650, 491];

/// Agreement fixture cell counts: (both flagged-equivalent judgments agree
/// positive, judge-only, reference-only, both negative).
const AGREEMENT_CELLS: [u64; 4] = [279, 47, 42, 179];

/// One entropy-fixture cell: (entropy band, neg-logprob band,
/// [(true hallucinations, report count)]).
type EntropyCell = (usize, usize, &'static [(usize, usize)]);

/// Entropy fixture layout. Each report belongs to one rank band per
/// baseline: band 1 = ranks 1..=10, band 2 = 11..=23, band 3 = 24..=54,
/// band 4 = 55..=197, ranked by descending score.
const ENTROPY_CELLS: [EntropyCell; 7] = [
    (1, 4, &[(4, 5), (3, 5)]),
    (2, 4, &[(4, 2), (3, 11)]),
    (3, 4, &[(4, 4), (3, 27)]),
    (4, 1, &[(3, 1), (2, 9)]),
    (4, 2, &[(5, 3), (4, 10)]),
    (4, 3, &[(4, 8), (3, 20), (2, 3)]),
    (4, 4, &[(3, 1), (2, 88)]),
];

/// First rank of each band (1-indexed, descending score order).
const BAND_STARTS: [usize; 4] = [1, 11, 24, 55];

/// Scores handed to synthesized flagged rows, cycled for variety.
const LOW_SCORES: [u32; 6] = [0, 1, 2, 3, 4, 5];
/// Scores handed to synthesized accepted rows.
const HIGH_SCORES: [u32; 5] = [6, 7, 8, 9, 10];

/// One row of a synthesized evaluation fixture: a flag decision and a
/// reference label for one sentence, optionally with a finding category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub study_id: String,
    pub index: usize,
    pub score: u32,
    pub flagged: bool,
    #[serde(with = "crate::entailment::bool_as_int")]
    pub entailed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<Category>,
}

impl EvalRow {
    pub fn decision(&self) -> SentenceDecision {
        SentenceDecision {
            study_id: self.study_id.clone(),
            index: self.index,
            score: self.score,
            flagged: self.flagged,
        }
    }

    pub fn label(&self) -> CalibrationLabel {
        CalibrationLabel {
            study_id: self.study_id.clone(),
            index: self.index,
            entailed: self.entailed,
        }
    }

    pub fn assignment(&self) -> Option<CategoryAssignment> {
        self.category.map(|category| CategoryAssignment {
            study_id: self.study_id.clone(),
            index: self.index,
            category,
        })
    }
}

/// One report of the token-probability baseline fixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyRecord {
    pub study_id: String,
    /// Reference count of hallucinated sentences, ingested as-is.
    pub true_hallucinations: usize,
    pub token_logprobs: Vec<Vec<f64>>,
    pub token_distributions: Vec<Vec<Vec<f64>>>,
}

impl EntropyRecord {
    /// Report shell carrying just the token data, for the baseline scorers.
    pub fn as_report(&self) -> Report {
        Report {
            study_id: self.study_id.clone(),
            text: "Token probability record.".into(),
            temperature: 0.1,
            kind: ReportKind::Candidate,
            token_logprobs: Some(self.token_logprobs.clone()),
            token_distributions: Some(self.token_distributions.clone()),
        }
    }
}

/// One sentence of the category classification fixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSentence {
    pub text: String,
    pub category: Category,
}

/// Per-sentence generative model for coverage simulations: a sentence is
/// factual with probability `factual_rate`; each of `n` samples then
/// independently supports it with the class-specific support probability.
/// Factual sentences concentrate at high scores, hallucinated ones at low
/// scores, which is the regime the threshold selection is built for.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSentenceModel {
    pub factual_rate: f64,
    pub factual_support: f64,
    pub hallucination_support: f64,
    pub n: u32,
}

impl Default for SyntheticSentenceModel {
    fn default() -> Self {
        SyntheticSentenceModel {
            factual_rate: 0.64,
            factual_support: 0.82,
            hallucination_support: 0.35,
            n: 10,
        }
    }
}

impl SyntheticSentenceModel {
    pub fn draw(&self, rng: &mut impl RngCore) -> CalibrationPoint {
        let entailed = unit_f64(rng) < self.factual_rate;
        let support = if entailed {
            self.factual_support
        } else {
            self.hallucination_support
        };
        let score = (0..self.n).filter(|_| unit_f64(rng) < support).count() as u32;
        CalibrationPoint { score, entailed }
    }

    pub fn draw_many(&self, rng: &mut impl RngCore, count: usize) -> Vec<CalibrationPoint> {
        (0..count).map(|_| self.draw(rng)).collect()
    }
}

/// The crate's committed fixture directory.
pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

/// Generates every fixture file into `dir`, asserting all designed targets
/// against the library's own pipeline first. Panics on any drift: a failed
/// assertion here means generator and pipeline disagree, which is a bug in
/// one of them, not a data problem.
pub fn generate_all(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut rng = ChaCha8Rng::seed_from_u64(FIXTURE_SEED ^ 0x5EED_F1C7_0000_0001);

    let corpus = medversa_corpus()?;
    let med_points = histogram_points(&MEDVERSA_ENTAILED, &MEDVERSA_UNENTAILED, &mut rng);
    let rad_points = histogram_points(&RADIALOG_ENTAILED, &RADIALOG_UNENTAILED, &mut rng);
    let rad_eval = synth_rows("rd", &[(None, RADIALOG_SENTENCE_EVAL)], &mut rng);
    let cat_med = synth_rows("mvc", &with_categories(&MEDVERSA_CATEGORY_TABLE), &mut rng);
    let cat_rad = synth_rows("rdc", &with_categories(&RADIALOG_CATEGORY_TABLE), &mut rng);
    let agreement = agreement_rows(&mut rng);
    let entropy = entropy_records();
    let labeled = labeled_sentences();

    self_check(
        &corpus,
        &med_points,
        &rad_points,
        &rad_eval,
        &cat_med,
        &cat_rad,
        &agreement,
        &entropy,
        &labeled,
    )?;

    save_dataset(&dir.join("medversa_corpus.jsonl"), &corpus)?;
    write_jsonl(&dir.join("calibration_medversa.jsonl"), &med_points)?;
    write_jsonl(&dir.join("calibration_radialog.jsonl"), &rad_points)?;
    write_jsonl(&dir.join("sentence_eval_radialog.jsonl"), &rad_eval)?;
    write_jsonl(&dir.join("category_eval_medversa.jsonl"), &cat_med)?;
    write_jsonl(&dir.join("category_eval_radialog.jsonl"), &cat_rad)?;
    write_clinician_csv(&dir.join("agreement_labels.csv"), &agreement)?;
    write_json_pretty(&dir.join("entropy_baseline.json"), &entropy)?;
    write_json_pretty(&dir.join("category_sentences.json"), &labeled)?;

    let mut config = PipelineConfig::with_dataset("medversa_corpus.jsonl");
    config.cache_dir = PathBuf::from("cache");
    config.seed = FIXTURE_SEED;
    config.calibration_count = CALIBRATION_STUDIES;
    config.offline = true;
    config.judge.backend = JudgeBackendKind::Reference;
    config.save(&dir.join("medversa.toml"))?;

    // Round-trip sanity on the two files other tools consume most.
    let reloaded =
        crate::corpus::load_dataset(&dir.join("medversa_corpus.jsonl"), SAMPLES_PER_STUDY)?;
    assert_eq!(reloaded, corpus, "corpus does not round-trip through JSONL");
    let reloaded_config = PipelineConfig::load(&dir.join("medversa.toml"))?;
    assert_eq!(
        reloaded_config.dataset_path,
        dir.join("medversa_corpus.jsonl"),
        "config dataset path does not resolve to the written corpus"
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// Readers for the generated files.

pub fn read_calibration_points(path: &Path) -> Result<Vec<CalibrationPoint>> {
    read_jsonl(path)
}

pub fn read_eval_rows(path: &Path) -> Result<Vec<EvalRow>> {
    read_jsonl(path)
}

pub fn read_entropy_records(path: &Path) -> Result<Vec<EntropyRecord>> {
    read_json(path)
}

pub fn read_category_sentences(path: &Path) -> Result<Vec<LabeledSentence>> {
    read_json(path)
}

// ---------------------------------------------------------------------------
// Corpus construction.

/// Which sentences a study's candidate asserts: one target support score and
/// one factuality bit each. Scores and labels then emerge from generated
/// text through the rule-based judge rather than being written into files.
#[derive(Debug, Clone, Copy)]
struct SentenceSpec {
    score: u32,
    factual: bool,
}

/// Sentence-mix plan for one test-half report.
#[derive(Debug, Clone, Copy)]
struct ReportPlan {
    flagged_halluc: usize,
    flagged_factual: usize,
    accepted_halluc: usize,
    accepted_factual: usize,
}

impl ReportPlan {
    const fn new(fh: usize, ff: usize, ah: usize, af: usize) -> Self {
        ReportPlan {
            flagged_halluc: fh,
            flagged_factual: ff,
            accepted_halluc: ah,
            accepted_factual: af,
        }
    }
}

/// Builds the full 508-study corpus. Which ids land in the calibration half
/// is decided by the same split the pipeline will run, so the designed
/// distributions land on the right side regardless of id order.
pub fn medversa_corpus() -> Result<Vec<Study>> {
    let ids: Vec<String> = (1..=508).map(|i| format!("mv-{i:04}")).collect();
    let placeholders: Vec<Study> = ids.iter().map(|id| placeholder_study(id)).collect();
    let (cal, test) = split_dataset(placeholders, CALIBRATION_STUDIES, FIXTURE_SEED)?;

    let mut rng = ChaCha8Rng::seed_from_u64(FIXTURE_SEED ^ 0x5EED_F1C7_0000_0002);
    let cal_specs = calibration_specs(&mut rng);
    let test_specs = test_half_specs(&mut rng);

    let mut studies = Vec::with_capacity(ids.len());
    for (study, specs) in cal.iter().zip(&cal_specs) {
        studies.push(build_study(&study.study_id, specs));
    }
    for (study, specs) in test.iter().zip(&test_specs) {
        studies.push(build_study(&study.study_id, specs));
    }
    studies.sort_by(|a, b| a.study_id.cmp(&b.study_id));
    Ok(studies)
}

fn placeholder_study(study_id: &str) -> Study {
    Study {
        study_id: study_id.to_string(),
        candidate: Report {
            study_id: study_id.to_string(),
            text: String::new(),
            temperature: 0.1,
            kind: ReportKind::Candidate,
            token_logprobs: None,
            token_distributions: None,
        },
        samples: Vec::new(),
        ground_truth: None,
        external_metrics: BTreeMap::new(),
    }
}

/// Deals the calibration score/label pool into 300 reports: the first 100
/// get 6 sentences, the rest 7, and each report takes its designed number
/// of low-score sentences.
fn calibration_specs(rng: &mut ChaCha8Rng) -> Vec<Vec<SentenceSpec>> {
    let mut low = Vec::new();
    let mut high = Vec::new();
    for score in 0..=10u32 {
        let pool = if score < DESIGN_LAMBDA1 {
            &mut low
        } else {
            &mut high
        };
        for _ in 0..MEDVERSA_ENTAILED[score as usize] {
            pool.push(SentenceSpec {
                score,
                factual: true,
            });
        }
        for _ in 0..MEDVERSA_UNENTAILED[score as usize] {
            pool.push(SentenceSpec {
                score,
                factual: false,
            });
        }
    }
    shuffle(&mut low, rng);
    shuffle(&mut high, rng);

    let mut flags: Vec<usize> = CALIBRATION_FLAGS
        .iter()
        .flat_map(|&(h, count)| std::iter::repeat_n(h, count))
        .collect();
    shuffle(&mut flags, rng);

    let mut low = low.into_iter();
    let mut high = high.into_iter();
    let specs: Vec<Vec<SentenceSpec>> = flags
        .iter()
        .enumerate()
        .map(|(i, &h)| {
            let size = if i < 100 { 6 } else { 7 };
            let mut sentences: Vec<SentenceSpec> = (&mut low).take(h).collect();
            sentences.extend((&mut high).take(size - h));
            assert_eq!(sentences.len(), size, "calibration pool exhausted early");
            shuffle(&mut sentences, rng);
            sentences
        })
        .collect();
    assert!(
        low.next().is_none() && high.next().is_none(),
        "calibration pool not fully dealt"
    );
    specs
}

/// The 208 test-half sentence mixes. Totals: 147 flagged hallucinated, 54
/// flagged factual, 375 accepted hallucinated, 852 accepted factual over
/// 1428 sentences; per-report flag counts give 57/24/11 flagged reports at
/// λ₂ = 2/3/4.
fn test_half_plans() -> Vec<ReportPlan> {
    let mut plans = Vec::with_capacity(208);

    // Heaviest reports: (flag count, true hallucinations) pairs; the first
    // four also flag one factual sentence.
    let heavy: [(usize, usize); 11] = [
        (4, 6),
        (4, 6),
        (4, 7),
        (4, 7),
        (4, 7),
        (4, 8),
        (5, 8),
        (5, 9),
        (5, 9),
        (6, 9),
        (7, 10),
    ];
    for (i, &(h, t)) in heavy.iter().enumerate() {
        let fh = if i < 4 { h - 1 } else { h };
        plans.push(ReportPlan::new(fh, h - fh, t - fh, 1));
    }

    // Flag count 3.
    for _ in 0..6 {
        plans.push(ReportPlan::new(2, 1, 1, 2)); // t = 3
    }
    for _ in 0..2 {
        plans.push(ReportPlan::new(3, 0, 0, 2)); // t = 3
    }
    for _ in 0..5 {
        plans.push(ReportPlan::new(3, 0, 1, 2)); // t = 4
    }

    // Flag count 2.
    plans.push(ReportPlan::new(2, 0, 5, 3)); // t = 7
    for _ in 0..9 {
        plans.push(ReportPlan::new(2, 0, 2, 3)); // t = 4
    }
    for _ in 0..9 {
        plans.push(ReportPlan::new(2, 0, 1, 3)); // t = 3
    }
    for _ in 0..11 {
        plans.push(ReportPlan::new(1, 1, 2, 3)); // t = 3
    }
    for _ in 0..3 {
        plans.push(ReportPlan::new(1, 1, 1, 3)); // t = 2
    }

    // Flag count 1 or 0; accepted-factual counts filled in below.
    let light_start = plans.len();
    for _ in 0..14 {
        plans.push(ReportPlan::new(1, 0, 1, 0)); // t = 2
    }
    for _ in 0..6 {
        plans.push(ReportPlan::new(0, 1, 0, 0)); // t = 0, the flagged sentence is factual
    }
    for _ in 0..24 {
        plans.push(ReportPlan::new(0, 1, 1, 0)); // t = 1
    }
    for (t, count) in [(0, 14), (1, 17), (2, 34), (3, 26), (4, 12), (5, 4)] {
        for _ in 0..count {
            plans.push(ReportPlan::new(0, 0, t, 0));
        }
    }
    let light = plans.len() - light_start;
    assert_eq!(light, 151, "light-report group miscounted");
    for i in 0..light {
        plans[light_start + i].accepted_factual = if i < 112 { 5 } else { 4 };
    }

    assert_eq!(plans.len(), 208);
    let fh: usize = plans.iter().map(|p| p.flagged_halluc).sum();
    let ff: usize = plans.iter().map(|p| p.flagged_factual).sum();
    let ah: usize = plans.iter().map(|p| p.accepted_halluc).sum();
    let af: usize = plans.iter().map(|p| p.accepted_factual).sum();
    assert_eq!(
        (fh, ff, ah, af),
        (147, 54, 375, 852),
        "test-half totals drifted"
    );
    assert_eq!(fh + ff + ah + af, 1428);
    plans
}

fn test_half_specs(rng: &mut ChaCha8Rng) -> Vec<Vec<SentenceSpec>> {
    let plans = test_half_plans();
    let mut low_cycle = 0usize;
    let mut high_cycle = 0usize;
    let mut low_score = |factual: bool| {
        let score = LOW_SCORES[low_cycle % LOW_SCORES.len()];
        low_cycle += 1;
        SentenceSpec { score, factual }
    };
    let mut high_score = |factual: bool| {
        let score = HIGH_SCORES[high_cycle % HIGH_SCORES.len()];
        high_cycle += 1;
        SentenceSpec { score, factual }
    };

    let mut specs: Vec<Vec<SentenceSpec>> = plans
        .iter()
        .map(|plan| {
            let mut sentences = Vec::new();
            for _ in 0..plan.flagged_halluc {
                sentences.push(low_score(false));
            }
            for _ in 0..plan.flagged_factual {
                sentences.push(low_score(true));
            }
            for _ in 0..plan.accepted_halluc {
                sentences.push(high_score(false));
            }
            for _ in 0..plan.accepted_factual {
                sentences.push(high_score(true));
            }
            sentences
        })
        .collect();
    shuffle(&mut specs, rng);
    for sentences in &mut specs {
        shuffle(sentences, rng);
    }
    specs
}

/// Renders one study from its sentence specs. Every candidate sentence
/// asserts a distinct finding; exactly `score` of the ten samples restate
/// it, and the ground truth restates it iff the sentence is factual.
fn build_study(study_id: &str, specs: &[SentenceSpec]) -> Study {
    let ordinal = study_ordinal(study_id);
    let terms: Vec<&str> = (0..specs.len())
        .map(|i| FINDINGS[(ordinal * 3 + i * 7) % FINDINGS.len()])
        .collect();

    let candidate_text = specs
        .iter()
        .enumerate()
        .map(|(i, _)| finding_sentence(terms[i], (ordinal + i) % 3))
        .collect::<Vec<_>>()
        .join(" ");

    let samples: Vec<Report> = (0..SAMPLES_PER_STUDY)
        .map(|j| {
            let mut parts: Vec<String> = specs
                .iter()
                .enumerate()
                .filter(|(i, spec)| sample_supports(*i, spec.score, j))
                .map(|(i, _)| finding_sentence(terms[i], j % 3))
                .collect();
            parts.push(FILLER.to_string());
            Report {
                study_id: study_id.to_string(),
                text: parts.join(" "),
                temperature: 1.0,
                kind: ReportKind::Sample,
                token_logprobs: None,
                token_distributions: None,
            }
        })
        .collect();

    let mut gt_parts: Vec<String> = specs
        .iter()
        .enumerate()
        .filter(|(_, spec)| spec.factual)
        .map(|(i, _)| finding_sentence(terms[i], (i + 1) % 3))
        .collect();
    gt_parts.push(FILLER.to_string());

    let t = specs.iter().filter(|s| !s.factual).count();
    let mut external_metrics = BTreeMap::new();
    external_metrics.insert(
        "radcliq".to_string(),
        1.1 + 0.4 * t as f64 + 0.013 * ((ordinal * 7) % 11) as f64,
    );
    external_metrics.insert(
        "radgraph_f1".to_string(),
        (0.82 - 0.07 * t as f64 - 0.007 * ((ordinal * 3) % 9) as f64).max(0.05),
    );

    Study {
        study_id: study_id.to_string(),
        candidate: Report {
            study_id: study_id.to_string(),
            text: candidate_text,
            temperature: 0.1,
            kind: ReportKind::Candidate,
            token_logprobs: None,
            token_distributions: None,
        },
        samples,
        ground_truth: Some(Report {
            study_id: study_id.to_string(),
            text: gt_parts.join(" "),
            temperature: 0.0,
            kind: ReportKind::GroundTruth,
            token_logprobs: None,
            token_distributions: None,
        }),
        external_metrics,
    }
}

/// Sample `sample_idx` restates sentence `sentence_idx` iff the sample falls
/// in the sentence's rotated support window of width `score`. Rotation by
/// 3·index spreads supporting samples so no sample dominates.
fn sample_supports(sentence_idx: usize, score: u32, sample_idx: usize) -> bool {
    let start = (sentence_idx * 3) % SAMPLES_PER_STUDY;
    let offset = (sample_idx + SAMPLES_PER_STUDY - start) % SAMPLES_PER_STUDY;
    (offset as u32) < score
}

fn finding_sentence(term: &str, variant: usize) -> String {
    match variant % 3 {
        0 => format!("There is {term}."),
        1 => format!("{} is seen.", capitalize(term)),
        _ => format!("{} is noted.", capitalize(term)),
    }
}

fn capitalize(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().collect::<String>() + chars.as_str(),
        None => String::new(),
    }
}

fn study_ordinal(study_id: &str) -> usize {
    study_id
        .chars()
        .filter(char::is_ascii_digit)
        .collect::<String>()
        .parse()
        .unwrap_or(0)
}

// ---------------------------------------------------------------------------
// Synthesized flat fixtures.

fn histogram_points(
    entailed: &[usize; 11],
    unentailed: &[usize; 11],
    rng: &mut ChaCha8Rng,
) -> Vec<CalibrationPoint> {
    let mut points = Vec::new();
    for score in 0..=10u32 {
        for _ in 0..entailed[score as usize] {
            points.push(CalibrationPoint {
                score,
                entailed: true,
            });
        }
        for _ in 0..unentailed[score as usize] {
            points.push(CalibrationPoint {
                score,
                entailed: false,
            });
        }
    }
    shuffle(&mut points, rng);
    points
}

fn with_categories(table: &[(Category, [u64; 4]); 6]) -> Vec<(Option<Category>, [u64; 4])> {
    table.iter().map(|&(c, counts)| (Some(c), counts)).collect()
}

/// Expands (category, confusion counts) groups into shuffled per-sentence
/// rows, packed seven sentences per synthetic study id.
fn synth_rows(
    prefix: &str,
    groups: &[(Option<Category>, [u64; 4])],
    rng: &mut ChaCha8Rng,
) -> Vec<EvalRow> {
    let mut cells = Vec::new();
    for &(category, [fh, ff, af, ah]) in groups {
        for _ in 0..fh {
            cells.push((true, false, category));
        }
        for _ in 0..ff {
            cells.push((true, true, category));
        }
        for _ in 0..af {
            cells.push((false, true, category));
        }
        for _ in 0..ah {
            cells.push((false, false, category));
        }
    }
    shuffle(&mut cells, rng);

    let mut low_cycle = 0usize;
    let mut high_cycle = 0usize;
    cells
        .into_iter()
        .enumerate()
        .map(|(i, (flagged, entailed, category))| {
            let score = if flagged {
                low_cycle += 1;
                LOW_SCORES[(low_cycle - 1) % LOW_SCORES.len()]
            } else {
                high_cycle += 1;
                HIGH_SCORES[(high_cycle - 1) % HIGH_SCORES.len()]
            };
            EvalRow {
                study_id: format!("{prefix}-{:04}", i / 7 + 1),
                index: i % 7,
                score,
                flagged,
                entailed,
                category,
            }
        })
        .collect()
}

fn agreement_rows(rng: &mut ChaCha8Rng) -> Vec<ClinicianRow> {
    let mut pairs = Vec::new();
    let cells = [(1u8, 1u8), (1, 0), (0, 1), (0, 0)];
    for (cell, &(judge, reference)) in cells.iter().enumerate() {
        for _ in 0..AGREEMENT_CELLS[cell] {
            pairs.push((judge, reference));
        }
    }
    shuffle(&mut pairs, rng);
    pairs
        .into_iter()
        .enumerate()
        .map(|(i, (judge_label, reference_label))| ClinicianRow {
            sentence_ref: format!("ag-{:04}#0", i + 1),
            judge_label,
            reference_label,
        })
        .collect()
}

/// Builds the 197 token-probability records. Scores are rank-monotone:
/// negative log-probability decreases strictly with neg-logprob rank via a
/// single realized probability per token, and entropy decreases strictly
/// with entropy rank via a two-symbol distribution that sharpens as rank
/// grows. Only the orderings matter downstream, so the constructions are
/// free to be minimal.
fn entropy_records() -> Vec<EntropyRecord> {
    let mut next_entropy_rank = BAND_STARTS;
    let mut next_neg_rank = BAND_STARTS;
    let mut records = Vec::with_capacity(197);
    for &(e_band, n_band, cells) in &ENTROPY_CELLS {
        for &(t, count) in cells {
            for _ in 0..count {
                let e_rank = next_entropy_rank[e_band - 1];
                next_entropy_rank[e_band - 1] += 1;
                let n_rank = next_neg_rank[n_band - 1];
                next_neg_rank[n_band - 1] += 1;

                // Realized token probability grows with rank, so -ln p falls.
                let p = 0.05 + 0.004 * (n_rank - 1) as f64;
                // Two-symbol distribution sharpens with rank, so H falls.
                let q = 0.5 + 0.0024 * (e_rank - 1) as f64;
                records.push(EntropyRecord {
                    study_id: format!("ent-{:03}", records.len() + 1),
                    true_hallucinations: t,
                    token_logprobs: vec![vec![p; 3]],
                    token_distributions: vec![vec![vec![q, 1.0 - q]; 2]],
                });
            }
        }
    }
    assert_eq!(records.len(), 197);
    assert_eq!(
        next_entropy_rank,
        [11, 24, 55, 198],
        "entropy bands misfilled"
    );
    assert_eq!(
        next_neg_rank,
        [11, 24, 55, 198],
        "neg-logprob bands misfilled"
    );
    records
}

fn labeled_sentences() -> Vec<LabeledSentence> {
    const SENTENCES: [(&str, Category); 30] = [
        ("Right PICC tip in the lower SVC.", Category::Devices),
        (
            "A chest tube is in place with a small apical pneumothorax.",
            Category::Devices,
        ),
        ("Median sternotomy wires are intact.", Category::Devices),
        (
            "Endotracheal tube terminates above the carina.",
            Category::Devices,
        ),
        (
            "Pacemaker unchanged with mild cardiomegaly.",
            Category::Devices,
        ),
        ("The heart is mildly enlarged.", Category::Cardiomediastinal),
        (
            "Moderate cardiomegaly with pulmonary vascular congestion.",
            Category::Cardiomediastinal,
        ),
        (
            "Mediastinal contours are stable.",
            Category::Cardiomediastinal,
        ),
        (
            "Hilar lymphadenopathy is suspected.",
            Category::Cardiomediastinal,
        ),
        (
            "Small hiatal hernia is again demonstrated.",
            Category::Cardiomediastinal,
        ),
        ("Patchy bibasilar atelectasis.", Category::Lungs),
        ("There is a right upper lobe opacity.", Category::Lungs),
        ("Diffuse interstitial edema has worsened.", Category::Lungs),
        ("Lung volumes are low.", Category::Lungs),
        ("Scarring in the right apex.", Category::Lungs),
        (
            "Acute displaced fracture of the left clavicle.",
            Category::Musculoskeletal,
        ),
        (
            "Moderate degenerative changes of the spine.",
            Category::Musculoskeletal,
        ),
        ("Diffuse osteopenia is present.", Category::Musculoskeletal),
        (
            "Old healed rib fractures on the right.",
            Category::Musculoskeletal,
        ),
        ("Mild thoracolumbar scoliosis.", Category::Musculoskeletal),
        ("Small left pleural effusion.", Category::Pleural),
        ("No pneumothorax.", Category::Pleural),
        (
            "Blunting of the right costophrenic angle.",
            Category::Pleural,
        ),
        ("Apical pleural thickening is unchanged.", Category::Pleural),
        ("Trace right effusion persists.", Category::Pleural),
        ("The patient is mildly rotated.", Category::Other),
        ("No acute findings.", Category::Other),
        ("Limited study due to motion.", Category::Other),
        (
            "Overlying trauma board partially obscures detail.",
            Category::Other,
        ),
        ("Dense retrocardiac density is unchanged.", Category::Other),
    ];
    SENTENCES
        .iter()
        .map(|&(text, category)| LabeledSentence {
            text: text.to_string(),
            category,
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Self-check: replay the library over the generated data.

#[allow(clippy::too_many_arguments)]
fn self_check(
    corpus: &[Study],
    med_points: &[CalibrationPoint],
    rad_points: &[CalibrationPoint],
    rad_eval: &[EvalRow],
    cat_med: &[EvalRow],
    cat_rad: &[EvalRow],
    agreement: &[ClinicianRow],
    entropy: &[EntropyRecord],
    labeled: &[LabeledSentence],
) -> Result<()> {
    // Point sets select the designed thresholds.
    assert_eq!(calibrate_lambda1(med_points, 0.05, 10)?.lambda1, 6);
    assert_eq!(calibrate_lambda1(med_points, 0.02, 10)?.lambda1, 4);
    assert_eq!(calibrate_lambda1(rad_points, 0.05, 10)?.lambda1, 4);
    assert_eq!(calibrate_lambda1(rad_points, 0.02, 10)?.lambda1, 2);

    // The corpus reproduces the point multiset through the judge.
    let (cal, test) = split_dataset(corpus.to_vec(), CALIBRATION_STUDIES, FIXTURE_SEED)?;
    let judge = entailment::reference_backend();
    let (cal_scores, cal_labels) = judge_studies(&cal, &judge)?;
    let mut derived: Vec<(u32, bool)> = cal_scores
        .iter()
        .zip(&cal_labels)
        .map(|(s, l)| {
            assert_eq!(
                (s.study_id.as_str(), s.index),
                (l.study_id.as_str(), l.index)
            );
            (s.value, l.entailed)
        })
        .collect();
    derived.sort_unstable();
    let mut designed: Vec<(u32, bool)> = med_points.iter().map(|p| (p.score, p.entailed)).collect();
    designed.sort_unstable();
    assert_eq!(
        derived, designed,
        "judged calibration half drifted from the designed points"
    );

    // Calibration-half flag counts sweep to 4/3/2.
    let cal_decisions: Vec<SentenceDecision> = cal_scores
        .iter()
        .map(|s| flag_sentence(s, DESIGN_LAMBDA1))
        .collect();
    let counts: Vec<u32> = flag_counts(&cal_decisions)
        .values()
        .map(|&h| h as u32)
        .collect();
    assert_eq!(counts.len(), CALIBRATION_STUDIES);
    let swept = sweep_lambda2(&counts, &[0.05, 0.10, 0.25])?;
    let expected: BTreeMap<String, u32> = [("0.05", 4u32), ("0.1", 3), ("0.25", 2)]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
    assert_eq!(swept, expected, "report-threshold sweep drifted");

    // Test-half confusion counts and summary table.
    let (test_scores, test_labels) = judge_studies(&test, &judge)?;
    let test_decisions: Vec<SentenceDecision> = test_scores
        .iter()
        .map(|s| flag_sentence(s, DESIGN_LAMBDA1))
        .collect();
    let cm = confusion(&test_decisions, &test_labels)?;
    assert_eq!(
        (
            cm.flag_halluc,
            cm.flag_factual,
            cm.accept_factual,
            cm.accept_halluc
        ),
        (147, 54, 852, 375),
        "test-half confusion counts drifted"
    );

    let rows = summary_table(&test, &test_decisions, &test_labels, &[2, 3, 4])?;
    let expected_rows: [(SplitLabel, Option<u32>, usize, f64); 7] = [
        (SplitLabel::Original, None, 208, 522.0 / 208.0),
        (SplitLabel::Accepted, Some(2), 151, 283.0 / 151.0),
        (SplitLabel::Flagged, Some(2), 57, 239.0 / 57.0),
        (SplitLabel::Accepted, Some(3), 184, 392.0 / 184.0),
        (SplitLabel::Flagged, Some(3), 24, 130.0 / 24.0),
        (SplitLabel::Accepted, Some(4), 197, 436.0 / 197.0),
        (SplitLabel::Flagged, Some(4), 11, 86.0 / 11.0),
    ];
    assert_eq!(rows.len(), expected_rows.len());
    for (row, (label, lambda2, n_reports, avg)) in rows.iter().zip(expected_rows) {
        assert_eq!(
            (row.split_label, row.lambda2, row.n_reports),
            (label, lambda2, n_reports)
        );
        assert!(
            (row.avg_true_hallucinations - avg).abs() < 1e-12,
            "summary mean drifted for {label:?} λ₂={lambda2:?}: {} vs {avg}",
            row.avg_true_hallucinations
        );
    }

    // Flat sentence eval.
    let decisions: Vec<SentenceDecision> = rad_eval.iter().map(EvalRow::decision).collect();
    let labels: Vec<CalibrationLabel> = rad_eval.iter().map(EvalRow::label).collect();
    let cm = confusion(&decisions, &labels)?;
    assert_eq!(
        [
            cm.flag_halluc,
            cm.flag_factual,
            cm.accept_factual,
            cm.accept_halluc
        ],
        RADIALOG_SENTENCE_EVAL
    );

    // Category tables.
    for (rows, table) in [
        (cat_med, &MEDVERSA_CATEGORY_TABLE),
        (cat_rad, &RADIALOG_CATEGORY_TABLE),
    ] {
        let decisions: Vec<SentenceDecision> = rows.iter().map(EvalRow::decision).collect();
        let labels: Vec<CalibrationLabel> = rows.iter().map(EvalRow::label).collect();
        let assignments: Vec<CategoryAssignment> =
            rows.iter().filter_map(EvalRow::assignment).collect();
        assert_eq!(
            assignments.len(),
            rows.len(),
            "category eval row without category"
        );
        let breakdown = category_breakdown(&decisions, &labels, &assignments)?;
        for &(category, [fh, ff, af, ah]) in table.iter() {
            let cell = &breakdown[&category];
            assert_eq!(
                (
                    cell.flag_halluc,
                    cell.flag_factual,
                    cell.accept_factual,
                    cell.accept_halluc
                ),
                (fh, ff, af, ah),
                "category table drifted for {category}"
            );
        }
    }

    // Agreement.
    let (accuracy, table) = agreement_from_rows(agreement)?;
    assert_eq!(
        [
            table.both_entailed,
            table.judge_only,
            table.reference_only,
            table.neither
        ],
        AGREEMENT_CELLS
    );
    assert!((accuracy - 458.0 / 547.0).abs() < 1e-12);

    // Entropy baselines: strict rankings and exact flagged-group sums.
    let mut by_entropy = Vec::new();
    let mut by_neg = Vec::new();
    let mut t_by_id: BTreeMap<String, usize> = BTreeMap::new();
    for record in entropy {
        let scores = entropy_baselines(&record.as_report())?;
        by_entropy.push((
            record.study_id.clone(),
            scores
                .avg_entropy
                .expect("fixture records carry distributions"),
        ));
        by_neg.push((record.study_id.clone(), scores.avg_neg_logprob));
        t_by_id.insert(record.study_id.clone(), record.true_hallucinations);
    }
    let total_t: usize = t_by_id.values().sum();
    assert_eq!(total_t, 526);
    for (scores, flagged_sums) in [(&by_entropy, [35, 76, 173]), (&by_neg, [21, 76, 174])] {
        let mut sorted: Vec<f64> = scores.iter().map(|(_, v)| *v).collect();
        sorted.sort_by(|a, b| b.total_cmp(a));
        assert!(
            sorted.windows(2).all(|w| w[0] > w[1]),
            "baseline scores must be strictly distinct for unambiguous ranking"
        );
        for (k, expected_sum) in [10usize, 23, 54].into_iter().zip(flagged_sums) {
            let (flagged, accepted) = entropy_split(scores, k)?;
            let sum = |ids: &[String]| ids.iter().map(|id| t_by_id[id]).sum::<usize>();
            assert_eq!(
                sum(&flagged),
                expected_sum,
                "flagged-group sum drifted at k={k}"
            );
            assert_eq!(sum(&accepted), total_t - expected_sum);
        }
    }

    // Category sentences classify exactly as labeled.
    for sentence in labeled {
        assert_eq!(
            categorize(&sentence.text),
            sentence.category,
            "category fixture sentence misclassified: {}",
            sentence.text
        );
    }
    Ok(())
}

/// Scores and labels every candidate sentence of every study, sequentially.
fn judge_studies(
    studies: &[Study],
    judge: &dyn JudgeBackend,
) -> Result<(Vec<EntailmentScore>, Vec<CalibrationLabel>)> {
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for study in studies {
        let ground_truth =
            study
                .ground_truth
                .as_ref()
                .ok_or_else(|| Error::MissingGroundTruth {
                    study_id: study.study_id.clone(),
                })?;
        for sentence in tokenize(&study.candidate) {
            scores.push(entailment::score(&sentence, &study.samples, judge)?);
            labels.push(entailment::label_against_ground_truth(
                &sentence,
                ground_truth,
                judge,
            )?);
        }
    }
    Ok((scores, labels))
}

fn shuffle<T>(items: &mut [T], rng: &mut ChaCha8Rng) {
    for i in (1..items.len()).rev() {
        let j = (rng.next_u64() % (i as u64 + 1)) as usize;
        items.swap(i, j);
    }
}

fn unit_f64(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
