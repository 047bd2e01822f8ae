//! File-to-file pipeline stages behind the CLI subcommands.
//!
//! Each stage reads artifacts, computes, and writes artifacts; nothing is
//! carried in process state, so partial reruns are cheap — re-calibrate
//! without re-judging, re-flag without re-calibrating. Every output is
//! UTF-8 JSON/JSONL (plus one aligned text table), written atomically and
//! emitted in sorted study order, so identical inputs and caches produce
//! byte-identical files.
//!
//! The stages and their artifacts:
//!
//! * [`cmd_sample`]: manifest of image references → dataset JSONL with one
//!   candidate and n samples per study.
//! * [`cmd_entail`]: dataset → `scores.jsonl` (one support score per
//!   candidate sentence) and `labels.jsonl` (ground-truth entailment bits).
//! * [`cmd_calibrate`]: scores + labels on the calibration split →
//!   `thresholds.json`.
//! * [`cmd_flag`]: scores + thresholds → `flags.jsonl`, optionally plus
//!   rewritten reports with flagged sentences removed.
//! * [`cmd_evaluate`]: scores + labels + thresholds on the test split →
//!   `summary.json` and `summary.txt`.
//! * [`cmd_run_all`]: all of the above into one output directory, with the
//!   resolved config written alongside for provenance.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::calibration::{
    calibrate_lambda1_with, fraction_key, sweep_lambda2, CalibrationPoint, Thresholds,
};
use crate::config::{JudgeBackendKind, PipelineConfig};
use crate::corpus::{
    categorize, load_dataset, save_dataset, split_dataset, tokenize, Category, Report, ReportKind,
    Study,
};
use crate::entailment::{
    label_against_ground_truth, reference_backend, score, CalibrationLabel, JudgeBackend, LlmJudge,
};
use crate::error::{Error, Result};
use crate::evaluation::{
    agreement_from_rows, category_breakdown, confusion, entropy_baselines, entropy_split,
    read_clinician_csv, render_summary_text, split_size, summary_table, AgreementTable,
    CategoryAssignment, ConfusionCounts, SummaryRow,
};
use crate::flagging::{flag_report, ReportRule, SentenceDecision};
use crate::fsio::{atomic_write, read_json, read_jsonl, write_json_pretty, write_jsonl};
use crate::genclient::{
    generate_study, replay_only, GenerationCache, GenerationRequest, GenerationService,
    HttpGenerationService,
};

// ---------------------------------------------------------------------------
// Artifact row types.

/// One study to generate reports for: the input to [`cmd_sample`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestRow {
    pub study_id: String,
    /// Service-side image identifier, passed through verbatim.
    pub image_ref: String,
    /// Reference report text, when one exists for the study.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<String>,
    /// Precomputed per-report metrics to carry into the dataset.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub external_metrics: BTreeMap<String, f64>,
}

/// One `scores.jsonl` row: a judged candidate sentence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredSentence {
    pub study_id: String,
    pub index: usize,
    pub text: String,
    /// Samples that at least partially entail the sentence.
    pub score: u32,
    /// Samples that entered the denominator (empty generations drop out).
    pub effective_n: u32,
    pub category: Category,
}

/// One sentence inside a [`StudyFlags`] row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlaggedSentence {
    pub index: usize,
    pub text: String,
    pub score: u32,
    pub flagged: bool,
    pub category: Category,
}

/// One `flags.jsonl` row: every sentence decision for one study plus the
/// report-level verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyFlags {
    pub study_id: String,
    pub lambda1: u32,
    pub lambda2: u32,
    pub sentences: Vec<FlaggedSentence>,
    pub flag_count: u32,
    pub report_flagged: bool,
}

/// Headline confusion cells with the derived rates. Precision is null when
/// nothing was flagged rather than a made-up 0 or 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionBlock {
    #[serde(flatten)]
    pub counts: ConfusionCounts,
    pub precision: Option<f64>,
    pub recall: f64,
}

impl From<ConfusionCounts> for ConfusionBlock {
    fn from(counts: ConfusionCounts) -> Self {
        ConfusionBlock {
            precision: counts.precision(),
            recall: counts.recall(),
            counts,
        }
    }
}

/// Judge-vs-clinician agreement: accuracy plus the underlying 2×2 table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementBlock {
    pub accuracy: f64,
    pub table: AgreementTable,
}

/// Mean true hallucinations over a flagged/accepted report split; null when
/// the corresponding group is empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMeans {
    pub flagged: Option<f64>,
    pub accepted: Option<f64>,
}

/// Token-probability baseline evaluated at the report budget a lambda2
/// achieves: the top `k` reports by baseline score count as flagged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineGroup {
    pub lambda2: u32,
    /// Reports the baseline flags: the achieved flagged fraction at this
    /// lambda2, scaled to the baseline corpus size.
    pub k: usize,
    pub avg_neg_logprob: GroupMeans,
    /// Absent when any baseline record lacks a distribution slice.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub avg_entropy: Option<GroupMeans>,
}

/// Everything `summary.json` holds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub thresholds: Thresholds,
    /// Report thresholds the rows below were computed at, ascending.
    pub lambda2_values: Vec<u32>,
    pub rows: Vec<SummaryRow>,
    pub confusion: ConfusionBlock,
    pub category_breakdown: BTreeMap<Category, ConfusionCounts>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agreement: Option<AgreementBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baselines: Option<Vec<BaselineGroup>>,
}

/// One record of a token-probability baseline file: per-report ground truth
/// hallucination count plus the raw probability structure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineRecord {
    pub study_id: String,
    pub true_hallucinations: usize,
    pub token_logprobs: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_distributions: Option<Vec<Vec<Vec<f64>>>>,
}

impl BaselineRecord {
    fn as_report(&self) -> Report {
        Report {
            study_id: self.study_id.clone(),
            text: String::new(),
            temperature: 0.0,
            kind: ReportKind::Candidate,
            token_logprobs: Some(self.token_logprobs.clone()),
            token_distributions: self.token_distributions.clone(),
        }
    }
}

// ---------------------------------------------------------------------------
// sample

/// Reads a generation manifest: one JSON object per line, unique study ids,
/// returned sorted by study id.
pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRow>> {
    let mut rows: Vec<ManifestRow> = read_jsonl(path)?;
    rows.sort_by(|a, b| a.study_id.cmp(&b.study_id));
    for pair in rows.windows(2) {
        if pair[0].study_id == pair[1].study_id {
            return Err(Error::DuplicateStudy {
                study_id: pair[0].study_id.clone(),
            });
        }
    }
    Ok(rows)
}

/// Stable per-study generation seed so reruns and partial reruns request
/// identical generations regardless of manifest order.
fn study_seed(seed: u64, study_id: &str) -> u64 {
    let digest = Sha256::digest(study_id.as_bytes());
    seed ^ u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}

/// Generates the candidate and n samples for every manifest study and writes
/// the dataset to `out_path`. Offline mode answers purely from the
/// generation cache; online mode requires `generation.endpoint` and fills
/// the cache as it goes, so a rerun over a warm cache issues no calls.
pub fn cmd_sample(config: &PipelineConfig, out_path: &Path) -> Result<usize> {
    let manifest = read_manifest(&config.dataset_path)?;
    if manifest.is_empty() {
        return Err(Error::Artifact {
            path: config.dataset_path.clone(),
            message: "manifest holds no studies".into(),
        });
    }

    let cache_dir = config.generation_cache_dir();
    let service: Box<dyn GenerationService>;
    let cache: Option<GenerationCache>;
    if config.offline {
        service = Box::new(replay_only(&cache_dir)?);
        cache = None;
    } else {
        if config.generation.endpoint.trim().is_empty() {
            return Err(Error::Config(
                "generation.endpoint is not set; point it at a generation service \
                 or rerun with --offline against a warm cache"
                    .into(),
            ));
        }
        service = Box::new(HttpGenerationService::from_config(&config.generation)?);
        cache = Some(GenerationCache::open(&cache_dir)?);
    }

    let mut studies = Vec::with_capacity(manifest.len());
    for row in &manifest {
        let request = GenerationRequest {
            study_id: row.study_id.clone(),
            image_ref: row.image_ref.clone(),
            temperature: config.generation.low_temperature,
            seed: Some(study_seed(config.seed, &row.study_id)),
        };
        let mut study = generate_study(&request, &config.generation, &*service, cache.as_ref())?;
        if let Some(text) = &row.ground_truth {
            study.ground_truth = Some(Report {
                study_id: row.study_id.clone(),
                text: text.clone(),
                temperature: 0.0,
                kind: ReportKind::GroundTruth,
                token_logprobs: None,
                token_distributions: None,
            });
        }
        study.external_metrics = row.external_metrics.clone();
        studies.push(study);
        log::info!("sample: generated study {}", row.study_id);
    }

    save_dataset(out_path, &studies)?;
    Ok(studies.len())
}

// ---------------------------------------------------------------------------
// entail

fn judge_backend(config: &PipelineConfig) -> Result<Box<dyn JudgeBackend>> {
    Ok(match config.judge.backend {
        JudgeBackendKind::Reference => Box::new(reference_backend()),
        JudgeBackendKind::Llm => Box::new(LlmJudge::new(config.judge_config())?),
    })
}

fn judge_one(
    study: &Study,
    sentence: &crate::corpus::Sentence,
    backend: &dyn JudgeBackend,
) -> Result<(ScoredSentence, Option<CalibrationLabel>)> {
    let scored = score(sentence, &study.samples, backend)?;
    let label = match &study.ground_truth {
        Some(gt) if !gt.is_empty() => Some(label_against_ground_truth(sentence, gt, backend)?),
        _ => None,
    };
    Ok((
        ScoredSentence {
            study_id: scored.study_id,
            index: scored.index,
            text: sentence.text.clone(),
            score: scored.value,
            effective_n: scored.effective_n,
            category: categorize(&sentence.text),
        },
        label,
    ))
}

/// Scores every candidate sentence against its study's samples and labels it
/// against the ground truth when one exists. Writes `scores.jsonl` and
/// `labels.jsonl` sorted by (study, sentence); judge calls run on a bounded
/// worker pool of `judge.max_parallel` threads.
pub fn cmd_entail(
    config: &PipelineConfig,
    scores_path: &Path,
    labels_path: &Path,
) -> Result<(usize, usize)> {
    let studies = load_dataset(&config.dataset_path, config.n as usize)?;
    let backend = judge_backend(config)?;

    let mut items: Vec<(&Study, crate::corpus::Sentence)> = Vec::new();
    for study in &studies {
        for sentence in tokenize(&study.candidate) {
            items.push((study, sentence));
        }
    }

    type Judged = Result<(ScoredSentence, Option<CalibrationLabel>)>;
    let slots: Vec<OnceLock<Judged>> = (0..items.len()).map(|_| OnceLock::new()).collect();
    let cursor = AtomicUsize::new(0);
    let workers = config.judge.max_parallel.min(items.len()).max(1);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = cursor.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let (study, sentence) = &items[i];
                let outcome = judge_one(study, sentence, &*backend);
                slots[i].set(outcome).expect("each slot is filled once");
            });
        }
    });

    let mut scores = Vec::with_capacity(items.len());
    let mut labels = Vec::new();
    for slot in slots {
        let (scored, label) = slot.into_inner().expect("worker pool visited every slot")?;
        scores.push(scored);
        if let Some(label) = label {
            labels.push(label);
        }
    }

    write_jsonl(scores_path, &scores)?;
    write_jsonl(labels_path, &labels)?;
    log::info!(
        "entail: {} sentences scored, {} labeled, backend {}",
        scores.len(),
        labels.len(),
        backend.name()
    );
    Ok((scores.len(), labels.len()))
}

// ---------------------------------------------------------------------------
// calibrate

fn label_index(labels: &[CalibrationLabel]) -> Result<BTreeMap<(String, usize), bool>> {
    let mut by_ref = BTreeMap::new();
    for label in labels {
        if by_ref
            .insert((label.study_id.clone(), label.index), label.entailed)
            .is_some()
        {
            return Err(Error::Misaligned {
                message: format!("duplicate label for {}#{}", label.study_id, label.index),
            });
        }
    }
    Ok(by_ref)
}

/// Splits the dataset's study ids with the configured seed and returns the
/// two halves as sorted id sets.
fn split_ids(config: &PipelineConfig) -> Result<(BTreeSet<String>, BTreeSet<String>)> {
    let studies = load_dataset(&config.dataset_path, config.n as usize)?;
    let (cal, test) = split_dataset(studies, config.calibration_count, config.seed)?;
    Ok((
        cal.into_iter().map(|s| s.study_id).collect(),
        test.into_iter().map(|s| s.study_id).collect(),
    ))
}

/// Selects lambda1 under the risk budget on the calibration split, sweeps
/// lambda2 over the configured target fractions, and writes
/// `thresholds.json`.
pub fn cmd_calibrate(
    config: &PipelineConfig,
    scores_path: &Path,
    labels_path: &Path,
    out_path: &Path,
) -> Result<Thresholds> {
    let (cal_ids, _) = split_ids(config)?;
    let scores: Vec<ScoredSentence> = read_jsonl(scores_path)?;
    let labels: Vec<CalibrationLabel> = read_jsonl(labels_path)?;
    let by_ref = label_index(&labels)?;

    let mut points = Vec::new();
    let mut seen_ids: BTreeSet<&str> = BTreeSet::new();
    for s in scores.iter().filter(|s| cal_ids.contains(&s.study_id)) {
        let entailed = by_ref
            .get(&(s.study_id.clone(), s.index))
            .copied()
            .ok_or_else(|| Error::Misaligned {
                message: format!(
                    "calibration sentence {}#{} has a score but no label",
                    s.study_id, s.index
                ),
            })?;
        points.push(CalibrationPoint {
            score: s.score,
            entailed,
        });
        seen_ids.insert(&s.study_id);
    }
    if let Some(missing) = cal_ids.iter().find(|id| !seen_ids.contains(id.as_str())) {
        return Err(Error::Misaligned {
            message: format!("calibration study {missing} has no scored sentences"),
        });
    }

    let choice = calibrate_lambda1_with(&points, config.alpha, config.n, config.formula_variant)?;

    let mut flag_counts: BTreeMap<&str, u32> = cal_ids.iter().map(|id| (id.as_str(), 0)).collect();
    for s in scores.iter().filter(|s| cal_ids.contains(&s.study_id)) {
        if s.score < choice.lambda1 {
            *flag_counts
                .get_mut(s.study_id.as_str())
                .expect("seeded above") += 1;
        }
    }
    let counts: Vec<u32> = flag_counts.values().copied().collect();
    let by_fraction = sweep_lambda2(&counts, &config.lambda2_fractions)?;
    let headline = config
        .lambda2_fractions
        .first()
        .ok_or_else(|| Error::Config("lambda2_fractions must not be empty".into()))?;
    let lambda2 = by_fraction[&fraction_key(*headline)];

    let thresholds = Thresholds {
        lambda1: choice.lambda1,
        lambda2,
        lambda2_by_fraction: by_fraction,
        alpha: config.alpha,
        n: config.n,
        calibration_size: points.len(),
        empirical_risk_at_lambda1: choice.empirical_risk,
        formula_variant: config.formula_variant,
    };
    write_json_pretty(out_path, &thresholds)?;
    log::info!(
        "calibrate: lambda1 = {} (risk {:.4} over {} points), lambda2 = {}",
        thresholds.lambda1,
        thresholds.empirical_risk_at_lambda1,
        thresholds.calibration_size,
        thresholds.lambda2
    );
    Ok(thresholds)
}

// ---------------------------------------------------------------------------
// flag

fn decisions_of<'a>(
    rows: impl IntoIterator<Item = &'a ScoredSentence>,
    lambda1: u32,
) -> Vec<SentenceDecision> {
    rows.into_iter()
        .map(|r| SentenceDecision {
            study_id: r.study_id.clone(),
            index: r.index,
            score: r.score,
            flagged: r.score < lambda1,
        })
        .collect()
}

fn group_by_study(scores: &[ScoredSentence]) -> BTreeMap<&str, Vec<&ScoredSentence>> {
    let mut by_study: BTreeMap<&str, Vec<&ScoredSentence>> = BTreeMap::new();
    for s in scores {
        by_study.entry(s.study_id.as_str()).or_default().push(s);
    }
    for rows in by_study.values_mut() {
        rows.sort_by_key(|r| r.index);
    }
    by_study
}

/// Applies the calibrated thresholds to every scored study and writes
/// `flags.jsonl`. With `filtered_dir` set, also writes each candidate with
/// its flagged sentences removed as `<study_id>.txt`; removal needs the
/// original candidate text, which comes from the configured dataset.
pub fn cmd_flag(
    config: &PipelineConfig,
    scores_path: &Path,
    thresholds_path: &Path,
    out_path: &Path,
    lambda2_override: Option<u32>,
    filtered_dir: Option<&Path>,
) -> Result<(usize, usize)> {
    let thresholds: Thresholds = read_json(thresholds_path)?;
    let lambda1 = thresholds.lambda1;
    let lambda2 = lambda2_override.unwrap_or(thresholds.lambda2);
    let scores: Vec<ScoredSentence> = read_jsonl(scores_path)?;
    let by_study = group_by_study(&scores);

    let candidates: Option<BTreeMap<String, Report>> = match filtered_dir {
        Some(_) => {
            let studies = load_dataset(&config.dataset_path, config.n as usize)?;
            Some(
                studies
                    .into_iter()
                    .map(|s| (s.study_id.clone(), s.candidate))
                    .collect(),
            )
        }
        None => None,
    };

    let mut out_rows = Vec::with_capacity(by_study.len());
    let mut flagged_reports = 0;
    for (study_id, rows) in &by_study {
        let decisions = decisions_of(rows.iter().copied(), lambda1);
        let report = flag_report(&decisions, lambda2, config.report_rule)?;
        if report.flagged {
            flagged_reports += 1;
        }
        out_rows.push(StudyFlags {
            study_id: (*study_id).to_string(),
            lambda1,
            lambda2,
            sentences: rows
                .iter()
                .map(|r| FlaggedSentence {
                    index: r.index,
                    text: r.text.clone(),
                    score: r.score,
                    flagged: r.score < lambda1,
                    category: r.category,
                })
                .collect(),
            flag_count: report.flag_count,
            report_flagged: report.flagged,
        });

        if let Some(dir) = filtered_dir {
            if study_id.contains(['/', '\\']) || *study_id == ".." {
                return Err(Error::Artifact {
                    path: dir.to_path_buf(),
                    message: format!("study id {study_id} is not a safe file name"),
                });
            }
            let candidate = candidates
                .as_ref()
                .expect("loaded when filtered_dir is set")
                .get(*study_id)
                .ok_or_else(|| Error::Misaligned {
                    message: format!("scored study {study_id} is not in the dataset"),
                })?;
            let rewritten = crate::flagging::remove_flagged(candidate, &decisions)?;
            let mut text = rewritten.text;
            text.push('\n');
            atomic_write(&dir.join(format!("{study_id}.txt")), text.as_bytes())?;
        }
    }

    write_jsonl(out_path, &out_rows)?;
    log::info!(
        "flag: {flagged_reports} of {} reports flagged at lambda1 = {lambda1}, lambda2 = {lambda2}",
        out_rows.len()
    );
    Ok((out_rows.len(), flagged_reports))
}

// ---------------------------------------------------------------------------
// evaluate

fn mean_halluc(ids: &[String], by_id: &BTreeMap<&str, usize>) -> Result<Option<f64>> {
    if ids.is_empty() {
        return Ok(None);
    }
    let mut sum = 0usize;
    for id in ids {
        sum += by_id.get(id.as_str()).ok_or_else(|| Error::Misaligned {
            message: format!("baseline split references unknown study {id}"),
        })?;
    }
    Ok(Some(sum as f64 / ids.len() as f64))
}

fn baseline_groups(
    records: &[BaselineRecord],
    lambda2_values: &[u32],
    flagged_fraction_at: &BTreeMap<u32, f64>,
) -> Result<Vec<BaselineGroup>> {
    let mut by_id: BTreeMap<&str, usize> = BTreeMap::new();
    for r in records {
        if by_id.insert(&r.study_id, r.true_hallucinations).is_some() {
            return Err(Error::DuplicateStudy {
                study_id: r.study_id.clone(),
            });
        }
    }

    let mut neg_scores = Vec::with_capacity(records.len());
    let mut ent_scores = Vec::with_capacity(records.len());
    let mut all_have_entropy = true;
    for r in records {
        let scores = entropy_baselines(&r.as_report())?;
        neg_scores.push((r.study_id.clone(), scores.avg_neg_logprob));
        match scores.avg_entropy {
            Some(h) => ent_scores.push((r.study_id.clone(), h)),
            None => all_have_entropy = false,
        }
    }

    let mut groups = Vec::with_capacity(lambda2_values.len());
    for &lambda2 in lambda2_values {
        let fraction = flagged_fraction_at[&lambda2];
        let k = split_size(records.len(), fraction);
        let (neg_flagged, neg_accepted) = entropy_split(&neg_scores, k)?;
        let avg_neg_logprob = GroupMeans {
            flagged: mean_halluc(&neg_flagged, &by_id)?,
            accepted: mean_halluc(&neg_accepted, &by_id)?,
        };
        let avg_entropy = if all_have_entropy {
            let (ent_flagged, ent_accepted) = entropy_split(&ent_scores, k)?;
            Some(GroupMeans {
                flagged: mean_halluc(&ent_flagged, &by_id)?,
                accepted: mean_halluc(&ent_accepted, &by_id)?,
            })
        } else {
            None
        };
        groups.push(BaselineGroup {
            lambda2,
            k,
            avg_neg_logprob,
            avg_entropy,
        });
    }
    Ok(groups)
}

/// Evaluates the calibrated thresholds on the test split: the summary table
/// (original vs accepted vs flagged reports per lambda2), sentence-level
/// confusion with precision/recall, a per-category breakdown, and — when the
/// inputs exist — clinician agreement and token-probability baselines.
///
/// `lambda2_values` defaults to every swept lambda2 in ascending order.
/// `aux_dir` may hold `agreement_labels.csv` and `entropy_baseline.json`;
/// an explicit `clinician_csv` wins over the directory copy. Writes
/// `summary.json` and the aligned table `summary.txt`.
#[allow(clippy::too_many_arguments)]
pub fn cmd_evaluate(
    config: &PipelineConfig,
    scores_path: &Path,
    labels_path: &Path,
    thresholds_path: &Path,
    lambda2_values: Option<&[u32]>,
    aux_dir: Option<&Path>,
    clinician_csv: Option<&Path>,
    json_out: &Path,
    text_out: &Path,
) -> Result<Summary> {
    let studies = load_dataset(&config.dataset_path, config.n as usize)?;
    let (_, test) = split_dataset(studies, config.calibration_count, config.seed)?;
    let test_ids: BTreeSet<&str> = test.iter().map(|s| s.study_id.as_str()).collect();

    let thresholds: Thresholds = read_json(thresholds_path)?;
    let scores: Vec<ScoredSentence> = read_jsonl(scores_path)?;
    let all_labels: Vec<CalibrationLabel> = read_jsonl(labels_path)?;

    let test_scores: Vec<&ScoredSentence> = scores
        .iter()
        .filter(|s| test_ids.contains(s.study_id.as_str()))
        .collect();
    if test_scores.is_empty() {
        return Err(Error::Misaligned {
            message: "no scored sentences fall in the test split".into(),
        });
    }
    let decisions = decisions_of(test_scores.iter().copied(), thresholds.lambda1);
    let labels: Vec<CalibrationLabel> = all_labels
        .into_iter()
        .filter(|l| test_ids.contains(l.study_id.as_str()))
        .collect();
    let assignments: Vec<CategoryAssignment> = test_scores
        .iter()
        .map(|s| CategoryAssignment {
            study_id: s.study_id.clone(),
            index: s.index,
            category: s.category,
        })
        .collect();

    let lambda2_values: Vec<u32> = match lambda2_values {
        Some(values) => {
            let mut v = values.to_vec();
            v.sort_unstable();
            v.dedup();
            v
        }
        None => {
            let mut v: Vec<u32> = thresholds.lambda2_by_fraction.values().copied().collect();
            v.sort_unstable();
            v.dedup();
            v
        }
    };
    if lambda2_values.is_empty() {
        return Err(Error::Config("no lambda2 values to evaluate".into()));
    }

    let rows = summary_table(&test, &decisions, &labels, &lambda2_values)?;
    let confusion_counts = confusion(&decisions, &labels)?;
    let breakdown = category_breakdown(&decisions, &labels, &assignments)?;

    let csv_path = clinician_csv.map(Path::to_path_buf).or_else(|| {
        let candidate = aux_dir?.join("agreement_labels.csv");
        candidate.is_file().then_some(candidate)
    });
    let agreement = match csv_path {
        Some(path) => {
            let rows = read_clinician_csv(&path)?;
            let (accuracy, table) = agreement_from_rows(&rows)?;
            Some(AgreementBlock { accuracy, table })
        }
        None => None,
    };

    let baseline_path = aux_dir
        .map(|d| d.join("entropy_baseline.json"))
        .filter(|p| p.is_file());
    let baselines = match baseline_path {
        Some(path) => {
            let records: Vec<BaselineRecord> = read_json(&path)?;
            let per_study = flag_counts_per_study(&decisions);
            let mut fraction_at: BTreeMap<u32, f64> = BTreeMap::new();
            for &lambda2 in &lambda2_values {
                let flagged = per_study
                    .values()
                    .filter(|&&h| match config.report_rule {
                        ReportRule::AtLeast => h >= lambda2,
                        ReportRule::MoreThan => h > lambda2,
                    })
                    .count();
                fraction_at.insert(lambda2, flagged as f64 / test.len() as f64);
            }
            Some(baseline_groups(&records, &lambda2_values, &fraction_at)?)
        }
        None => None,
    };

    let summary = Summary {
        thresholds,
        lambda2_values,
        rows,
        confusion: confusion_counts.into(),
        category_breakdown: breakdown,
        agreement,
        baselines,
    };
    write_json_pretty(json_out, &summary)?;
    atomic_write(text_out, render_summary_text(&summary.rows).as_bytes())?;
    log::info!(
        "evaluate: {} test reports, {} sentences, lambda2 = {:?}",
        test.len(),
        decisions.len(),
        summary.lambda2_values
    );
    Ok(summary)
}

fn flag_counts_per_study(decisions: &[SentenceDecision]) -> BTreeMap<&str, u32> {
    let mut counts: BTreeMap<&str, u32> = BTreeMap::new();
    for d in decisions {
        let entry = counts.entry(d.study_id.as_str()).or_insert(0);
        if d.flagged {
            *entry += 1;
        }
    }
    counts
}

// ---------------------------------------------------------------------------
// run-all

/// Runs entail → calibrate → flag → evaluate over a complete dataset into
/// `out_dir`: `scores.jsonl`, `labels.jsonl`, `thresholds.json`,
/// `flags.jsonl`, `summary.json`, `summary.txt`, plus the resolved config as
/// `config.toml` for provenance. Given warm caches and a fixed seed the
/// outputs are byte-identical across runs.
pub fn cmd_run_all(
    config: &PipelineConfig,
    out_dir: &Path,
    aux_dir: Option<&Path>,
) -> Result<Summary> {
    std::fs::create_dir_all(out_dir)?;
    let scores = out_dir.join("scores.jsonl");
    let labels = out_dir.join("labels.jsonl");
    let thresholds = out_dir.join("thresholds.json");

    cmd_entail(config, &scores, &labels)?;
    cmd_calibrate(config, &scores, &labels, &thresholds)?;
    cmd_flag(
        config,
        &scores,
        &thresholds,
        &out_dir.join("flags.jsonl"),
        None,
        None,
    )?;
    let summary = cmd_evaluate(
        config,
        &scores,
        &labels,
        &thresholds,
        None,
        aux_dir,
        None,
        &out_dir.join("summary.json"),
        &out_dir.join("summary.txt"),
    )?;
    config.save(&out_dir.join("config.toml"))?;
    Ok(summary)
}
