//! Evaluation of flag decisions against reference entailment labels.
//!
//! Everything here is pure aggregation over immutable inputs. The quantities:
//!
//! * **Confusion counts** cross-tabulate the per-sentence flag decision against
//!   the reference label. A sentence with `entailed = 0` is a true
//!   hallucination, so the four cells are flag∧hallucination,
//!   flag∧factual, accept∧factual, accept∧hallucination. Precision is
//!   `FH / (FH + FF)` and recall is `FH / (FH + AH)`; precision is reported as
//!   absent (rather than 0 or 1) when nothing was flagged.
//! * **True hallucinations per report** counts a report's sentences with
//!   `entailed = 0`, the quantity the summary table averages.
//! * **Category breakdown** partitions the confusion counts by finding
//!   category; the per-category cells sum back to the global counts exactly.
//! * **Agreement** compares the automatic judge's reference labels against
//!   clinician labels for the same sentences: raw accuracy plus the 2×2 table.
//! * **Token-probability baselines**: for a sentence of J tokens with realized
//!   next-token probabilities p_j, the negative-log-probability score is
//!   −(1/J) Σ_j ln p_j; when a probability slice over alternative tokens is
//!   available at each position, the entropy score is the per-position
//!   H = −Σ_w p(w) ln p(w) averaged the same way. A report's score is the mean
//!   over its sentences, and reports are flagged by rank (top k), not by a
//!   calibrated threshold — these are the comparison baselines, not the method.
//! * **Summary rows** split the evaluated reports into accepted/flagged sets at
//!   each report threshold λ₂ and average true hallucinations and any ingested
//!   external per-report metrics over each set. External metrics are read from
//!   the dataset file, never computed here.
//!
//! All pairings between decision, label, and category records are keyed by
//! `(study_id, index)`, so every aggregate is invariant under record order.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{split_sentences, Category, Study};
use crate::entailment::CalibrationLabel;
use crate::error::{Error, Result};
use crate::flagging::SentenceDecision;

/// Cross-tabulation of flag decisions against reference entailment labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    /// Flagged and not entailed by the reference: the catch we want.
    pub flag_halluc: u64,
    /// Flagged but entailed: a false alarm.
    pub flag_factual: u64,
    /// Accepted and entailed: correctly left alone.
    pub accept_factual: u64,
    /// Accepted but not entailed: a miss.
    pub accept_halluc: u64,
}

impl ConfusionCounts {
    pub fn record(&mut self, flagged: bool, entailed: bool) {
        match (flagged, entailed) {
            (true, false) => self.flag_halluc += 1,
            (true, true) => self.flag_factual += 1,
            (false, true) => self.accept_factual += 1,
            (false, false) => self.accept_halluc += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.flag_halluc + self.flag_factual + self.accept_factual + self.accept_halluc
    }

    /// `FH / (FH + FF)`; `None` when nothing was flagged.
    pub fn precision(&self) -> Option<f64> {
        let flagged = self.flag_halluc + self.flag_factual;
        if flagged == 0 {
            None
        } else {
            Some(self.flag_halluc as f64 / flagged as f64)
        }
    }

    /// `FH / (FH + AH)`; 0 when the input holds no hallucinations at all.
    pub fn recall(&self) -> f64 {
        let halluc = self.flag_halluc + self.accept_halluc;
        if halluc == 0 {
            0.0
        } else {
            self.flag_halluc as f64 / halluc as f64
        }
    }

    pub fn add(&mut self, other: &ConfusionCounts) {
        self.flag_halluc += other.flag_halluc;
        self.flag_factual += other.flag_factual;
        self.accept_factual += other.accept_factual;
        self.accept_halluc += other.accept_halluc;
    }
}

/// Category assigned to one candidate sentence, keyed like decisions/labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryAssignment {
    pub study_id: String,
    pub index: usize,
    pub category: Category,
}

/// 2×2 agreement table between the automatic judge and clinician labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AgreementTable {
    /// Judge entailed, clinician entailed.
    pub both_entailed: u64,
    /// Judge entailed, clinician not.
    pub judge_only: u64,
    /// Clinician entailed, judge not.
    pub reference_only: u64,
    /// Neither entailed.
    pub neither: u64,
}

impl AgreementTable {
    pub fn total(&self) -> u64 {
        self.both_entailed + self.judge_only + self.reference_only + self.neither
    }

    pub fn matches(&self) -> u64 {
        self.both_entailed + self.neither
    }

    pub fn accuracy(&self) -> f64 {
        self.matches() as f64 / self.total() as f64
    }
}

/// One row of a clinician-label CSV: `sentence_ref,judge_label,reference_label`
/// with labels written as 0/1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClinicianRow {
    pub sentence_ref: String,
    pub judge_label: u8,
    pub reference_label: u8,
}

/// Token-probability baseline scores for one report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyScores {
    pub study_id: String,
    pub avg_neg_logprob: f64,
    /// Absent when the service exposed no per-position probability slices.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub avg_entropy: Option<f64>,
    /// Narrowest per-position slice the entropy was computed over. Serving
    /// APIs truncate the distribution, so the score is only as complete as
    /// this says.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distribution_slice: Option<usize>,
}

/// Which slice of the evaluated reports a summary row describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitLabel {
    Original,
    Accepted,
    Flagged,
}

impl SplitLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            SplitLabel::Original => "original",
            SplitLabel::Accepted => "accepted",
            SplitLabel::Flagged => "flagged",
        }
    }
}

/// One row of the final summary: a report set, its size, its mean true
/// hallucinations, and the mean of every ingested external metric over it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub split_label: SplitLabel,
    pub lambda2: Option<u32>,
    pub n_reports: usize,
    pub avg_true_hallucinations: f64,
    pub external_metric_means: BTreeMap<String, f64>,
}

/// Counts the candidate sentences of `study` that its reference labels mark
/// as not entailed. The labels must cover the candidate's sentence indices
/// exactly; extra studies in `labels` are ignored.
pub fn true_hallucinations(study: &Study, labels: &[CalibrationLabel]) -> Result<usize> {
    let gt_ok = study
        .ground_truth
        .as_ref()
        .map(|g| !g.is_empty())
        .unwrap_or(false);
    if !gt_ok {
        return Err(Error::MissingGroundTruth {
            study_id: study.study_id.clone(),
        });
    }
    let n_sentences = split_sentences(&study.candidate.text).len();
    let mut seen = vec![false; n_sentences];
    let mut count = 0usize;
    for label in labels.iter().filter(|l| l.study_id == study.study_id) {
        if label.index >= n_sentences || seen[label.index] {
            return Err(Error::Misaligned {
                message: format!(
                    "label for {}#{} does not match the candidate's {} sentences",
                    label.study_id, label.index, n_sentences
                ),
            });
        }
        seen[label.index] = true;
        if !label.entailed {
            count += 1;
        }
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::Misaligned {
            message: format!(
                "study {} has no label for sentence {missing}",
                study.study_id
            ),
        });
    }
    Ok(count)
}

fn label_map(labels: &[CalibrationLabel]) -> Result<BTreeMap<(&str, usize), bool>> {
    let mut map = BTreeMap::new();
    for label in labels {
        if map
            .insert((label.study_id.as_str(), label.index), label.entailed)
            .is_some()
        {
            return Err(Error::Misaligned {
                message: format!("duplicate label for {}#{}", label.study_id, label.index),
            });
        }
    }
    Ok(map)
}

/// Cross-tabulates flag decisions against reference labels. The two lists
/// must describe exactly the same sentence set (any order).
pub fn confusion(
    decisions: &[SentenceDecision],
    labels: &[CalibrationLabel],
) -> Result<ConfusionCounts> {
    if decisions.len() != labels.len() {
        return Err(Error::Misaligned {
            message: format!("{} decisions vs {} labels", decisions.len(), labels.len()),
        });
    }
    let mut by_ref = label_map(labels)?;
    let mut counts = ConfusionCounts::default();
    for d in decisions {
        match by_ref.remove(&(d.study_id.as_str(), d.index)) {
            Some(entailed) => counts.record(d.flagged, entailed),
            None => {
                return Err(Error::Misaligned {
                    message: format!("no label for decision {}#{}", d.study_id, d.index),
                })
            }
        }
    }
    Ok(counts)
}

/// Confusion counts partitioned by finding category. Every category appears
/// in the result (zeroed when untouched), and the cells sum back to
/// [`confusion`] of the same inputs.
pub fn category_breakdown(
    decisions: &[SentenceDecision],
    labels: &[CalibrationLabel],
    categories: &[CategoryAssignment],
) -> Result<BTreeMap<Category, ConfusionCounts>> {
    if decisions.len() != labels.len() || decisions.len() != categories.len() {
        return Err(Error::Misaligned {
            message: format!(
                "{} decisions vs {} labels vs {} categories",
                decisions.len(),
                labels.len(),
                categories.len()
            ),
        });
    }
    let mut by_ref = label_map(labels)?;
    let mut cat_by_ref = BTreeMap::new();
    for c in categories {
        if cat_by_ref
            .insert((c.study_id.as_str(), c.index), c.category)
            .is_some()
        {
            return Err(Error::Misaligned {
                message: format!("duplicate category for {}#{}", c.study_id, c.index),
            });
        }
    }
    let mut out: BTreeMap<Category, ConfusionCounts> = Category::ALL
        .iter()
        .map(|c| (*c, ConfusionCounts::default()))
        .collect();
    for d in decisions {
        let key = (d.study_id.as_str(), d.index);
        let entailed = by_ref.remove(&key).ok_or_else(|| Error::Misaligned {
            message: format!("no label for decision {}#{}", d.study_id, d.index),
        })?;
        let category = cat_by_ref.remove(&key).ok_or_else(|| Error::Misaligned {
            message: format!("no category for decision {}#{}", d.study_id, d.index),
        })?;
        out.get_mut(&category)
            .expect("all categories are pre-seeded")
            .record(d.flagged, entailed);
    }
    Ok(out)
}

/// Raw agreement between two aligned 0/1 label lists: accuracy plus the 2×2
/// table. Judge labels index the rows, reference labels the columns.
pub fn agreement(judge: &[bool], reference: &[bool]) -> Result<(f64, AgreementTable)> {
    if judge.len() != reference.len() {
        return Err(Error::Misaligned {
            message: format!(
                "{} judge labels vs {} reference labels",
                judge.len(),
                reference.len()
            ),
        });
    }
    if judge.is_empty() {
        return Err(Error::Misaligned {
            message: "agreement needs at least one label pair".into(),
        });
    }
    let mut table = AgreementTable::default();
    for (&j, &r) in judge.iter().zip(reference) {
        match (j, r) {
            (true, true) => table.both_entailed += 1,
            (true, false) => table.judge_only += 1,
            (false, true) => table.reference_only += 1,
            (false, false) => table.neither += 1,
        }
    }
    Ok((table.accuracy(), table))
}

/// Reads a clinician-label CSV (`sentence_ref,judge_label,reference_label`,
/// labels 0/1) and rejects anything else with the offending line number.
pub fn read_clinician_csv(path: &Path) -> Result<Vec<ClinicianRow>> {
    let mut reader = csv::Reader::from_path(path).map_err(Error::Csv)?;
    let mut rows = Vec::new();
    for (i, record) in reader.deserialize::<ClinicianRow>().enumerate() {
        let row = record.map_err(Error::Csv)?;
        if row.judge_label > 1 || row.reference_label > 1 {
            return Err(Error::MalformedRecord {
                path: path.to_path_buf(),
                line: i + 2,
                message: format!(
                    "labels must be 0 or 1, got judge={} reference={}",
                    row.judge_label, row.reference_label
                ),
            });
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn write_clinician_csv(path: &Path, rows: &[ClinicianRow]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer.serialize(row).map_err(Error::Csv)?;
    }
    let bytes = writer.into_inner().map_err(|e| Error::Artifact {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    crate::fsio::atomic_write(path, &bytes)?;
    Ok(())
}

/// Agreement computed straight from CSV rows.
pub fn agreement_from_rows(rows: &[ClinicianRow]) -> Result<(f64, AgreementTable)> {
    let judge: Vec<bool> = rows.iter().map(|r| r.judge_label == 1).collect();
    let reference: Vec<bool> = rows.iter().map(|r| r.reference_label == 1).collect();
    agreement(&judge, &reference)
}

/// Per-report token-probability baseline scores.
///
/// `token_logprobs` holds realized probabilities grouped per sentence; each
/// sentence contributes the mean of −ln p over its tokens, and the report
/// score is the mean over sentences. When per-position probability slices
/// are present the entropy score is built the same way from
/// H = −Σ p ln p, and the narrowest slice seen is recorded.
pub fn entropy_baselines(report: &crate::corpus::Report) -> Result<EntropyScores> {
    let check = |p: f64| -> Result<f64> {
        if !p.is_finite() || p <= 0.0 || p > 1.0 {
            return Err(Error::InvalidProbability {
                study_id: report.study_id.clone(),
                message: format!("token probability {p} outside (0, 1]"),
            });
        }
        Ok(p)
    };

    let sentences = report
        .token_logprobs
        .as_ref()
        .filter(|s| s.iter().any(|tokens| !tokens.is_empty()))
        .ok_or_else(|| Error::MissingLogprobs {
            study_id: report.study_id.clone(),
        })?;
    let mut sentence_means = Vec::new();
    for tokens in sentences {
        if tokens.is_empty() {
            continue;
        }
        let sum = tokens
            .iter()
            .map(|&p| check(p).map(|p| -p.ln()))
            .sum::<Result<f64>>()?;
        sentence_means.push(sum / tokens.len() as f64);
    }
    // `+ 0.0` collapses the IEEE -0.0 produced by -ln(1) into +0.0 so that
    // fully-confident reports serialize as plain zero.
    let avg_neg_logprob = sentence_means.iter().sum::<f64>() / sentence_means.len() as f64 + 0.0;

    let mut avg_entropy = None;
    let mut distribution_slice = None;
    if let Some(dists) = &report.token_distributions {
        let mut means = Vec::new();
        let mut narrowest = usize::MAX;
        for sentence in dists {
            if sentence.is_empty() {
                continue;
            }
            let mut entropies = Vec::with_capacity(sentence.len());
            for position in sentence {
                if position.is_empty() {
                    return Err(Error::InvalidProbability {
                        study_id: report.study_id.clone(),
                        message: "empty probability slice at a token position".into(),
                    });
                }
                narrowest = narrowest.min(position.len());
                let h = position
                    .iter()
                    .map(|&p| check(p).map(|p| -p * p.ln()))
                    .sum::<Result<f64>>()?;
                entropies.push(h);
            }
            means.push(entropies.iter().sum::<f64>() / entropies.len() as f64);
        }
        if !means.is_empty() {
            avg_entropy = Some(means.iter().sum::<f64>() / means.len() as f64 + 0.0);
            distribution_slice = Some(narrowest);
        }
    }

    Ok(EntropyScores {
        study_id: report.study_id.clone(),
        avg_neg_logprob,
        avg_entropy,
        distribution_slice,
    })
}

/// How many reports a target flag fraction selects: `round(fraction · n)`,
/// clamped to `n`.
pub fn split_size(n_reports: usize, fraction: f64) -> usize {
    ((fraction * n_reports as f64).round() as usize).min(n_reports)
}

/// Ranks reports by a baseline score (highest first, ties broken by id) and
/// splits off the top `k` as flagged. Returns `(flagged, accepted)` ids in
/// rank order.
pub fn entropy_split(scores: &[(String, f64)], k: usize) -> Result<(Vec<String>, Vec<String>)> {
    if k > scores.len() {
        return Err(Error::SplitOutOfRange {
            requested: k,
            available: scores.len(),
        });
    }
    let mut ranked: Vec<&(String, f64)> = scores.iter().collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let ids: Vec<String> = ranked.into_iter().map(|(id, _)| id.clone()).collect();
    let accepted = ids[k..].to_vec();
    let mut flagged = ids;
    flagged.truncate(k);
    Ok((flagged, accepted))
}

/// Flagged-sentence count per study, including zero entries for studies whose
/// sentences were all accepted.
pub fn flag_counts(decisions: &[SentenceDecision]) -> BTreeMap<String, usize> {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for d in decisions {
        let entry = counts.entry(d.study_id.clone()).or_insert(0);
        if d.flagged {
            *entry += 1;
        }
    }
    counts
}

fn metric_means(studies: &[&Study]) -> BTreeMap<String, f64> {
    let mut sums: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
    for study in studies {
        for (name, value) in &study.external_metrics {
            let entry = sums.entry(name.as_str()).or_insert((0.0, 0));
            entry.0 += value;
            entry.1 += 1;
        }
    }
    sums.into_iter()
        .map(|(name, (sum, n))| (name.to_string(), sum / n as f64))
        .collect()
}

fn summary_row(
    label: SplitLabel,
    lambda2: Option<u32>,
    members: Vec<&Study>,
    t_by_study: &BTreeMap<&str, usize>,
) -> SummaryRow {
    let n_reports = members.len();
    let avg_true_hallucinations = if n_reports == 0 {
        0.0
    } else {
        members
            .iter()
            .map(|s| t_by_study[s.study_id.as_str()] as f64)
            .sum::<f64>()
            / n_reports as f64
    };
    SummaryRow {
        split_label: label,
        lambda2,
        n_reports,
        avg_true_hallucinations,
        external_metric_means: metric_means(&members),
    }
}

/// Builds the summary rows: one `original` row over every study, then an
/// `accepted` (h < λ₂) and a `flagged` (h ≥ λ₂) row per requested λ₂, in the
/// order given. Decisions and labels must pair 1:1 and cover exactly the
/// studies passed in.
pub fn summary_table(
    studies: &[Study],
    decisions: &[SentenceDecision],
    labels: &[CalibrationLabel],
    lambda2_values: &[u32],
) -> Result<Vec<SummaryRow>> {
    if decisions.len() != labels.len() {
        return Err(Error::Misaligned {
            message: format!("{} decisions vs {} labels", decisions.len(), labels.len()),
        });
    }
    if lambda2_values.contains(&0) {
        return Err(Error::Config("lambda2 must be positive".into()));
    }

    let mut by_ref = label_map(labels)?;
    let mut h_by_study: BTreeMap<&str, usize> = BTreeMap::new();
    let mut t_by_study: BTreeMap<&str, usize> = BTreeMap::new();
    for study in studies {
        if h_by_study.insert(study.study_id.as_str(), 0).is_some() {
            return Err(Error::DuplicateStudy {
                study_id: study.study_id.clone(),
            });
        }
        t_by_study.insert(study.study_id.as_str(), 0);
    }
    for d in decisions {
        let entailed = by_ref
            .remove(&(d.study_id.as_str(), d.index))
            .ok_or_else(|| Error::Misaligned {
                message: format!("no label for decision {}#{}", d.study_id, d.index),
            })?;
        let h = h_by_study
            .get_mut(d.study_id.as_str())
            .ok_or_else(|| Error::Misaligned {
                message: format!("decision for unknown study {}", d.study_id),
            })?;
        if d.flagged {
            *h += 1;
        }
        if !entailed {
            *t_by_study
                .get_mut(d.study_id.as_str())
                .expect("seeded above") += 1;
        }
    }

    let mut rows = Vec::with_capacity(1 + 2 * lambda2_values.len());
    rows.push(summary_row(
        SplitLabel::Original,
        None,
        studies.iter().collect(),
        &t_by_study,
    ));
    for &lambda2 in lambda2_values {
        let (flagged, accepted): (Vec<&Study>, Vec<&Study>) = studies
            .iter()
            .partition(|s| h_by_study[s.study_id.as_str()] >= lambda2 as usize);
        rows.push(summary_row(
            SplitLabel::Accepted,
            Some(lambda2),
            accepted,
            &t_by_study,
        ));
        rows.push(summary_row(
            SplitLabel::Flagged,
            Some(lambda2),
            flagged,
            &t_by_study,
        ));
    }
    Ok(rows)
}

/// Renders summary rows as an aligned-column text table. Metric columns are
/// the sorted union of every row's metric names.
pub fn render_summary_text(rows: &[SummaryRow]) -> String {
    let mut metric_names: Vec<&str> = Vec::new();
    for row in rows {
        for name in row.external_metric_means.keys() {
            if !metric_names.contains(&name.as_str()) {
                metric_names.push(name);
            }
        }
    }
    metric_names.sort_unstable();

    let mut header: Vec<String> = vec![
        "split".into(),
        "lambda2".into(),
        "reports".into(),
        "true_halluc/report".into(),
    ];
    header.extend(metric_names.iter().map(|s| s.to_string()));

    let mut body: Vec<Vec<String>> = Vec::with_capacity(rows.len());
    for row in rows {
        let mut cells = vec![
            row.split_label.as_str().to_string(),
            row.lambda2.map_or_else(|| "-".into(), |l| l.to_string()),
            row.n_reports.to_string(),
            format!("{:.2}", row.avg_true_hallucinations),
        ];
        for name in &metric_names {
            cells.push(
                row.external_metric_means
                    .get(*name)
                    .map_or_else(|| "-".into(), |v| format!("{v:.3}")),
            );
        }
        body.push(cells);
    }

    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for cells in &body {
        for (w, cell) in widths.iter_mut().zip(cells) {
            *w = (*w).max(cell.len());
        }
    }

    let render_line = |cells: &[String]| -> String {
        let mut line = String::new();
        for (i, (cell, width)) in cells.iter().zip(&widths).enumerate() {
            if i > 0 {
                line.push_str("  ");
            }
            if i == 0 {
                line.push_str(&format!("{cell:<width$}"));
            } else {
                line.push_str(&format!("{cell:>width$}"));
            }
        }
        line
    };

    let mut out = render_line(&header);
    out.push('\n');
    for cells in &body {
        out.push_str(&render_line(cells));
        out.push('\n');
    }
    out
}
