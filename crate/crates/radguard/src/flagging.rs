//! Threshold application: sentence flags, report flags, and report rewriting.
//!
//! A sentence is flagged when its support score falls strictly below lambda1.
//! A report is flagged when its flagged-sentence count h reaches lambda2;
//! the default rule is `h >= lambda2`, with a strict `h > lambda2` variant
//! available behind [`ReportRule`] for consumers who want the looser reading.

use serde::{Deserialize, Serialize};

use crate::corpus::{split_sentences, Report, ReportKind};
use crate::entailment::EntailmentScore;
use crate::error::{Error, Result};

/// Per-sentence flag decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceDecision {
    pub study_id: String,
    pub index: usize,
    pub score: u32,
    pub flagged: bool,
}

/// How a report's flag count is compared against lambda2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ReportRule {
    /// Flag when h >= lambda2. The default.
    #[default]
    AtLeast,
    /// Flag when h > lambda2 (strict variant).
    MoreThan,
}

/// Per-report flag decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDecision {
    pub study_id: String,
    pub flag_count: u32,
    pub flagged: bool,
    pub lambda2: u32,
}

/// Applies the sentence rule: flagged iff score < lambda1.
pub fn flag_sentence(score: &EntailmentScore, lambda1: u32) -> SentenceDecision {
    SentenceDecision {
        study_id: score.study_id.clone(),
        index: score.index,
        score: score.value,
        flagged: score.value < lambda1,
    }
}

/// Counts flags for one report and applies the report rule.
pub fn flag_report(
    decisions: &[SentenceDecision],
    lambda2: u32,
    rule: ReportRule,
) -> Result<ReportDecision> {
    let first = decisions.first().ok_or(Error::EmptyDecisions)?;
    if let Some(stray) = decisions.iter().find(|d| d.study_id != first.study_id) {
        return Err(Error::MixedStudies {
            first: first.study_id.clone(),
            second: stray.study_id.clone(),
        });
    }
    if lambda2 == 0 {
        return Err(Error::Config("lambda2 must be positive".into()));
    }
    let flag_count = decisions.iter().filter(|d| d.flagged).count() as u32;
    let flagged = match rule {
        ReportRule::AtLeast => flag_count >= lambda2,
        ReportRule::MoreThan => flag_count > lambda2,
    };
    Ok(ReportDecision {
        study_id: first.study_id.clone(),
        flag_count,
        flagged,
        lambda2,
    })
}

/// Rewrites a candidate with its flagged sentences removed. Decisions must
/// cover the candidate's sentence indices exactly; a fully flagged candidate
/// comes back with empty text (detectable via `Report::is_empty`).
pub fn remove_flagged(candidate: &Report, decisions: &[SentenceDecision]) -> Result<Report> {
    let sentences = split_sentences(&candidate.text);

    let mut keep_by_index = vec![None; sentences.len()];
    for d in decisions {
        if d.study_id != candidate.study_id {
            return Err(Error::MixedStudies {
                first: candidate.study_id.clone(),
                second: d.study_id.clone(),
            });
        }
        if d.index >= sentences.len() || keep_by_index[d.index].is_some() {
            return Err(Error::Misaligned {
                message: format!(
                    "decision index {} does not fit candidate {} with {} sentences",
                    d.index,
                    candidate.study_id,
                    sentences.len()
                ),
            });
        }
        keep_by_index[d.index] = Some(!d.flagged);
    }
    if keep_by_index.iter().any(Option::is_none) {
        return Err(Error::Misaligned {
            message: format!(
                "decisions cover {} of {} sentences for candidate {}",
                decisions.len(),
                sentences.len(),
                candidate.study_id
            ),
        });
    }

    let kept: Vec<&str> = sentences
        .iter()
        .zip(&keep_by_index)
        .filter(|(_, keep)| keep.unwrap_or(false))
        .map(|(s, _)| s.as_str())
        .collect();
    Ok(Report {
        study_id: candidate.study_id.clone(),
        text: kept.join(" "),
        temperature: candidate.temperature,
        kind: ReportKind::Candidate,
        token_logprobs: None,
        token_distributions: None,
    })
}
