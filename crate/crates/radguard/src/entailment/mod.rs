//! Three-way entailment judging and the two quantities built on it.
//!
//! A judge backend classifies a candidate sentence against report text as
//! CompletelyEntailed, PartiallyEntailed, or NotEntailed. Two asymmetric
//! aggregates matter downstream:
//!
//! * the support score against the sample corpus counts CE and PE both as
//!   support (a sample that roughly agrees is still evidence the claim is
//!   not confabulated);
//! * the calibration label against ground truth counts only CE as entailed
//!   (any mismatch with the reference report makes the sentence unsafe to
//!   treat as factual).
//!
//! Backends are pluggable: a deterministic rule-based judge for tests and
//! offline runs, and an HTTP judge speaking the batched JSON wire format.

mod llm;
mod prompts;
mod reference;

pub use llm::{JudgeConfig, LlmJudge};
pub use prompts::{render_batch_prompt, render_ground_truth_prompt, PROMPT_VERSION};
pub use reference::ReferenceJudge;

use serde::{Deserialize, Serialize};

use crate::corpus::{Report, Sentence};
use crate::error::{Error, Result};

/// One judge classification of sentence vs report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Verdict {
    CompletelyEntailed,
    PartiallyEntailed,
    NotEntailed,
}

impl Verdict {
    /// Whether this verdict counts toward the support score (CE or PE).
    pub fn supports(self) -> bool {
        !matches!(self, Verdict::NotEntailed)
    }
}

/// A judge implementation. Batch calls classify one sentence against every
/// usable sample of a study in a single exchange; single calls classify
/// against one report (the ground truth).
pub trait JudgeBackend: Send + Sync {
    /// One verdict per sample text, positionally aligned.
    fn judge_batch(&self, sentence_text: &str, sample_texts: &[&str]) -> Result<Vec<Verdict>>;

    /// Verdict of a single sentence/report pair.
    fn judge_single(&self, sentence_text: &str, report_text: &str) -> Result<Verdict>;

    fn name(&self) -> &'static str;
}

/// Verdicts for one sentence against a study's usable samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchVerdicts {
    pub study_id: String,
    pub index: usize,
    pub verdicts: Vec<Verdict>,
}

/// Support score: how many usable samples entail the sentence at least partially.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntailmentScore {
    pub study_id: String,
    pub index: usize,
    /// #CE + #PE over the usable samples.
    pub value: u32,
    /// How many samples entered the denominator for this study.
    pub effective_n: u32,
}

/// Ground-truth label: 1 only when the reference report completely entails
/// the sentence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationLabel {
    pub study_id: String,
    pub index: usize,
    #[serde(with = "bool_as_int")]
    pub entailed: bool,
}

/// Judges one sentence against every usable sample of a study.
pub fn judge_against_corpus(
    sentence: &Sentence,
    samples: &[Report],
    backend: &dyn JudgeBackend,
) -> Result<BatchVerdicts> {
    let texts: Vec<&str> = samples
        .iter()
        .filter(|s| !s.is_empty())
        .map(|s| s.text.as_str())
        .collect();
    if texts.is_empty() {
        return Err(Error::NoUsableSamples {
            study_id: sentence.study_id.clone(),
        });
    }
    let verdicts = backend.judge_batch(&sentence.text, &texts)?;
    if verdicts.len() != texts.len() {
        return Err(Error::JudgeResponse {
            message: format!(
                "backend {} returned {} verdicts for {} samples",
                backend.name(),
                verdicts.len(),
                texts.len()
            ),
            raw: String::new(),
        });
    }
    Ok(BatchVerdicts {
        study_id: sentence.study_id.clone(),
        index: sentence.index,
        verdicts,
    })
}

/// Support score for one sentence: #CE + #PE among the batch verdicts.
pub fn score(
    sentence: &Sentence,
    samples: &[Report],
    backend: &dyn JudgeBackend,
) -> Result<EntailmentScore> {
    let batch = judge_against_corpus(sentence, samples, backend)?;
    let value = batch.verdicts.iter().filter(|v| v.supports()).count() as u32;
    Ok(EntailmentScore {
        study_id: batch.study_id,
        index: batch.index,
        value,
        effective_n: batch.verdicts.len() as u32,
    })
}

/// Calibration label for one sentence: entailed only on CompletelyEntailed.
/// PartiallyEntailed deliberately maps to 0, unlike its role in `score`.
pub fn label_against_ground_truth(
    sentence: &Sentence,
    ground_truth: &Report,
    backend: &dyn JudgeBackend,
) -> Result<CalibrationLabel> {
    if ground_truth.is_empty() {
        return Err(Error::MissingGroundTruth {
            study_id: sentence.study_id.clone(),
        });
    }
    let verdict = backend.judge_single(&sentence.text, &ground_truth.text)?;
    Ok(CalibrationLabel {
        study_id: sentence.study_id.clone(),
        index: sentence.index,
        entailed: verdict == Verdict::CompletelyEntailed,
    })
}

/// The deterministic rule-based judge.
pub fn reference_backend() -> ReferenceJudge {
    ReferenceJudge::new()
}

/// Serializes the entailed bit as 0/1, the form calibration files use.
pub(crate) mod bool_as_int {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &bool, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(u8::from(*v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
        match u8::deserialize(d)? {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(serde::de::Error::custom(format!(
                "entailed must be 0 or 1, got {other}"
            ))),
        }
    }
}
