//! Deterministic rule-based judge.
//!
//! This backend exists so calibration, flagging, and evaluation can run
//! offline with reproducible verdicts; it is a test oracle for pipeline
//! plumbing, not a clinical entailer. The rules mirror the taxonomy the LLM
//! judge is prompted with:
//!
//! * The claim sentence is reduced to finding terms: content words minus
//!   stopwords, negation cues, anatomy words, and modifiers.
//! * A claim with no finding terms is boilerplate or a generic normal
//!   statement and is CompletelyEntailed.
//! * A negated claim ("no pneumothorax") is NotEntailed only when some
//!   report sentence asserts all its finding terms positively; otherwise it
//!   is CompletelyEntailed (negative findings need not be restated).
//! * A positive claim needs some report sentence containing all its finding
//!   terms, non-negated. Matching severity/laterality/measurement modifiers
//!   give CompletelyEntailed; a modifier mismatch gives PartiallyEntailed;
//!   no such sentence gives NotEntailed. A report's "bilateral" covers a
//!   one-sided claim.
//!
//! Words are normalized to lowercase with a light plural strip so
//! "effusions" matches "effusion" while "atelectasis" stays put.

use std::collections::BTreeSet;

use crate::corpus::split_sentences;
use crate::error::Result;

use super::{JudgeBackend, Verdict};

const STOPWORDS: &[&str] = &[
    "the",
    "a",
    "an",
    "is",
    "are",
    "was",
    "were",
    "be",
    "been",
    "being",
    "there",
    "this",
    "that",
    "it",
    "its",
    "has",
    "have",
    "had",
    "of",
    "in",
    "on",
    "at",
    "to",
    "and",
    "or",
    "with",
    "within",
    "for",
    "from",
    "seen",
    "noted",
    "present",
    "identified",
    "visualized",
    "observed",
    "demonstrated",
    "shows",
    "showing",
    "show",
    "suggests",
    "suggesting",
    "compatible",
    "consistent",
    "evidence",
    "focal",
    "overt",
    "acute",
    "interval",
    "new",
    "again",
    "status",
    "post",
    "patient",
    "exam",
    "study",
    "comparison",
    "versus",
    "since",
    "prior",
    "priors",
];

const NEGATION_CUES: &[&str] = &[
    "no",
    "not",
    "without",
    "negative",
    "unremarkable",
    "normal",
    "clear",
    "resolved",
    "absent",
    "absence",
    "free",
];

const ANATOMY: &[&str] = &[
    "lung",
    "lungs",
    "pulmonary",
    "heart",
    "cardiac",
    "chest",
    "thorax",
    "thoracic",
    "pleura",
    "pleural",
    "mediastinum",
    "mediastinal",
    "silhouette",
    "contour",
    "contours",
    "size",
    "bones",
    "bony",
    "osseous",
    "rib",
    "ribs",
    "spine",
    "carina",
    "hila",
    "hilar",
    "costophrenic",
    "hemidiaphragm",
    "diaphragm",
    "lobe",
    "lobes",
    "basilar",
    "base",
    "bases",
    "apex",
    "apical",
    "upper",
    "lower",
    "mid",
    "zone",
    "region",
    "angle",
    "angles",
];

const SEVERITY: &[&str] = &[
    "mild",
    "minimal",
    "moderate",
    "severe",
    "trace",
    "slight",
    "small",
    "large",
    "tiny",
    "extensive",
    "massive",
    "subtle",
];

const LATERALITY: &[&str] = &["left", "right", "bilateral"];

/// Deterministic offline judge. Stateless and cheap to share.
#[derive(Debug, Default, Clone, Copy)]
pub struct ReferenceJudge;

impl ReferenceJudge {
    pub fn new() -> Self {
        ReferenceJudge
    }

    fn judge_pair(&self, sentence_text: &str, report_text: &str) -> Verdict {
        let claim = Facts::from_text(sentence_text);
        if claim.terms.is_empty() {
            return Verdict::CompletelyEntailed;
        }
        let report_facts: Vec<Facts> = split_sentences(report_text)
            .iter()
            .map(|s| Facts::from_text(s))
            .collect();

        if claim.negated {
            let contradicted = report_facts
                .iter()
                .any(|rs| !rs.negated && rs.contains_all(&claim.terms));
            return if contradicted {
                Verdict::NotEntailed
            } else {
                Verdict::CompletelyEntailed
            };
        }

        let mut best: Option<Verdict> = None;
        for rs in &report_facts {
            if rs.negated || !rs.contains_all(&claim.terms) {
                continue;
            }
            if claim.modifiers_match(rs) {
                return Verdict::CompletelyEntailed;
            }
            best = Some(Verdict::PartiallyEntailed);
        }
        best.unwrap_or(Verdict::NotEntailed)
    }
}

impl JudgeBackend for ReferenceJudge {
    fn judge_batch(&self, sentence_text: &str, sample_texts: &[&str]) -> Result<Vec<Verdict>> {
        Ok(sample_texts
            .iter()
            .map(|report| self.judge_pair(sentence_text, report))
            .collect())
    }

    fn judge_single(&self, sentence_text: &str, report_text: &str) -> Result<Verdict> {
        Ok(self.judge_pair(sentence_text, report_text))
    }

    fn name(&self) -> &'static str {
        "reference"
    }
}

/// What one sentence asserts, in normalized-word form.
struct Facts {
    negated: bool,
    words: BTreeSet<String>,
    terms: BTreeSet<String>,
    severity: BTreeSet<String>,
    laterality: BTreeSet<String>,
    numbers: BTreeSet<String>,
}

impl Facts {
    fn from_text(text: &str) -> Self {
        let raw: Vec<String> = text
            .split(|c: char| !(c.is_alphanumeric() || c == '.'))
            .map(|w| w.trim_matches('.'))
            .filter(|w| !w.is_empty())
            .map(|w| w.to_lowercase())
            .collect();

        let mut facts = Facts {
            negated: false,
            words: BTreeSet::new(),
            terms: BTreeSet::new(),
            severity: BTreeSet::new(),
            laterality: BTreeSet::new(),
            numbers: BTreeSet::new(),
        };
        for word in raw {
            if word.chars().all(|c| c.is_ascii_digit() || c == '.') {
                facts.numbers.insert(word.clone());
                facts.words.insert(word);
                continue;
            }
            let norm = normalize(&word);
            facts.words.insert(norm.clone());
            if NEGATION_CUES.contains(&norm.as_str()) {
                facts.negated = true;
                continue;
            }
            let canon = strip_ly(&norm);
            if SEVERITY.contains(&canon.as_str()) {
                facts.severity.insert(canon);
                continue;
            }
            if LATERALITY.contains(&norm.as_str()) {
                facts.laterality.insert(norm);
                continue;
            }
            if STOPWORDS.contains(&norm.as_str()) || ANATOMY.contains(&norm.as_str()) {
                continue;
            }
            facts.terms.insert(norm);
        }
        facts
    }

    fn contains_all(&self, terms: &BTreeSet<String>) -> bool {
        terms.iter().all(|t| self.words.contains(t))
    }

    /// All modifier classes agree closely enough for full entailment.
    fn modifiers_match(&self, report: &Facts) -> bool {
        // Severity: a mismatch needs both sides to commit to disjoint values.
        if !self.severity.is_empty()
            && !report.severity.is_empty()
            && self.severity.is_disjoint(&report.severity)
        {
            return false;
        }
        // Laterality: "bilateral" in the report covers one-sided claims.
        if !self.laterality.is_empty() && !report.laterality.is_empty() {
            let covered =
                report.laterality.contains("bilateral") && !self.laterality.contains("bilateral");
            if !covered && self.laterality.is_disjoint(&report.laterality) {
                return false;
            }
            if self.laterality.contains("bilateral") && !report.laterality.contains("bilateral") {
                return false;
            }
        }
        // Measurements: the claim's numbers must all appear in the report
        // when both sides quote any.
        if !self.numbers.is_empty()
            && !report.numbers.is_empty()
            && !self.numbers.is_subset(&report.numbers)
        {
            return false;
        }
        true
    }
}

/// Lowercased already; strips a plain plural "s" from longer words.
fn normalize(word: &str) -> String {
    if word.len() > 4
        && word.ends_with('s')
        && !word.ends_with("ss")
        && !word.ends_with("is")
        && !word.ends_with("us")
    {
        word[..word.len() - 1].to_string()
    } else {
        word.to_string()
    }
}

/// Maps adverb forms onto their severity adjective; leaves other words alone.
fn strip_ly(word: &str) -> String {
    match word {
        "mildly" => "mild",
        "minimally" => "minimal",
        "moderately" => "moderate",
        "severely" => "severe",
        "slightly" => "slight",
        "massively" => "massive",
        "extensively" => "extensive",
        "subtly" => "subtle",
        other => other,
    }
    .to_string()
}
