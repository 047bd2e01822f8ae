//! Study corpus: report types, dataset IO, and the deterministic
//! calibration/test split.
//!
//! A dataset file is UTF-8 JSONL, one study per line:
//!
//! ```text
//! {"study_id": "...",
//!  "candidate": {"text": "...", "temperature": 0.1},
//!  "samples": [{"text": "...", "temperature": 5.0}, ...],
//!  "ground_truth": {"text": "..."},                       // optional
//!  "external_metrics": {"radcliq_v1": 1.23},              // optional
//!  "token_logprobs": [[0.91, 0.84, ...], ...],            // optional
//!  "token_distributions": [[[0.52, 0.21, ...], ...], ...]} // optional
//! ```
//!
//! `token_logprobs` holds the realized probability of each generated token,
//! grouped per candidate sentence. `token_distributions` optionally holds a
//! probability slice over alternative tokens at each position (as much of the
//! distribution as the generation service exposed); both attach to the
//! candidate report. Every study in one dataset carries the same number of
//! samples; a failed generation is kept as an empty-text sample so the slot
//! stays auditable, and scoring skips it.

mod category;
mod tokenize;

pub use category::{categorize, Category, KeywordTable};
pub use tokenize::{split_sentences, tokenize};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Role of a report within a study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportKind {
    /// The low-temperature report under scrutiny.
    Candidate,
    /// One of the high-temperature generations used as soft evidence.
    Sample,
    /// The reference report written for the same study.
    GroundTruth,
}

/// One generated or reference report.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub study_id: String,
    pub text: String,
    pub temperature: f64,
    pub kind: ReportKind,
    /// Realized next-token probability per token, grouped per candidate sentence.
    pub token_logprobs: Option<Vec<Vec<f64>>>,
    /// Probability slice over alternative tokens per position, when the service exposes one.
    pub token_distributions: Option<Vec<Vec<Vec<f64>>>>,
}

impl Report {
    pub fn is_empty(&self) -> bool {
        self.text.trim().is_empty()
    }
}

/// A candidate report plus the evidence used to score it.
#[derive(Debug, Clone, PartialEq)]
pub struct Study {
    pub study_id: String,
    pub candidate: Report,
    pub samples: Vec<Report>,
    pub ground_truth: Option<Report>,
    pub external_metrics: BTreeMap<String, f64>,
}

impl Study {
    /// Samples that actually produced text. Failed generations stay in
    /// `samples` as empty slots but never enter a scoring denominator.
    pub fn usable_samples(&self) -> Vec<&Report> {
        self.samples.iter().filter(|s| !s.is_empty()).collect()
    }
}

/// Identifies one sentence of one candidate report.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SentenceRef {
    pub study_id: String,
    pub index: usize,
}

impl fmt::Display for SentenceRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.study_id, self.index)
    }
}

/// A tokenized candidate sentence. `score`, `category`, and `flagged` start
/// unset and are filled in by later pipeline stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sentence {
    pub study_id: String,
    pub index: usize,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<Category>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flagged: Option<bool>,
}

impl Sentence {
    pub fn sentence_ref(&self) -> SentenceRef {
        SentenceRef {
            study_id: self.study_id.clone(),
            index: self.index,
        }
    }
}

// Wire-format records. Kept separate from the domain types so schema changes
// stay local to this block.

#[derive(Serialize, Deserialize)]
struct RawReport {
    text: String,
    #[serde(default)]
    temperature: f64,
}

#[derive(Serialize, Deserialize)]
struct RawGroundTruth {
    text: String,
}

#[derive(Serialize, Deserialize)]
struct RawStudy {
    study_id: String,
    candidate: RawReport,
    samples: Vec<RawReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ground_truth: Option<RawGroundTruth>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    external_metrics: Option<BTreeMap<String, f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    token_logprobs: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    token_distributions: Option<Vec<Vec<Vec<f64>>>>,
}

pub(crate) fn probe_probabilities(
    label: &str,
    groups: &[Vec<f64>],
) -> std::result::Result<(), String> {
    for row in groups {
        for &p in row {
            if !p.is_finite() || p <= 0.0 || p > 1.0 {
                return Err(format!("{label} probability {p} outside (0, 1]"));
            }
        }
    }
    Ok(())
}

fn study_from_raw(raw: RawStudy) -> std::result::Result<Study, String> {
    if raw.study_id.is_empty() {
        return Err("study_id is empty".into());
    }
    if raw.candidate.text.trim().is_empty() {
        return Err("candidate text is empty".into());
    }
    if raw.candidate.temperature < 0.0 || !raw.candidate.temperature.is_finite() {
        return Err(format!(
            "candidate temperature {} is invalid",
            raw.candidate.temperature
        ));
    }
    if let Some(lp) = &raw.token_logprobs {
        probe_probabilities("token_logprobs", lp)?;
    }
    if let Some(dists) = &raw.token_distributions {
        for sentence in dists {
            probe_probabilities("token_distributions", sentence)?;
        }
    }
    if let Some(gt) = &raw.ground_truth {
        if gt.text.trim().is_empty() {
            return Err("ground_truth text is empty".into());
        }
    }
    for (i, s) in raw.samples.iter().enumerate() {
        if s.temperature < 0.0 || !s.temperature.is_finite() {
            return Err(format!(
                "sample {i} temperature {} is invalid",
                s.temperature
            ));
        }
    }

    let study_id = raw.study_id;
    Ok(Study {
        candidate: Report {
            study_id: study_id.clone(),
            text: raw.candidate.text,
            temperature: raw.candidate.temperature,
            kind: ReportKind::Candidate,
            token_logprobs: raw.token_logprobs,
            token_distributions: raw.token_distributions,
        },
        samples: raw
            .samples
            .into_iter()
            .map(|s| Report {
                study_id: study_id.clone(),
                text: s.text,
                temperature: s.temperature,
                kind: ReportKind::Sample,
                token_logprobs: None,
                token_distributions: None,
            })
            .collect(),
        ground_truth: raw.ground_truth.map(|gt| Report {
            study_id: study_id.clone(),
            text: gt.text,
            temperature: 0.0,
            kind: ReportKind::GroundTruth,
            token_logprobs: None,
            token_distributions: None,
        }),
        external_metrics: raw.external_metrics.unwrap_or_default(),
        study_id,
    })
}

fn raw_from_study(study: &Study) -> RawStudy {
    RawStudy {
        study_id: study.study_id.clone(),
        candidate: RawReport {
            text: study.candidate.text.clone(),
            temperature: study.candidate.temperature,
        },
        samples: study
            .samples
            .iter()
            .map(|s| RawReport {
                text: s.text.clone(),
                temperature: s.temperature,
            })
            .collect(),
        ground_truth: study.ground_truth.as_ref().map(|gt| RawGroundTruth {
            text: gt.text.clone(),
        }),
        external_metrics: if study.external_metrics.is_empty() {
            None
        } else {
            Some(study.external_metrics.clone())
        },
        token_logprobs: study.candidate.token_logprobs.clone(),
        token_distributions: study.candidate.token_distributions.clone(),
    }
}

/// Loads a JSONL dataset, requiring exactly `expected_n` samples per study.
/// Studies come back sorted by `study_id`.
pub fn load_dataset(path: &Path, expected_n: usize) -> Result<Vec<Study>> {
    let file = File::open(path).map_err(|e| Error::Artifact {
        path: path.to_path_buf(),
        message: format!("cannot open dataset: {e}"),
    })?;
    let reader = BufReader::new(file);

    let mut studies = Vec::new();
    let mut seen = BTreeSet::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = |message: String| Error::MalformedRecord {
            path: path.to_path_buf(),
            line: lineno + 1,
            message,
        };
        let raw: RawStudy = serde_json::from_str(&line).map_err(|e| record(e.to_string()))?;
        if raw.samples.len() != expected_n {
            return Err(Error::SampleCount {
                study_id: raw.study_id,
                expected: expected_n,
                found: raw.samples.len(),
            });
        }
        let study = study_from_raw(raw).map_err(record)?;
        if !seen.insert(study.study_id.clone()) {
            return Err(Error::DuplicateStudy {
                study_id: study.study_id,
            });
        }
        studies.push(study);
    }
    studies.sort_by(|a, b| a.study_id.cmp(&b.study_id));
    Ok(studies)
}

/// Writes studies as JSONL in the same schema `load_dataset` reads.
pub fn save_dataset(path: &Path, studies: &[Study]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::Artifact {
        path: path.to_path_buf(),
        message: format!("cannot create dataset: {e}"),
    })?;
    let mut w = BufWriter::new(file);
    for study in studies {
        serde_json::to_writer(&mut w, &raw_from_study(study))?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Splits studies into (calibration, test) with a seed-keyed permutation.
///
/// The permutation is a hand-rolled Fisher-Yates over a ChaCha8 stream so the
/// split depends only on (sorted study ids, seed), not on any library's
/// shuffle internals. Both halves come back sorted by study_id.
pub fn split_dataset(
    mut studies: Vec<Study>,
    calibration_count: usize,
    seed: u64,
) -> Result<(Vec<Study>, Vec<Study>)> {
    if calibration_count == 0 || calibration_count >= studies.len() {
        return Err(Error::SplitOutOfRange {
            requested: calibration_count,
            available: studies.len(),
        });
    }
    studies.sort_by(|a, b| a.study_id.cmp(&b.study_id));

    let mut order: Vec<usize> = (0..studies.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in (1..order.len()).rev() {
        // Modulo bias is fine here: the split only needs to be fixed and well
        // mixed, not perfectly uniform.
        let j = (rng.next_u64() % (i as u64 + 1)) as usize;
        order.swap(i, j);
    }

    let calibration_ids: BTreeSet<usize> = order[..calibration_count].iter().copied().collect();
    let mut calibration = Vec::with_capacity(calibration_count);
    let mut test = Vec::with_capacity(studies.len() - calibration_count);
    for (idx, study) in studies.into_iter().enumerate() {
        if calibration_ids.contains(&idx) {
            calibration.push(study);
        } else {
            test.push(study);
        }
    }
    Ok((calibration, test))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn study_line(id: &str, n_samples: usize) -> String {
        let samples: Vec<String> = (0..n_samples)
            .map(|i| format!(r#"{{"text":"Sample {i} shows effusion.","temperature":5.0}}"#))
            .collect();
        format!(
            r#"{{"study_id":"{id}","candidate":{{"text":"There is effusion. No pneumothorax.","temperature":0.1}},"samples":[{}],"ground_truth":{{"text":"Effusion is present."}},"external_metrics":{{"radcliq_v1":1.5}}}}"#,
            samples.join(",")
        )
    }

    fn write_lines(lines: &[String]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for line in lines {
            writeln!(f, "{line}").unwrap();
        }
        f
    }

    #[test]
    fn loads_single_study() {
        let f = write_lines(&[study_line("s1", 10)]);
        let studies = load_dataset(f.path(), 10).unwrap();
        assert_eq!(studies.len(), 1);
        let s = &studies[0];
        assert_eq!(s.study_id, "s1");
        assert_eq!(s.samples.len(), 10);
        assert_eq!(s.candidate.kind, ReportKind::Candidate);
        assert_eq!(s.samples[3].kind, ReportKind::Sample);
        assert_eq!(
            s.ground_truth.as_ref().unwrap().kind,
            ReportKind::GroundTruth
        );
        assert_eq!(s.external_metrics["radcliq_v1"], 1.5);
    }

    #[test]
    fn sample_count_mismatch_names_study() {
        let f = write_lines(&[study_line("s1", 10), study_line("s2", 9)]);
        let err = load_dataset(f.path(), 10).unwrap_err();
        match err {
            Error::SampleCount {
                study_id,
                expected,
                found,
            } => {
                assert_eq!(study_id, "s2");
                assert_eq!((expected, found), (10, 9));
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn duplicate_study_rejected() {
        let f = write_lines(&[study_line("s1", 2), study_line("s1", 2)]);
        assert!(matches!(
            load_dataset(f.path(), 2),
            Err(Error::DuplicateStudy { .. })
        ));
    }

    #[test]
    fn malformed_line_reports_position() {
        let f = write_lines(&[study_line("s1", 2), "{not json".to_string()]);
        match load_dataset(f.path(), 2) {
            Err(Error::MalformedRecord { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn bad_probability_rejected() {
        let line = r#"{"study_id":"s1","candidate":{"text":"Clear.","temperature":0.1},"samples":[{"text":"Clear.","temperature":5.0}],"token_logprobs":[[0.5,1.5]]}"#;
        let f = write_lines(&[line.to_string()]);
        match load_dataset(f.path(), 1) {
            Err(Error::MalformedRecord { message, .. }) => {
                assert!(message.contains("outside (0, 1]"), "{message}");
            }
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn load_sorts_by_study_id() {
        let f = write_lines(&[study_line("s2", 1), study_line("s1", 1)]);
        let studies = load_dataset(f.path(), 1).unwrap();
        let ids: Vec<&str> = studies.iter().map(|s| s.study_id.as_str()).collect();
        assert_eq!(ids, ["s1", "s2"]);
    }

    #[test]
    fn save_load_roundtrip() {
        let f = write_lines(&[study_line("s1", 3), study_line("s2", 3)]);
        let studies = load_dataset(f.path(), 3).unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        save_dataset(out.path(), &studies).unwrap();
        let reloaded = load_dataset(out.path(), 3).unwrap();
        assert_eq!(studies, reloaded);
    }

    fn toy_studies(count: usize) -> Vec<Study> {
        let f = write_lines(
            &(0..count)
                .map(|i| study_line(&format!("study_{i:03}"), 1))
                .collect::<Vec<_>>(),
        );
        load_dataset(f.path(), 1).unwrap()
    }

    #[test]
    fn split_is_deterministic_disjoint_exhaustive() {
        let studies = toy_studies(20);
        let (cal_a, test_a) = split_dataset(studies.clone(), 12, 7).unwrap();
        let (cal_b, test_b) = split_dataset(studies.clone(), 12, 7).unwrap();
        assert_eq!(cal_a, cal_b);
        assert_eq!(test_a, test_b);
        assert_eq!(cal_a.len(), 12);
        assert_eq!(test_a.len(), 8);

        let mut ids: Vec<&str> = cal_a
            .iter()
            .chain(test_a.iter())
            .map(|s| s.study_id.as_str())
            .collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), 20);
    }

    #[test]
    fn split_depends_on_seed() {
        let studies = toy_studies(20);
        let (cal_a, _) = split_dataset(studies.clone(), 10, 1).unwrap();
        let (cal_b, _) = split_dataset(studies, 10, 2).unwrap();
        assert_ne!(cal_a, cal_b);
    }

    #[test]
    fn split_rejects_degenerate_counts() {
        let studies = toy_studies(3);
        assert!(matches!(
            split_dataset(studies.clone(), 3, 0),
            Err(Error::SplitOutOfRange { .. })
        ));
        assert!(matches!(
            split_dataset(studies, 0, 0),
            Err(Error::SplitOutOfRange { .. })
        ));
    }

    #[test]
    fn usable_samples_skips_empty() {
        let line = r#"{"study_id":"s1","candidate":{"text":"Clear.","temperature":0.1},"samples":[{"text":"Clear.","temperature":5.0},{"text":"","temperature":5.0},{"text":"  ","temperature":5.0}]}"#;
        let f = write_lines(&[line.to_string()]);
        let studies = load_dataset(f.path(), 3).unwrap();
        assert_eq!(studies[0].usable_samples().len(), 1);
    }
}
