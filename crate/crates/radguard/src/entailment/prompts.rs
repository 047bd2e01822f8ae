//! Prompt templates and judge wire-format parsing.
//!
//! The two templates ship verbatim as versioned text assets and are embedded
//! at compile time. The batched template classifies one finding against all
//! n sample reports in a single exchange and asks for
//! `{"E": [...], "P": [...], "N": [...]}` over report numbers 1..n; the
//! ground-truth template classifies one finding against one report and asks
//! for `{"status": "..."}`. Parsing validates that a batch response is an
//! exact partition of 1..n before any verdict is accepted.

use std::collections::BTreeSet;

use serde::Deserialize;

use super::Verdict;

pub const PROMPT_VERSION: &str = "v1";

const BATCH_TEMPLATE: &str = include_str!("../../assets/entailment_prompt_v1.txt");
const GROUND_TRUTH_TEMPLATE: &str = include_str!("../../assets/ground_truth_prompt_v1.txt");

/// Fills the batched template with the finding and numbered sample reports.
pub fn render_batch_prompt(sentence_text: &str, sample_texts: &[&str]) -> String {
    let reports = sample_texts
        .iter()
        .enumerate()
        .map(|(i, text)| format!("R{}: {}", i + 1, text))
        .collect::<Vec<_>>()
        .join("\n");
    BATCH_TEMPLATE
        .replace("{n}", &sample_texts.len().to_string())
        .replace("{finding}", sentence_text)
        .replace("{reports}", &reports)
}

/// Fills the ground-truth template with the finding and the reference report.
pub fn render_ground_truth_prompt(sentence_text: &str, report_text: &str) -> String {
    GROUND_TRUTH_TEMPLATE
        .replace("{finding}", sentence_text)
        .replace("{report}", report_text)
}

#[derive(Deserialize)]
struct BatchResponse {
    #[serde(rename = "E")]
    e: Vec<usize>,
    #[serde(rename = "P")]
    p: Vec<usize>,
    #[serde(rename = "N")]
    n: Vec<usize>,
}

#[derive(Deserialize)]
struct StatusResponse {
    status: String,
}

/// Pulls the outermost JSON object out of a possibly chatty reply.
fn json_payload(raw: &str) -> &str {
    let trimmed = raw.trim();
    match (trimmed.find('{'), trimmed.rfind('}')) {
        (Some(start), Some(end)) if start < end => &trimmed[start..=end],
        _ => trimmed,
    }
}

/// Parses and validates a batched verdict response against n samples.
/// Returns one verdict per report, positionally aligned, or a description of
/// what was wrong (used verbatim in the repair re-prompt).
pub fn parse_batch_response(raw: &str, n: usize) -> std::result::Result<Vec<Verdict>, String> {
    let parsed: BatchResponse = serde_json::from_str(json_payload(raw))
        .map_err(|e| format!("response is not the expected E/P/N json object: {e}"))?;

    let mut verdicts = vec![None; n];
    let mut seen = BTreeSet::new();
    for (list, verdict) in [
        (&parsed.e, Verdict::CompletelyEntailed),
        (&parsed.p, Verdict::PartiallyEntailed),
        (&parsed.n, Verdict::NotEntailed),
    ] {
        for &report_number in list {
            if report_number == 0 || report_number > n {
                return Err(format!("report number {report_number} is outside 1..={n}"));
            }
            if !seen.insert(report_number) {
                return Err(format!(
                    "report number {report_number} appears in more than one list"
                ));
            }
            verdicts[report_number - 1] = Some(verdict);
        }
    }
    if seen.len() != n {
        return Err(format!(
            "lists cover {} report numbers but must add up to {n}",
            seen.len()
        ));
    }
    Ok(verdicts.into_iter().map(|v| v.expect("covered")).collect())
}

/// Parses a ground-truth status response.
pub fn parse_status_response(raw: &str) -> std::result::Result<Verdict, String> {
    let parsed: StatusResponse = serde_json::from_str(json_payload(raw))
        .map_err(|e| format!("response is not the expected status json object: {e}"))?;
    match parsed.status.trim().to_lowercase().as_str() {
        "entailed" | "completely entailed" => Ok(Verdict::CompletelyEntailed),
        "partially entailed" => Ok(Verdict::PartiallyEntailed),
        "not entailed" => Ok(Verdict::NotEntailed),
        other => Err(format!(
            "status {other:?} is not one of entailed / partially entailed / not entailed"
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batch_prompt_numbers_reports_and_pins_n() {
        let prompt = render_batch_prompt(
            "There is effusion.",
            &["Report one.", "Report two.", "Report three."],
        );
        assert!(prompt.contains("(R1-R3)"));
        assert!(prompt.contains("MUST ADD UP to 3"));
        assert!(prompt.contains("Finding: \"There is effusion.\""));
        assert!(prompt.contains("R1: Report one.\nR2: Report two.\nR3: Report three."));
        assert!(!prompt.contains("{n}"));
        assert!(!prompt.contains("{finding}"));
        assert!(!prompt.contains("{reports}"));
    }

    #[test]
    fn ground_truth_prompt_fills_slots() {
        let prompt = render_ground_truth_prompt("There is effusion.", "Effusion is present.");
        assert!(prompt.contains("Finding: \"There is effusion.\""));
        assert!(prompt.contains("R: Effusion is present."));
        assert!(prompt.contains(r#"{"status": "entailed"}"#));
    }

    #[test]
    fn valid_partition_parses_positionally() {
        let raw = r#"{"E": [1, 2, 3], "P": [7, 8, 9, 10], "N": [4, 5, 6]}"#;
        let verdicts = parse_batch_response(raw, 10).unwrap();
        assert_eq!(verdicts[0], Verdict::CompletelyEntailed);
        assert_eq!(verdicts[6], Verdict::PartiallyEntailed);
        assert_eq!(verdicts[3], Verdict::NotEntailed);
        assert_eq!(verdicts.len(), 10);
    }

    #[test]
    fn chatty_wrapping_is_tolerated() {
        let raw = "Sure, here you go:\n{\"E\": [1], \"P\": [], \"N\": [2]}\nHope that helps!";
        let verdicts = parse_batch_response(raw, 2).unwrap();
        assert_eq!(
            verdicts,
            vec![Verdict::CompletelyEntailed, Verdict::NotEntailed]
        );
    }

    #[test]
    fn overlap_is_rejected() {
        let raw = r#"{"E": [1, 2], "P": [2], "N": []}"#;
        let err = parse_batch_response(raw, 2).unwrap_err();
        assert!(err.contains("more than one list"), "{err}");
    }

    #[test]
    fn missing_numbers_are_rejected() {
        let raw = r#"{"E": [1], "P": [], "N": []}"#;
        let err = parse_batch_response(raw, 3).unwrap_err();
        assert!(err.contains("add up to 3"), "{err}");
    }

    #[test]
    fn out_of_range_numbers_are_rejected() {
        let raw = r#"{"E": [0], "P": [1], "N": [2]}"#;
        assert!(parse_batch_response(raw, 2).is_err());
        let raw = r#"{"E": [1, 5], "P": [], "N": [2]}"#;
        assert!(parse_batch_response(raw, 3).is_err());
    }

    #[test]
    fn malformed_json_is_rejected() {
        assert!(parse_batch_response("not json at all", 2).is_err());
    }

    #[test]
    fn status_strings_map_to_verdicts() {
        for (status, want) in [
            ("entailed", Verdict::CompletelyEntailed),
            ("completely entailed", Verdict::CompletelyEntailed),
            ("Partially Entailed", Verdict::PartiallyEntailed),
            ("not entailed", Verdict::NotEntailed),
        ] {
            let raw = format!(r#"{{"status": "{status}"}}"#);
            assert_eq!(parse_status_response(&raw).unwrap(), want);
        }
        assert!(parse_status_response(r#"{"status": "maybe"}"#).is_err());
    }
}
