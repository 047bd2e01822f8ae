//! Rule-based sentence splitting tuned for radiology prose.
//!
//! A boundary is a run of terminal punctuation ({`.`, `!`, `?`}) followed by
//! whitespace and then an ASCII uppercase letter or digit. The token directly
//! before the punctuation can veto the split: known abbreviations ("Dr.",
//! "a.m."), bare integers (enumeration markers like "1."), and single letters
//! (initials) never end a sentence. Decimals such as "2.5 cm" are safe
//! without a rule of their own because no whitespace follows the inner dot.
//! When in doubt the splitter under-splits; downstream scoring tolerates a
//! long sentence better than half of one.

use super::{Report, Sentence};

/// Tokens that keep their trailing period, lowercase, without the final dot.
const PROTECTED: &[&str] = &[
    "dr", "mr", "mrs", "ms", "prof", "st", "vs", "etc", "approx", "resp", "e.g", "i.e", "a.m",
    "p.m",
];

/// Splits text into trimmed, non-empty sentences.
pub fn split_sentences(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut sentences = Vec::new();
    let mut start = 0;
    let mut i = 0;
    while i < chars.len() {
        if !is_terminal(chars[i]) {
            i += 1;
            continue;
        }
        // Absorb the whole punctuation run ("...", "?!") into this sentence.
        let mut end = i;
        while end + 1 < chars.len() && is_terminal(chars[end + 1]) {
            end += 1;
        }
        let mut next = end + 1;
        let mut saw_whitespace = false;
        while next < chars.len() && chars[next].is_whitespace() {
            saw_whitespace = true;
            next += 1;
        }
        let next_starts_sentence = next < chars.len()
            && (chars[next].is_ascii_uppercase() || chars[next].is_ascii_digit());
        if saw_whitespace && next_starts_sentence && !protected_before(&chars[start..i]) {
            push_trimmed(&mut sentences, &chars[start..=end]);
            start = next;
        }
        i = end + 1;
    }
    if start < chars.len() {
        push_trimmed(&mut sentences, &chars[start..]);
    }
    sentences
}

/// Tokenizes a candidate report; indices are contiguous from 0.
pub fn tokenize(report: &Report) -> Vec<Sentence> {
    split_sentences(&report.text)
        .into_iter()
        .enumerate()
        .map(|(index, text)| Sentence {
            study_id: report.study_id.clone(),
            index,
            text,
            score: None,
            category: None,
            flagged: None,
        })
        .collect()
}

fn is_terminal(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

fn push_trimmed(sentences: &mut Vec<String>, span: &[char]) {
    let s: String = span.iter().collect();
    let s = s.trim();
    if !s.is_empty() {
        sentences.push(s.to_string());
    }
}

/// Whether the token ending at the punctuation vetoes a split.
fn protected_before(prefix: &[char]) -> bool {
    let mut start = prefix.len();
    while start > 0 && !prefix[start - 1].is_whitespace() {
        start -= 1;
    }
    let word: String = prefix[start..].iter().collect();
    // Strip wrapping punctuation like "(5" but keep inner dots for "a.m".
    let word = word.trim_matches(|c: char| !c.is_alphanumeric() && c != '.');
    let word = word.trim_matches('.');
    if word.is_empty() {
        return true;
    }
    if PROTECTED.contains(&word.to_lowercase().as_str()) {
        return true;
    }
    if word.chars().all(|c| c.is_ascii_digit()) {
        return true;
    }
    let mut letters = word.chars();
    if let (Some(c), None) = (letters.next(), letters.next()) {
        if c.is_alphabetic() {
            return true;
        }
    }
    false
}
