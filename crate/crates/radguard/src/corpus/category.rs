//! Six-way finding categories with priority matching.
//!
//! Each sentence is assigned the first category, in priority order Devices >
//! Cardiomediastinal > Lungs > Musculoskeletal > Pleural, whose keyword list
//! matches; anything unmatched is Other. Matching is case-insensitive on
//! whole words, and multiword keywords ("Chest Tube") must appear as a
//! contiguous word sequence. The keyword lists live in a versioned data file
//! embedded at compile time so runs are comparable across builds.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::LazyLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const KEYWORDS_ASSET: &str = include_str!("../../assets/category_keywords_v1.json");

/// Finding category. Variant order is the matching priority order, so the
/// derived `Ord` sorts breakdown tables the same way results are decided.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    Devices,
    Cardiomediastinal,
    Lungs,
    Musculoskeletal,
    Pleural,
    Other,
}

impl Category {
    pub const ALL: [Category; 6] = [
        Category::Devices,
        Category::Cardiomediastinal,
        Category::Lungs,
        Category::Musculoskeletal,
        Category::Pleural,
        Category::Other,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Category::Devices => "Devices",
            Category::Cardiomediastinal => "Cardiomediastinal",
            Category::Lungs => "Lungs",
            Category::Musculoskeletal => "Musculoskeletal",
            Category::Pleural => "Pleural",
            Category::Other => "Other",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "Devices" => Ok(Category::Devices),
            "Cardiomediastinal" => Ok(Category::Cardiomediastinal),
            "Lungs" => Ok(Category::Lungs),
            "Musculoskeletal" => Ok(Category::Musculoskeletal),
            "Pleural" => Ok(Category::Pleural),
            "Other" => Ok(Category::Other),
            other => Err(Error::Config(format!("unknown category label {other:?}"))),
        }
    }
}

#[derive(Deserialize)]
struct KeywordFile {
    version: u32,
    priority: Vec<String>,
    #[allow(dead_code)]
    fallback: String,
    keywords: BTreeMap<String, Vec<String>>,
}

/// Priority-ordered keyword lists, each keyword pre-tokenized to lowercase words.
pub struct KeywordTable {
    version: u32,
    entries: Vec<(Category, Vec<Vec<String>>)>,
}

static DEFAULT_TABLE: LazyLock<KeywordTable> = LazyLock::new(|| {
    KeywordTable::from_json(KEYWORDS_ASSET).expect("embedded keyword table is well-formed")
});

impl KeywordTable {
    pub fn from_json(json: &str) -> Result<Self> {
        let file: KeywordFile =
            serde_json::from_str(json).map_err(|e| Error::Config(format!("keyword table: {e}")))?;
        let mut entries = Vec::new();
        for label in &file.priority {
            let category = Category::from_str(label)?;
            let raw = file
                .keywords
                .get(label)
                .ok_or_else(|| Error::Config(format!("keyword table has no list for {label}")))?;
            let keywords: Vec<Vec<String>> = raw.iter().map(|kw| word_tokens(kw)).collect();
            if keywords.iter().any(|kw| kw.is_empty()) {
                return Err(Error::Config(format!("empty keyword under {label}")));
            }
            entries.push((category, keywords));
        }
        Ok(KeywordTable {
            version: file.version,
            entries,
        })
    }

    pub fn default_table() -> &'static KeywordTable {
        &DEFAULT_TABLE
    }

    pub fn version(&self) -> u32 {
        self.version
    }

    /// First matching category in priority order; Other when nothing matches.
    pub fn categorize(&self, sentence_text: &str) -> Category {
        let words = word_tokens(sentence_text);
        for (category, keywords) in &self.entries {
            if keywords.iter().any(|kw| contains_sequence(&words, kw)) {
                return *category;
            }
        }
        Category::Other
    }
}

/// Classifies with the embedded default table.
pub fn categorize(sentence_text: &str) -> Category {
    KeywordTable::default_table().categorize(sentence_text)
}

/// Lowercase word tokens; any non-alphanumeric character separates words, so
/// "Port-a-cath" and "port a cath" tokenize identically.
fn word_tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(|w| w.to_lowercase())
        .collect()
}

fn contains_sequence(words: &[String], needle: &[String]) -> bool {
    if needle.is_empty() || words.len() < needle.len() {
        return false;
    }
    words
        .windows(needle.len())
        .any(|window| window.iter().zip(needle).all(|(a, b)| a == b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_keyword_match() {
        assert_eq!(categorize("A pacemaker is in place."), Category::Devices);
    }

    #[test]
    fn priority_order_resolves_conflicts() {
        // Devices outranks Lungs even though "clear" is a Lungs keyword.
        assert_eq!(
            categorize("PICC tip in the SVC; lungs are clear."),
            Category::Devices
        );
        // Scarring sits in both the Lungs and Pleural lists; Lungs wins.
        assert_eq!(categorize("Apical scarring noted."), Category::Lungs);
    }

    #[test]
    fn no_match_falls_through_to_other() {
        assert_eq!(categorize("Patient is rotated."), Category::Other);
        assert_eq!(categorize(""), Category::Other);
    }

    #[test]
    fn matching_is_case_insensitive_whole_word() {
        assert_eq!(categorize("CHEST TUBE in place"), Category::Devices);
        // "Scar" must not fire inside "scare-quote" style words it is not.
        assert_eq!(categorize("The scapular region"), Category::Other);
    }

    #[test]
    fn multiword_keywords_need_contiguity() {
        assert_eq!(categorize("A chest tube is present."), Category::Devices);
        // "Internal Jugular Line" only matches as a phrase; none of its words
        // is a keyword on its own.
        assert_eq!(
            categorize("Internal jugular line ends at the cavoatrial junction."),
            Category::Devices
        );
        assert_eq!(
            categorize("The internal anatomy shows a jugular contour line."),
            Category::Other
        );
    }

    #[test]
    fn hyphenated_device_matches() {
        assert_eq!(
            categorize("Port-a-Cath in stable position."),
            Category::Devices
        );
    }

    #[test]
    fn all_sentences_get_exactly_one_category() {
        for text in [
            "Mild cardiomegaly.",
            "No displaced rib fracture.",
            "Small left pleural effusion.",
            "Low lung volumes.",
            "No acute findings.",
        ] {
            let c = categorize(text);
            assert!(Category::ALL.contains(&c));
        }
    }

    #[test]
    fn default_table_is_versioned() {
        assert_eq!(KeywordTable::default_table().version(), 1);
    }
}
