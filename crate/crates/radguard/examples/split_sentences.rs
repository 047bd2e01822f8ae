//! Sentence segmentation on radiology-report text.
//!
//! Clinical prose is hostile to naive `split('.')`: it is full of
//! abbreviations ("Dr.", "a.p.", "e.g."), decimal measurements ("3.2 cm"),
//! and numbered lists ("1. No effusion."). The splitter keeps those intact
//! and only breaks on terminal punctuation followed by a plausible sentence
//! start.

use radguard::corpus::split_sentences;

fn main() {
    let report = "FINDINGS: Heart size is normal. There is a 3.2 cm nodule in the r.l.l. \
                  projecting over the 4th rib. Dr. Harding reviewed the prior study from 1.2.2024; \
                  no interval change. IMPRESSION: 1. Stable nodule. 2. No acute disease.";

    println!("input:\n  {report}\n");
    println!("sentences:");
    for (i, sentence) in split_sentences(report).iter().enumerate() {
        println!("  [{i}] {sentence}");
    }
}
