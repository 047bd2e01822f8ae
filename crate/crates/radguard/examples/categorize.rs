//! Keyword-based finding categories, including the priority rules.
//!
//! Each sentence lands in exactly one of six categories. Keyword tables are
//! checked in a fixed priority order — Devices before Cardiomediastinal
//! before Lungs before Musculoskeletal before Pleural before Other — so a
//! sentence mentioning both a pacemaker and cardiomegaly counts as Devices,
//! and "chest tube in place, no residual pneumothorax" counts as Devices
//! rather than Pleural. Matching is whole-word and case-insensitive:
//! "scarring" must not fire the "scar" keyword unless the table says so.

use radguard::corpus::{categorize, Category};

fn main() {
    let sentences = [
        "There is mild cardiomegaly.",
        "A right pleural effusion is present.",
        "Patchy consolidation in the left lower lobe.",
        "Endotracheal tube terminates 4 cm above the carina.",
        "A pacemaker overlies an enlarged cardiac silhouette.",
        "Chest tube in place with no residual pneumothorax.",
        "Old rib fractures are noted on the right.",
        "Degenerative changes of the thoracic spine.",
        "Patient rotation limits evaluation.",
    ];

    println!("{:<58} category", "sentence");
    for text in sentences {
        println!("{text:<58} {:?}", categorize(text));
    }

    println!("\nall categories, in priority order:");
    for category in Category::ALL {
        println!("  {category:?}");
    }
}
