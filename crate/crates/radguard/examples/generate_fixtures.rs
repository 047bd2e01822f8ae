//! Regenerates every file under the crate's `fixtures/` directory.
//!
//! The generator designs score/label distributions so the full pipeline
//! lands on known round numbers, re-runs the library over the data, and
//! asserts every target before writing a single file — so a successful run
//! doubles as an end-to-end arithmetic check. Pass a directory to write
//! somewhere else (the guard test does this to diff against the committed
//! files).
//!
//! ```text
//! cargo run --example generate_fixtures [-- <dir>]
//! ```

use radguard::fixtures;

fn main() -> radguard::Result<()> {
    let dir = match std::env::args_os().nth(1) {
        Some(arg) => std::path::PathBuf::from(arg),
        None => fixtures::fixtures_dir(),
    };
    fixtures::generate_all(&dir)?;
    let mut names: Vec<String> = std::fs::read_dir(&dir)?
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            let meta = e.metadata().ok()?;
            meta.is_file().then(|| {
                format!(
                    "  {} ({} bytes)",
                    e.file_name().to_string_lossy(),
                    meta.len()
                )
            })
        })
        .collect();
    names.sort();
    println!("regenerated {} files in {}:", names.len(), dir.display());
    for name in names {
        println!("{name}");
    }
    Ok(())
}
