//! The whole pipeline, library-side: entail → calibrate → flag → evaluate.
//!
//! Equivalent to `radguard --config fixtures/medversa.toml run-all`, but
//! driven through [`radguard::pipeline`] so the artifact paths and the
//! returned summary are visible in code. Uses the shipped fixture corpus
//! and the deterministic judge, so it runs in seconds with no network.

use radguard::config::PipelineConfig;
use radguard::evaluation::render_summary_text;
use radguard::fixtures;
use radguard::pipeline::cmd_run_all;

fn main() -> radguard::Result<()> {
    let fixtures_dir = fixtures::fixtures_dir();
    let config = PipelineConfig::load(&fixtures_dir.join("medversa.toml"))?;
    let out_dir = std::env::temp_dir().join(format!("radguard-run-{}", std::process::id()));

    let summary = cmd_run_all(&config, &out_dir, Some(&fixtures_dir))?;

    println!(
        "thresholds: lambda1 = {}, lambda2 by fraction = {:?}\n",
        summary.thresholds.lambda1, summary.thresholds.lambda2_by_fraction
    );
    print!("{}", render_summary_text(&summary.rows));

    let confusion = &summary.confusion;
    println!(
        "\nsentence confusion: caught {} / missed {} / false alarms {} / correct accepts {}",
        confusion.counts.flag_halluc,
        confusion.counts.accept_halluc,
        confusion.counts.flag_factual,
        confusion.counts.accept_factual
    );
    if let Some(precision) = confusion.precision {
        println!(
            "precision = {precision:.3}, recall = {:.3}",
            confusion.recall
        );
    }
    if let Some(agreement) = &summary.agreement {
        println!("judge/clinician agreement = {:.3}", agreement.accuracy);
    }

    let mut files: Vec<String> = std::fs::read_dir(&out_dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .collect();
    files.sort();
    println!("\nartifacts in {}: {}", out_dir.display(), files.join(", "));
    std::fs::remove_dir_all(&out_dir)?;
    Ok(())
}
