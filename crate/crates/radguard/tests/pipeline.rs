//! The command-line surface: subcommand composition, artifact contents,
//! flag overrides, exit codes, and the generation stage against a live
//! scripted service.

mod common;

use std::path::{Path, PathBuf};
use std::process::Output;

use common::FakeServer;
use radguard::calibration::Thresholds;
use radguard::config::PipelineConfig;
use radguard::fixtures::fixtures_dir;
use radguard::pipeline::{StudyFlags, Summary};

fn radguard_cmd(config: &Path, workdir: &Path, args: &[&str]) -> Output {
    std::process::Command::new(env!("CARGO_BIN_EXE_radguard"))
        .current_dir(workdir)
        .arg("--config")
        .arg(config)
        .args(args)
        .output()
        .expect("spawn radguard")
}

fn assert_success(output: &Output) -> String {
    assert!(
        output.status.success(),
        "exit {:?}\nstderr: {}",
        output.status.code(),
        String::from_utf8_lossy(&output.stderr)
    );
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn assert_exit(output: &Output, code: i32) -> String {
    let stderr = String::from_utf8_lossy(&output.stderr).into_owned();
    assert_eq!(
        output.status.code(),
        Some(code),
        "stdout: {}\nstderr: {stderr}",
        String::from_utf8_lossy(&output.stdout)
    );
    assert!(stderr.contains("error:"), "stderr: {stderr}");
    stderr
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> T {
    let text = std::fs::read_to_string(path).expect("read artifact");
    serde_json::from_str(&text).expect("parse artifact")
}

// ---------------------------------------------------------------------------
// run-all

#[test]
fn run_all_writes_every_artifact_with_calibrated_thresholds() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let stdout = assert_success(&radguard_cmd(
        &fixtures_dir().join("medversa.toml"),
        dir.path(),
        &[
            "run-all",
            "--out-dir",
            out.to_str().unwrap(),
            "--fixtures",
            fixtures_dir().to_str().unwrap(),
        ],
    ));
    assert!(stdout.contains("original"), "{stdout}");
    assert!(stdout.contains("flagged"), "{stdout}");
    assert!(stdout.contains("wrote artifacts"), "{stdout}");

    for name in [
        "scores.jsonl",
        "labels.jsonl",
        "thresholds.json",
        "flags.jsonl",
        "summary.json",
        "summary.txt",
        "config.toml",
    ] {
        assert!(out.join(name).is_file(), "missing artifact {name}");
    }

    let thresholds: Thresholds = read_json(&out.join("thresholds.json"));
    assert_eq!(thresholds.lambda1, 6);
    assert_eq!(thresholds.lambda2, 4);
    assert_eq!(thresholds.lambda2_by_fraction["0.05"], 4);
    assert_eq!(thresholds.lambda2_by_fraction["0.1"], 3);
    assert_eq!(thresholds.lambda2_by_fraction["0.25"], 2);
    assert_eq!(thresholds.calibration_size, 2000);
    assert!((thresholds.empirical_risk_at_lambda1 - 0.045).abs() < 1e-12);

    let summary: Summary = read_json(&out.join("summary.json"));
    assert_eq!(summary.thresholds, thresholds);
    assert!(
        summary.agreement.is_some(),
        "agreement inputs were supplied"
    );
    assert!(summary.baselines.is_some(), "baseline inputs were supplied");

    // The run directory describes itself: its config loads and points at the
    // corpus that produced it.
    let saved = PipelineConfig::load(&out.join("config.toml")).expect("saved config loads");
    assert_eq!(
        saved.dataset_path,
        fixtures_dir().join("medversa_corpus.jsonl")
    );
}

// ---------------------------------------------------------------------------
// Stage-by-stage composition in one working directory.

#[test]
fn stages_compose_through_default_artifact_names() {
    let dir = tempfile::tempdir().unwrap();
    let work = dir.path();
    let config = fixtures_dir().join("medversa.toml");

    assert_success(&radguard_cmd(&config, work, &["entail"]));
    assert!(work.join("scores.jsonl").is_file());
    assert!(work.join("labels.jsonl").is_file());

    let stdout = assert_success(&radguard_cmd(&config, work, &["calibrate"]));
    assert!(stdout.contains("lambda1 = 6"), "{stdout}");

    // The risk budget is a flag away: tighter alpha, lower threshold.
    assert_success(&radguard_cmd(
        &config,
        work,
        &[
            "--alpha",
            "0.02",
            "calibrate",
            "--out",
            "thresholds_tight.json",
        ],
    ));
    let tight: Thresholds = read_json(&work.join("thresholds_tight.json"));
    assert_eq!(tight.lambda1, 4);
    assert!((tight.alpha - 0.02).abs() < 1e-12);

    let stdout = assert_success(&radguard_cmd(
        &config,
        work,
        &["flag", "--emit-filtered", "filtered"],
    ));
    assert!(stdout.contains("of 508 reports"), "{stdout}");
    let flags_text = std::fs::read_to_string(work.join("flags.jsonl")).unwrap();
    let rows: Vec<StudyFlags> = flags_text
        .lines()
        .map(|line| serde_json::from_str(line).unwrap())
        .collect();
    assert_eq!(rows.len(), 508);
    assert!(rows.iter().all(|r| r.lambda1 == 6 && r.lambda2 == 4));

    // One rewritten report per study; flagged sentences are gone from it.
    let filtered = work.join("filtered");
    assert_eq!(std::fs::read_dir(&filtered).unwrap().count(), 508);
    let sample = rows
        .iter()
        .find(|r| r.flag_count > 0)
        .expect("a flagged study");
    let rewritten = std::fs::read_to_string(filtered.join(format!("{}.txt", sample.study_id)))
        .expect("rewritten report");
    for sentence in &sample.sentences {
        assert_eq!(
            rewritten.contains(&sentence.text),
            !sentence.flagged,
            "study {} sentence {}",
            sample.study_id,
            sentence.index
        );
    }

    // A lambda2 override reuses the same thresholds file.
    assert_success(&radguard_cmd(
        &config,
        work,
        &["flag", "--lambda2", "1", "--out", "flags_low.jsonl"],
    ));
    let low_text = std::fs::read_to_string(work.join("flags_low.jsonl")).unwrap();
    let low: Vec<StudyFlags> = low_text
        .lines()
        .map(|line| serde_json::from_str(line).unwrap())
        .collect();
    assert!(low.iter().all(|r| r.lambda2 == 1));
    let flagged_low = low.iter().filter(|r| r.report_flagged).count();
    let flagged_default = rows.iter().filter(|r| r.report_flagged).count();
    assert!(flagged_low > flagged_default);

    // Evaluate with the default threshold list, then a requested one.
    assert_success(&radguard_cmd(
        &config,
        work,
        &["evaluate", "--fixtures", fixtures_dir().to_str().unwrap()],
    ));
    let summary: Summary = read_json(&work.join("summary.json"));
    assert_eq!(summary.lambda2_values, vec![2, 3, 4]);
    assert!(summary.agreement.is_some());

    assert_success(&radguard_cmd(
        &config,
        work,
        &[
            "evaluate",
            "--lambda2",
            "2",
            "--json-out",
            "summary_l2.json",
        ],
    ));
    let narrow: Summary = read_json(&work.join("summary_l2.json"));
    assert_eq!(narrow.lambda2_values, vec![2]);
    assert!(narrow.agreement.is_none(), "no agreement inputs this time");
    // 1 original row + accepted/flagged at one threshold.
    assert_eq!(narrow.rows.len(), 3);
}

// ---------------------------------------------------------------------------
// sample: generation through the CLI against a live scripted service.

fn write_manifest(path: &Path) {
    let manifest = r#"{"study_id": "st-1", "image_ref": "img-1", "ground_truth": "Heart size is normal. No pleural effusion."}
{"study_id": "st-2", "image_ref": "img-2", "ground_truth": "There is a small pleural effusion. Lungs are clear."}
"#;
    std::fs::write(path, manifest).unwrap();
}

fn sample_config(dir: &Path, endpoint: &str, offline: bool) -> PathBuf {
    let text = format!(
        r#"dataset_path = "manifest.jsonl"
cache_dir = "cache"
n = 2
calibration_count = 1
seed = 5
offline = {offline}

[generation]
endpoint = "{endpoint}"
n_samples = 2
high_temperature = 1.0
timeout_secs = 10

[judge]
backend = "reference"
"#
    );
    let path = dir.join("run.toml");
    std::fs::write(&path, text).unwrap();
    path
}

/// Scripted generation model: text keyed by seed so every call is distinct
/// and reruns are exactly reproducible.
fn start_generation_server() -> FakeServer {
    FakeServer::start(|_, request| {
        let body: serde_json::Value = serde_json::from_str(&request.body).unwrap();
        let seed = body["seed"].as_u64().unwrap_or(0);
        (
            200,
            serde_json::json!({
                "text": format!("Study shows finding variant {seed} overall. No acute process.")
            })
            .to_string(),
        )
    })
}

#[test]
fn sample_generates_a_dataset_and_replays_from_cache() {
    let dir = tempfile::tempdir().unwrap();
    write_manifest(&dir.path().join("manifest.jsonl"));
    let server = start_generation_server();
    let config = sample_config(dir.path(), &server.url(), false);

    let stdout = assert_success(&radguard_cmd(&config, dir.path(), &["sample"]));
    assert!(stdout.contains("wrote 2 studies"), "{stdout}");
    assert_eq!(
        server.request_count(),
        6,
        "per study: one candidate, two samples"
    );

    let dataset = std::fs::read_to_string(dir.path().join("dataset.jsonl")).unwrap();
    assert_eq!(dataset.lines().count(), 2);
    let first: serde_json::Value = serde_json::from_str(dataset.lines().next().unwrap()).unwrap();
    assert_eq!(first["study_id"], "st-1");
    assert_eq!(first["samples"].as_array().unwrap().len(), 2);
    assert_eq!(
        first["ground_truth"]["text"],
        "Heart size is normal. No pleural effusion."
    );

    // Rerunning is pure cache: same bytes, no new requests.
    assert_success(&radguard_cmd(
        &config,
        dir.path(),
        &["sample", "--out", "dataset2.jsonl"],
    ));
    assert_eq!(server.request_count(), 6);
    let rerun = std::fs::read_to_string(dir.path().join("dataset2.jsonl")).unwrap();
    assert_eq!(rerun, dataset);

    // --offline with the warm cache reproduces it without the service.
    drop(server);
    assert_success(&radguard_cmd(
        &config,
        dir.path(),
        &["--offline", "sample", "--out", "dataset3.jsonl"],
    ));
    let offline = std::fs::read_to_string(dir.path().join("dataset3.jsonl")).unwrap();
    assert_eq!(offline, dataset);

    // The generated dataset feeds the scoring stage directly.
    let entail_config = {
        let text = r#"dataset_path = "dataset.jsonl"
cache_dir = "cache"
n = 2
calibration_count = 1
seed = 5

[generation]
endpoint = ""
n_samples = 2
high_temperature = 1.0

[judge]
backend = "reference"
"#;
        let path = dir.path().join("entail.toml");
        std::fs::write(&path, text).unwrap();
        path
    };
    let stdout = assert_success(&radguard_cmd(&entail_config, dir.path(), &["entail"]));
    assert!(
        stdout.contains("scored 4 sentences (4 labeled)"),
        "{stdout}"
    );
}

// ---------------------------------------------------------------------------
// Exit codes.

#[test]
fn unknown_config_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    std::fs::write(&config, "dataset_path = \"d.jsonl\"\nalfa = 0.05\n").unwrap();
    let stderr = assert_exit(&radguard_cmd(&config, dir.path(), &["calibrate"]), 2);
    assert!(stderr.contains("alfa"), "{stderr}");
}

#[test]
fn missing_config_file_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_exit(
        &radguard_cmd(&dir.path().join("nowhere.toml"), dir.path(), &["entail"]),
        2,
    );
}

#[test]
fn invalid_alpha_override_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let stderr = assert_exit(
        &radguard_cmd(
            &fixtures_dir().join("medversa.toml"),
            dir.path(),
            &["--alpha", "1.5", "calibrate"],
        ),
        2,
    );
    assert!(stderr.contains("alpha"), "{stderr}");
}

#[test]
fn corrupt_dataset_line_exits_3_and_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = std::fs::read_to_string(fixtures_dir().join("medversa_corpus.jsonl")).unwrap();
    let mut lines: Vec<&str> = corpus.lines().collect();
    lines[2] = "{this is not a study";
    std::fs::write(dir.path().join("corpus.jsonl"), lines.join("\n")).unwrap();
    let config = dir.path().join("run.toml");
    std::fs::write(
        &config,
        "dataset_path = \"corpus.jsonl\"\nseed = 17\ncalibration_count = 300\n\n[judge]\nbackend = \"reference\"\n",
    )
    .unwrap();

    let stderr = assert_exit(&radguard_cmd(&config, dir.path(), &["entail"]), 3);
    assert!(stderr.contains("corpus.jsonl:3:"), "{stderr}");
}

#[test]
fn sample_without_endpoint_exits_2_and_names_the_fix() {
    let dir = tempfile::tempdir().unwrap();
    write_manifest(&dir.path().join("manifest.jsonl"));
    let config = sample_config(dir.path(), "", false);
    let stderr = assert_exit(&radguard_cmd(&config, dir.path(), &["sample"]), 2);
    assert!(stderr.contains("generation.endpoint"), "{stderr}");
    assert!(stderr.contains("--offline"), "{stderr}");
}

#[test]
fn offline_sample_with_cold_cache_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    write_manifest(&dir.path().join("manifest.jsonl"));
    let config = sample_config(dir.path(), "", true);
    let stderr = assert_exit(&radguard_cmd(&config, dir.path(), &["sample"]), 4);
    assert!(stderr.contains("cache"), "{stderr}");
}

#[test]
fn offline_llm_judge_with_cold_cache_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    // Two real studies, but an LLM judge forced offline with an empty cache.
    let corpus = std::fs::read_to_string(fixtures_dir().join("medversa_corpus.jsonl")).unwrap();
    let two: Vec<&str> = corpus.lines().take(2).collect();
    std::fs::write(dir.path().join("corpus.jsonl"), two.join("\n")).unwrap();
    let config = dir.path().join("run.toml");
    std::fs::write(
        &config,
        "dataset_path = \"corpus.jsonl\"\ncache_dir = \"cache\"\ncalibration_count = 1\noffline = true\n\n[judge]\nbackend = \"llm\"\n",
    )
    .unwrap();

    let stderr = assert_exit(&radguard_cmd(&config, dir.path(), &["entail"]), 4);
    assert!(stderr.contains("cache miss"), "{stderr}");
}
