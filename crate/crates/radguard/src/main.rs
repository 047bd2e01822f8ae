//! Thin command-line wrapper over [`radguard::pipeline`].
//!
//! Every stage is a subcommand that reads and writes files, so partial
//! reruns compose: `entail` once, then `calibrate` at several alphas, then
//! `flag`/`evaluate` as needed. Exit codes: 0 success, 2 configuration
//! error, 3 data error, 4 generation/judge backend error. Set RUST_LOG=info
//! for per-stage progress and RADGUARD_JUDGE_TOKEN for judge credentials.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use radguard::config::PipelineConfig;
use radguard::evaluation::render_summary_text;
use radguard::pipeline;
use radguard::FailureClass;

#[derive(Parser)]
#[command(
    name = "radguard",
    version,
    about = "Sampling-based hallucination detection for generated radiology reports"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration file (TOML, or JSON with a .json extension).
    #[arg(long, global = true, default_value = "radguard.toml")]
    config: PathBuf,

    /// Never touch the network; caches must already hold every answer.
    #[arg(long, global = true)]
    offline: bool,

    /// Override the configured sentence-level miss-risk budget.
    #[arg(long, global = true, value_name = "RISK")]
    alpha: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the candidate and n samples for every manifest study.
    Sample {
        /// Where the generated dataset JSONL goes.
        #[arg(long, default_value = "dataset.jsonl")]
        out: PathBuf,
    },

    /// Score every candidate sentence against its study's samples and label
    /// it against the ground truth.
    Entail {
        #[arg(long, default_value = "scores.jsonl")]
        scores: PathBuf,
        #[arg(long, default_value = "labels.jsonl")]
        labels: PathBuf,
    },

    /// Select the sentence threshold under the risk budget and sweep the
    /// report threshold on the calibration split.
    Calibrate {
        #[arg(long, default_value = "scores.jsonl")]
        scores: PathBuf,
        #[arg(long, default_value = "labels.jsonl")]
        labels: PathBuf,
        #[arg(long, default_value = "thresholds.json")]
        out: PathBuf,
    },

    /// Apply the calibrated thresholds to every scored study.
    Flag {
        #[arg(long, default_value = "scores.jsonl")]
        scores: PathBuf,
        #[arg(long, default_value = "thresholds.json")]
        thresholds: PathBuf,
        #[arg(long, default_value = "flags.jsonl")]
        out: PathBuf,
        /// Override the calibrated report threshold.
        #[arg(long)]
        lambda2: Option<u32>,
        /// Also write each candidate with its flagged sentences removed
        /// into this directory, one <study_id>.txt per report.
        #[arg(long, value_name = "DIR")]
        emit_filtered: Option<PathBuf>,
    },

    /// Summarize flag quality on the test split.
    Evaluate {
        #[arg(long, default_value = "scores.jsonl")]
        scores: PathBuf,
        #[arg(long, default_value = "labels.jsonl")]
        labels: PathBuf,
        #[arg(long, default_value = "thresholds.json")]
        thresholds: PathBuf,
        /// Report thresholds to tabulate, comma separated. Defaults to
        /// every swept value in the thresholds file.
        #[arg(long, value_delimiter = ',')]
        lambda2: Option<Vec<u32>>,
        /// Directory holding auxiliary evaluation inputs
        /// (agreement_labels.csv, entropy_baseline.json).
        #[arg(long, value_name = "DIR")]
        fixtures: Option<PathBuf>,
        /// Clinician-label CSV for judge agreement; wins over --fixtures.
        #[arg(long, value_name = "CSV")]
        clinician_csv: Option<PathBuf>,
        #[arg(long, default_value = "summary.json")]
        json_out: PathBuf,
        #[arg(long, default_value = "summary.txt")]
        text_out: PathBuf,
    },

    /// Run entail, calibrate, flag, and evaluate into one directory.
    RunAll {
        #[arg(long, default_value = "radguard-out")]
        out_dir: PathBuf,
        /// Directory holding auxiliary evaluation inputs, as for evaluate.
        #[arg(long, value_name = "DIR")]
        fixtures: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> radguard::Result<()> {
    let mut config = PipelineConfig::load(&cli.common.config)?;
    if cli.common.offline {
        config.offline = true;
    }
    if let Some(alpha) = cli.common.alpha {
        config.alpha = alpha;
    }
    config.validate()?;

    match cli.command {
        Command::Sample { out } => {
            let n = pipeline::cmd_sample(&config, &out)?;
            println!("wrote {n} studies to {}", out.display());
        }
        Command::Entail { scores, labels } => {
            let (n_scores, n_labels) = pipeline::cmd_entail(&config, &scores, &labels)?;
            println!(
                "scored {n_scores} sentences ({n_labels} labeled) into {} and {}",
                scores.display(),
                labels.display()
            );
        }
        Command::Calibrate {
            scores,
            labels,
            out,
        } => {
            let t = pipeline::cmd_calibrate(&config, &scores, &labels, &out)?;
            println!(
                "lambda1 = {}, lambda2 = {} (risk {:.4} over {} sentences) -> {}",
                t.lambda1,
                t.lambda2,
                t.empirical_risk_at_lambda1,
                t.calibration_size,
                out.display()
            );
        }
        Command::Flag {
            scores,
            thresholds,
            out,
            lambda2,
            emit_filtered,
        } => {
            let (total, flagged) = pipeline::cmd_flag(
                &config,
                &scores,
                &thresholds,
                &out,
                lambda2,
                emit_filtered.as_deref(),
            )?;
            println!("flagged {flagged} of {total} reports -> {}", out.display());
        }
        Command::Evaluate {
            scores,
            labels,
            thresholds,
            lambda2,
            fixtures,
            clinician_csv,
            json_out,
            text_out,
        } => {
            let summary = pipeline::cmd_evaluate(
                &config,
                &scores,
                &labels,
                &thresholds,
                lambda2.as_deref(),
                fixtures.as_deref(),
                clinician_csv.as_deref(),
                &json_out,
                &text_out,
            )?;
            print!("{}", render_summary_text(&summary.rows));
            println!("wrote {} and {}", json_out.display(), text_out.display());
        }
        Command::RunAll { out_dir, fixtures } => {
            let summary = pipeline::cmd_run_all(&config, &out_dir, fixtures.as_deref())?;
            print!("{}", render_summary_text(&summary.rows));
            println!("wrote artifacts to {}", out_dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.class() {
                FailureClass::Config => 2,
                FailureClass::Data => 3,
                FailureClass::Backend => 4,
            })
        }
    }
}
