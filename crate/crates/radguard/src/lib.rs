//! Sampling-based hallucination flagging for generated radiology reports,
//! with a distribution-free guarantee on the rate of missed hallucinations.
//!
//! The method scores each sentence of a low-temperature **candidate** report
//! by how many of `n` high-temperature **samples** from the same model entail
//! it: score `E(s) = #completely entailed + #partially entailed ∈ [0, n]`.
//! A sentence is flagged when its score falls below a threshold λ₁, and a
//! report is flagged when at least λ₂ of its sentences are. λ₁ is not picked
//! by eye: given a calibration split with reference labels (a sentence counts
//! as factual only when the reference report *completely* entails it), the
//! empirical miss risk
//!
//! ```text
//! L_c(λ) = mean over calibration sentences of [score < λ] · entailed
//! ```
//!
//! is wrapped in the conformal-risk bound `B(λ) = (c/(c+1))·L_c(λ) + 1/(c+1)`
//! over `c` calibration points, and λ₁ is the largest grid value with
//! `B(λ) ≤ α`. That choice controls the expected fraction of factual
//! sentences among the flagged ones on exchangeable test data.
//!
//! The crate is organized as a small library with one thin command-line
//! binary; the `examples/` directory is the primary tour of the API:
//!
//! * [`corpus`] — dataset records, sentence tokenization, finding categories,
//!   deterministic calibration/test splits.
//! * [`genclient`] — HTTP client for a report-generation service plus a
//!   content-addressed replay cache.
//! * [`entailment`] — judge backends (LLM-over-HTTP and a deterministic
//!   lexical reference judge), prompt templates, scores and labels.
//! * [`calibration`] — risk bound, λ₁ selection, λ₂ sweeps.
//! * [`flagging`] — applying thresholds to sentences and reports, and
//!   rewriting reports with flagged sentences removed.
//! * [`evaluation`] — confusion counts, per-category breakdowns,
//!   judge-vs-clinician agreement, token-probability baselines, summary
//!   tables.
//! * [`config`] — the one file that drives a run.
//! * [`pipeline`] — the end-to-end stages behind the CLI subcommands.
//! * [`fixtures`] — deterministic synthetic datasets used by the test suite
//!   and the examples.

pub mod calibration;
pub mod config;
pub mod corpus;
pub mod entailment;
pub mod error;
pub mod evaluation;
pub mod fixtures;
pub mod flagging;
mod fsio;
pub mod genclient;
pub mod pipeline;

pub use error::{Error, FailureClass, Result};
