//! Crate-wide error type.
//!
//! Every failure is classified into one of three buckets so the CLI can map
//! it to a stable exit code: configuration problems (exit 2), data problems
//! (exit 3), and judge/generation backend problems (exit 4).

use std::path::PathBuf;

use thiserror::Error;

/// Coarse failure class, used by the binary to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureClass {
    /// Bad or inconsistent configuration / flags.
    Config,
    /// Malformed or inconsistent input data / artifacts.
    Data,
    /// A generation or judge service misbehaved (transport, bad payload).
    Backend,
}

#[derive(Debug, Error)]
pub enum Error {
    // --- configuration ---
    #[error("config: {0}")]
    Config(String),

    #[error("config file {path}: {message}")]
    ConfigFile { path: PathBuf, message: String },

    // --- dataset / corpus ---
    #[error("{path}:{line}: malformed dataset record: {message}")]
    MalformedRecord {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("study {study_id}: expected {expected} samples, found {found}")]
    SampleCount {
        study_id: String,
        expected: usize,
        found: usize,
    },

    #[error("duplicate study id {study_id}")]
    DuplicateStudy { study_id: String },

    #[error("calibration split of {requested} requested but the dataset has {available} studies")]
    SplitOutOfRange { requested: usize, available: usize },

    #[error("study {study_id} has no ground-truth report")]
    MissingGroundTruth { study_id: String },

    #[error("study {study_id} has no usable samples (all generations empty)")]
    NoUsableSamples { study_id: String },

    #[error("sentence records do not line up: {message}")]
    Misaligned { message: String },

    #[error("report {study_id} has no token probabilities")]
    MissingLogprobs { study_id: String },

    #[error("report {study_id}: {message}")]
    InvalidProbability { study_id: String, message: String },

    #[error("decisions span multiple studies: {first} and {second}")]
    MixedStudies { first: String, second: String },

    #[error("no sentence decisions supplied")]
    EmptyDecisions,

    #[error("{path}: {message}")]
    Artifact { path: PathBuf, message: String },

    // --- calibration ---
    #[error("empty calibration set")]
    EmptyCalibration,

    #[error(
        "calibration set too small for this alpha: with {c} points the risk bound is at least \
         {floor:.6} even when nothing is flagged, which exceeds alpha = {alpha}"
    )]
    CalibrationInfeasible { alpha: f64, c: usize, floor: f64 },

    // --- generation / judge backends ---
    #[error("generation service returned an empty candidate for study {study_id}")]
    EmptyCandidate { study_id: String },

    #[error(
        "generation cache miss for {description}; rerun without --offline to populate the cache"
    )]
    CacheMiss { description: String },

    #[error(
        "judge cache miss for sentence {sentence:?}; rerun without --offline to populate the cache"
    )]
    JudgeCacheMiss { sentence: String },

    #[error("transport failure after {attempts} attempts against {endpoint}: {message}")]
    Transport {
        endpoint: String,
        attempts: u32,
        message: String,
    },

    #[error("judge returned an unusable response after one repair attempt: {message}\nraw response: {raw}")]
    JudgeResponse { message: String, raw: String },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Which exit-code bucket this error belongs to.
    pub fn class(&self) -> FailureClass {
        use Error::*;
        match self {
            Config(_) | ConfigFile { .. } => FailureClass::Config,
            MalformedRecord { .. }
            | SampleCount { .. }
            | DuplicateStudy { .. }
            | SplitOutOfRange { .. }
            | MissingGroundTruth { .. }
            | NoUsableSamples { .. }
            | Misaligned { .. }
            | MissingLogprobs { .. }
            | InvalidProbability { .. }
            | MixedStudies { .. }
            | EmptyDecisions
            | Artifact { .. }
            | EmptyCalibration
            | CalibrationInfeasible { .. }
            | Io(_)
            | Json(_)
            | Csv(_) => FailureClass::Data,
            EmptyCandidate { .. }
            | CacheMiss { .. }
            | JudgeCacheMiss { .. }
            | Transport { .. }
            | JudgeResponse { .. } => FailureClass::Backend,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
