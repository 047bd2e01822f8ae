//! Run configuration.
//!
//! One TOML (or JSON) file drives every pipeline stage, so a run is
//! reproducible from the config plus the dataset plus the caches. Relative
//! paths are resolved against the directory containing the config file, not
//! the process working directory; a resolved copy is written next to the
//! outputs of each run and loads back equal to the config that produced it.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::calibration::BoundFormula;
use crate::entailment::JudgeConfig;
use crate::error::{Error, Result};
use crate::flagging::ReportRule;
use crate::fsio::atomic_write;
use crate::genclient::GenerationConfig;

/// Which entailment backend judges sentences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum JudgeBackendKind {
    /// HTTP judge service with verdict caching. The production setting.
    #[default]
    Llm,
    /// Deterministic rule-based judge; hermetic, no network, no cache.
    Reference,
}

/// Judge section of the config file. Mirrors [`JudgeConfig`] plus the
/// backend selector; cache directory and offline flag live at the top level
/// and are folded in by [`PipelineConfig::judge_config`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JudgeSection {
    pub backend: JudgeBackendKind,
    pub endpoint: Option<String>,
    pub model_name: String,
    pub prompt_version: String,
    pub max_parallel: usize,
    pub retry_limit: u32,
    pub timeout_secs: u64,
}

impl Default for JudgeSection {
    fn default() -> Self {
        let base = JudgeConfig::default();
        JudgeSection {
            backend: JudgeBackendKind::default(),
            endpoint: base.endpoint,
            model_name: base.model_name,
            prompt_version: base.prompt_version,
            max_parallel: base.max_parallel,
            retry_limit: base.retry_limit,
            timeout_secs: base.timeout_secs,
        }
    }
}

/// Complete run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Dataset file: one JSON study per line. For `sample` this may instead
    /// be a manifest of image references to generate from.
    pub dataset_path: PathBuf,
    /// Root for generation and judge caches.
    #[serde(default = "default_cache_dir")]
    pub cache_dir: PathBuf,
    /// Miss-risk budget for sentence-threshold selection.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Samples per study; also the top of the score range.
    #[serde(default = "default_n")]
    pub n: u32,
    /// Studies assigned to the calibration split; the rest are test.
    #[serde(default = "default_calibration_count")]
    pub calibration_count: usize,
    /// Seed for the calibration/test permutation.
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Target flagged-report fractions for the report-threshold sweep. The
    /// first entry decides the headline lambda2.
    #[serde(default = "default_lambda2_fractions")]
    pub lambda2_fractions: Vec<f64>,
    /// Risk-bound variant for threshold selection.
    #[serde(default)]
    pub formula_variant: BoundFormula,
    /// Report flag rule: h >= lambda2 (default) or h > lambda2.
    #[serde(default)]
    pub report_rule: ReportRule,
    /// Never touch the network; caches must already hold every answer.
    #[serde(default)]
    pub offline: bool,
    #[serde(default)]
    pub generation: GenerationConfig,
    #[serde(default)]
    pub judge: JudgeSection,
}

fn default_cache_dir() -> PathBuf {
    PathBuf::from(".radguard-cache")
}

fn default_alpha() -> f64 {
    0.05
}

fn default_n() -> u32 {
    10
}

fn default_calibration_count() -> usize {
    300
}

fn default_seed() -> u64 {
    7
}

fn default_lambda2_fractions() -> Vec<f64> {
    vec![0.05, 0.10, 0.25]
}

impl PipelineConfig {
    /// A config pointing at `dataset_path` with every other field default.
    pub fn with_dataset(dataset_path: impl Into<PathBuf>) -> Self {
        PipelineConfig {
            dataset_path: dataset_path.into(),
            cache_dir: default_cache_dir(),
            alpha: default_alpha(),
            n: default_n(),
            calibration_count: default_calibration_count(),
            seed: default_seed(),
            lambda2_fractions: default_lambda2_fractions(),
            formula_variant: BoundFormula::default(),
            report_rule: ReportRule::default(),
            offline: false,
            generation: GenerationConfig::default(),
            judge: JudgeSection::default(),
        }
    }

    /// Loads a config file (TOML, or JSON for a `.json` path), resolves
    /// relative paths against the file's directory, and validates.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::ConfigFile {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let mut config: PipelineConfig = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| Error::ConfigFile {
                path: path.to_path_buf(),
                message: e.to_string(),
            })?
        } else {
            toml::from_str(&text).map_err(|e| Error::ConfigFile {
                path: path.to_path_buf(),
                message: e.to_string(),
            })?
        };
        if let Some(parent) = path.parent() {
            config.resolve_against(parent);
        }
        config.validate()?;
        Ok(config)
    }

    /// Rewrites relative paths to be relative to `base`.
    pub fn resolve_against(&mut self, base: &Path) {
        if self.dataset_path.is_relative() {
            self.dataset_path = base.join(&self.dataset_path);
        }
        if self.cache_dir.is_relative() {
            self.cache_dir = base.join(&self.cache_dir);
        }
    }

    /// Writes the config as TOML. Loading the written file back yields an
    /// equal config, which is what makes run directories self-describing.
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = toml::to_string_pretty(self)
            .map_err(|e| Error::Config(format!("config does not serialize: {e}")))?;
        atomic_write(path, text.as_bytes())
    }

    pub fn validate(&self) -> Result<()> {
        if self.dataset_path.as_os_str().is_empty() {
            return Err(Error::Config("dataset_path must be set".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!(
                "alpha must be in (0, 1), got {}",
                self.alpha
            )));
        }
        if self.n == 0 {
            return Err(Error::Config("n must be at least 1".into()));
        }
        if self.calibration_count == 0 {
            return Err(Error::Config("calibration_count must be at least 1".into()));
        }
        if self.lambda2_fractions.is_empty() {
            return Err(Error::Config("lambda2_fractions must not be empty".into()));
        }
        for &f in &self.lambda2_fractions {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::Config(format!(
                    "lambda2 target fraction must be in (0, 1), got {f}"
                )));
            }
        }
        if self.generation.n_samples != self.n as usize {
            return Err(Error::Config(format!(
                "n = {} but generation.n_samples = {}; set both to the same value",
                self.n, self.generation.n_samples
            )));
        }
        self.generation.validate()?;
        if self.judge.max_parallel == 0 {
            return Err(Error::Config(
                "judge.max_parallel must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Folds the judge section, cache root, and offline flag into the
    /// settings the LLM judge takes. Only meaningful when
    /// `judge.backend == JudgeBackendKind::Llm`.
    pub fn judge_config(&self) -> JudgeConfig {
        JudgeConfig {
            endpoint: self.judge.endpoint.clone(),
            model_name: self.judge.model_name.clone(),
            prompt_version: self.judge.prompt_version.clone(),
            max_parallel: self.judge.max_parallel,
            cache_dir: Some(self.cache_dir.join("judge")),
            offline: self.offline,
            retry_limit: self.judge.retry_limit,
            timeout_secs: self.judge.timeout_secs,
        }
    }

    /// Generation cache directory under the cache root.
    pub fn generation_cache_dir(&self) -> PathBuf {
        self.cache_dir.join("generation")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_toml_fills_defaults() {
        let config: PipelineConfig = toml::from_str("dataset_path = \"data.jsonl\"").unwrap();
        assert_eq!(config.alpha, 0.05);
        assert_eq!(config.n, 10);
        assert_eq!(config.calibration_count, 300);
        assert_eq!(config.lambda2_fractions, vec![0.05, 0.10, 0.25]);
        assert_eq!(config.judge.backend, JudgeBackendKind::Llm);
        assert!(!config.offline);
        config.validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err =
            toml::from_str::<PipelineConfig>("dataset_path = \"d\"\nalfa = 0.05\n").unwrap_err();
        assert!(err.to_string().contains("alfa"));
    }

    #[test]
    fn save_load_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = PipelineConfig::with_dataset(dir.path().join("corpus.jsonl"));
        config.cache_dir = dir.path().join("cache");
        config.alpha = 0.02;
        config.seed = 99;
        config.judge.backend = JudgeBackendKind::Reference;
        config.lambda2_fractions = vec![0.1, 0.25];
        let path = dir.path().join("run.toml");
        config.save(&path).unwrap();
        let reloaded = PipelineConfig::load(&path).unwrap();
        assert_eq!(reloaded, config);
    }

    #[test]
    fn json_configs_load_too() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        std::fs::write(&path, r#"{"dataset_path": "corpus.jsonl", "alpha": 0.1}"#).unwrap();
        let config = PipelineConfig::load(&path).unwrap();
        assert_eq!(config.alpha, 0.1);
        assert_eq!(config.dataset_path, dir.path().join("corpus.jsonl"));
    }

    #[test]
    fn relative_paths_resolve_against_config_dir() {
        let dir = tempfile::tempdir().unwrap();
        let sub = dir.path().join("configs");
        std::fs::create_dir_all(&sub).unwrap();
        let path = sub.join("run.toml");
        std::fs::write(
            &path,
            "dataset_path = \"../corpus.jsonl\"\ncache_dir = \"cache\"\n",
        )
        .unwrap();
        let config = PipelineConfig::load(&path).unwrap();
        assert_eq!(config.dataset_path, sub.join("../corpus.jsonl"));
        assert_eq!(config.cache_dir, sub.join("cache"));
    }

    #[test]
    fn validation_rejects_bad_alpha_and_fractions() {
        let mut config = PipelineConfig::with_dataset("d.jsonl");
        config.alpha = 0.0;
        assert!(config.validate().is_err());
        config.alpha = 1.0;
        assert!(config.validate().is_err());
        config.alpha = 0.05;
        config.lambda2_fractions = vec![0.5, 1.0];
        assert!(config.validate().is_err());
        config.lambda2_fractions = vec![];
        assert!(config.validate().is_err());
    }

    #[test]
    fn sample_count_must_agree_with_generation_section() {
        let mut config = PipelineConfig::with_dataset("d.jsonl");
        config.n = 12;
        let err = config.validate().unwrap_err();
        assert!(err.to_string().contains("n_samples"));
        config.generation.n_samples = 12;
        config.validate().unwrap();
    }

    #[test]
    fn judge_config_inherits_cache_root_and_offline() {
        let mut config = PipelineConfig::with_dataset("d.jsonl");
        config.cache_dir = PathBuf::from("/tmp/rg");
        config.offline = true;
        let judge = config.judge_config();
        assert_eq!(judge.cache_dir, Some(PathBuf::from("/tmp/rg/judge")));
        assert!(judge.offline);
    }
}
