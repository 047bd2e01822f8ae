//! HTTP judge backend with verdict caching and one repair round.
//!
//! The judge service receives `POST {"model": ..., "prompt": ...}` and must
//! answer with the JSON object the prompt asked for — the E/P/N partition
//! for batch calls, `{"status": ...}` for ground-truth calls. A response
//! that fails validation triggers exactly one repair re-prompt carrying the
//! validation error; a second failure surfaces as a backend error holding
//! the raw response.
//!
//! Verdicts are cached under a digest of (call kind, prompt version, model,
//! sentence text, ordered report texts), so a warm cache replays a whole
//! run without network access (`offline`) and concurrent workers can share
//! one directory: writes are atomic per key and double work is harmless.
//! If the service requires credentials, set RADGUARD_JUDGE_TOKEN; it is sent
//! as a bearer token.

use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fsio::atomic_write;

use super::prompts::{
    parse_batch_response, parse_status_response, render_batch_prompt, render_ground_truth_prompt,
    PROMPT_VERSION,
};
use super::{JudgeBackend, Verdict};

pub const JUDGE_TOKEN_ENV: &str = "RADGUARD_JUDGE_TOKEN";

/// Connection settings for the HTTP judge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeConfig {
    /// Judge service URL. May be absent in offline mode with a warm cache.
    pub endpoint: Option<String>,
    pub model_name: String,
    /// Stamped into cache keys; this build embeds prompt assets v1.
    pub prompt_version: String,
    /// Concurrent in-flight judge calls across sentences.
    pub max_parallel: usize,
    /// Verdict cache directory; None disables caching.
    pub cache_dir: Option<PathBuf>,
    /// When set, never touch the network; cache misses are errors.
    pub offline: bool,
    /// Transport retries per call beyond the first attempt.
    pub retry_limit: u32,
    pub timeout_secs: u64,
}

impl Default for JudgeConfig {
    fn default() -> Self {
        JudgeConfig {
            endpoint: None,
            model_name: "judge".into(),
            prompt_version: PROMPT_VERSION.into(),
            max_parallel: 4,
            cache_dir: None,
            offline: false,
            retry_limit: 2,
            timeout_secs: 120,
        }
    }
}

#[derive(Serialize)]
struct JudgeRequest<'a> {
    model: &'a str,
    prompt: &'a str,
}

#[derive(Serialize, Deserialize)]
struct CachedVerdicts {
    verdicts: Vec<Verdict>,
}

/// Judge backend that calls an HTTP service.
pub struct LlmJudge {
    config: JudgeConfig,
    client: reqwest::blocking::Client,
}

impl LlmJudge {
    pub fn new(config: JudgeConfig) -> Result<Self> {
        if config.endpoint.is_none() && !config.offline {
            return Err(Error::Config(
                "llm judge needs judge.endpoint, or offline mode with a warm judge cache".into(),
            ));
        }
        if config.offline && config.cache_dir.is_none() {
            return Err(Error::Config(
                "offline llm judge needs judge.cache_dir to replay from".into(),
            ));
        }
        if let Some(dir) = &config.cache_dir {
            std::fs::create_dir_all(dir)?;
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| Error::Config(format!("http client: {e}")))?;
        Ok(LlmJudge { config, client })
    }

    fn cache_key(&self, kind: &str, sentence: &str, reports: &[&str]) -> String {
        let mut hasher = Sha256::new();
        let payload = serde_json::to_vec(&(
            kind,
            &self.config.prompt_version,
            &self.config.model_name,
            sentence,
            reports,
        ))
        .expect("cache key serializes");
        hasher.update(&payload);
        format!("{:x}", hasher.finalize())
    }

    fn cache_get(&self, key: &str) -> Option<Vec<Verdict>> {
        let dir = self.config.cache_dir.as_ref()?;
        let raw = std::fs::read_to_string(dir.join(format!("{key}.json"))).ok()?;
        serde_json::from_str::<CachedVerdicts>(&raw)
            .ok()
            .map(|c| c.verdicts)
    }

    fn cache_put(&self, key: &str, verdicts: &[Verdict]) -> Result<()> {
        if let Some(dir) = &self.config.cache_dir {
            let body = serde_json::to_vec_pretty(&CachedVerdicts {
                verdicts: verdicts.to_vec(),
            })?;
            atomic_write(&dir.join(format!("{key}.json")), &body)?;
        }
        Ok(())
    }

    fn call(&self, prompt: &str) -> Result<String> {
        let endpoint = self
            .config
            .endpoint
            .as_ref()
            .ok_or_else(|| Error::Config("llm judge has no endpoint configured".into()))?;
        let attempts = self.config.retry_limit + 1;
        let mut last_error = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(200 << (attempt - 1).min(4)));
            }
            let mut request = self.client.post(endpoint).json(&JudgeRequest {
                model: &self.config.model_name,
                prompt,
            });
            if let Ok(token) = std::env::var(JUDGE_TOKEN_ENV) {
                request = request.bearer_auth(token);
            }
            match request.send() {
                Ok(response) if response.status().is_success() => {
                    return response.text().map_err(|e| Error::Transport {
                        endpoint: endpoint.clone(),
                        attempts: attempt + 1,
                        message: format!("reading body: {e}"),
                    });
                }
                Ok(response) => {
                    last_error = format!("http status {}", response.status());
                    // Client errors are not going to improve on retry.
                    if response.status().is_client_error() {
                        break;
                    }
                }
                Err(e) => last_error = e.to_string(),
            }
        }
        Err(Error::Transport {
            endpoint: endpoint.clone(),
            attempts,
            message: last_error,
        })
    }

    /// First exchange plus at most one repair round, sharing the
    /// parse-validate-repair shape between batch and status calls.
    fn call_with_repair<T>(
        &self,
        prompt: &str,
        parse: impl Fn(&str) -> std::result::Result<T, String>,
    ) -> Result<T> {
        let raw = self.call(prompt)?;
        let problem = match parse(&raw) {
            Ok(value) => return Ok(value),
            Err(problem) => problem,
        };
        log::warn!("judge response failed validation ({problem}); sending repair prompt");
        let repair_prompt = format!(
            "{prompt}\n\nYour previous response was invalid: {problem}\nPrevious response:\n{raw}\nReturn only the corrected json."
        );
        let raw = self.call(&repair_prompt)?;
        parse(&raw).map_err(|message| Error::JudgeResponse { message, raw })
    }
}

impl JudgeBackend for LlmJudge {
    fn judge_batch(&self, sentence_text: &str, sample_texts: &[&str]) -> Result<Vec<Verdict>> {
        let key = self.cache_key("batch", sentence_text, sample_texts);
        if let Some(verdicts) = self.cache_get(&key) {
            if verdicts.len() == sample_texts.len() {
                return Ok(verdicts);
            }
        }
        if self.config.offline {
            return Err(Error::JudgeCacheMiss {
                sentence: sentence_text.to_string(),
            });
        }
        let prompt = render_batch_prompt(sentence_text, sample_texts);
        let n = sample_texts.len();
        let verdicts = self.call_with_repair(&prompt, |raw| parse_batch_response(raw, n))?;
        self.cache_put(&key, &verdicts)?;
        Ok(verdicts)
    }

    fn judge_single(&self, sentence_text: &str, report_text: &str) -> Result<Verdict> {
        let key = self.cache_key("single", sentence_text, &[report_text]);
        if let Some(verdicts) = self.cache_get(&key) {
            if let Some(&verdict) = verdicts.first() {
                return Ok(verdict);
            }
        }
        if self.config.offline {
            return Err(Error::JudgeCacheMiss {
                sentence: sentence_text.to_string(),
            });
        }
        let prompt = render_ground_truth_prompt(sentence_text, report_text);
        let verdict = self.call_with_repair(&prompt, parse_status_response)?;
        self.cache_put(&key, &[verdict])?;
        Ok(verdict)
    }

    fn name(&self) -> &'static str {
        "llm"
    }
}
