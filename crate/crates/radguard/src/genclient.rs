//! Client for an opaque report-generation service.
//!
//! For each study the pipeline needs one low-temperature **candidate** report
//! and `n` high-temperature **sample** reports from the same model. The model
//! itself is a black box behind a minimal wire protocol:
//!
//! ```text
//! POST <endpoint>   {"image_ref": ..., "temperature": ..., "seed": ...?}
//!   →               {"text": ..., "token_logprobs": ...?, "token_distributions": ...?}
//! ```
//!
//! Every successful response is persisted to a content-addressed cache keyed
//! by `(endpoint, image_ref, temperature, sample_index, seed)` — index 0 is
//! the candidate, 1..=n the samples — so a populated cache replays a study
//! byte-for-byte with zero network calls. Failed generations are *not*
//! cached: a sample that fails after retries is recorded as an empty slot in
//! the study (and excluded from scoring denominators downstream), while a
//! failed candidate is a hard error, since nothing downstream can run
//! without it.
//!
//! Seeds: requests carry an optional seed, recorded in the cache key, so a
//! deterministic service replays exactly and a nondeterministic one simply
//! ignores it. From a base seed `b`, the candidate is issued seed `b` and
//! sample at index `j` gets `b + j`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::OnceLock;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{probe_probabilities, Report, ReportKind, Study};
use crate::error::{Error, Result};
use crate::fsio::atomic_write;

/// One generation call, before the per-call temperature/seed/index are fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub study_id: String,
    /// Service-side identifier for the input image; opaque to this crate.
    pub image_ref: String,
    pub temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// Knobs for one model's generation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub endpoint: String,
    #[serde(default = "default_low_temperature")]
    pub low_temperature: f64,
    pub high_temperature: f64,
    #[serde(default = "default_n_samples")]
    pub n_samples: usize,
    #[serde(default = "default_max_parallel")]
    pub max_parallel: usize,
    #[serde(default = "default_retry_limit")]
    pub retry_limit: u32,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
}

fn default_low_temperature() -> f64 {
    0.1
}
fn default_n_samples() -> usize {
    10
}
fn default_max_parallel() -> usize {
    4
}
fn default_retry_limit() -> u32 {
    2
}
fn default_timeout_secs() -> u64 {
    120
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            endpoint: String::new(),
            low_temperature: default_low_temperature(),
            high_temperature: 1.0,
            n_samples: default_n_samples(),
            max_parallel: default_max_parallel(),
            retry_limit: default_retry_limit(),
            timeout_secs: default_timeout_secs(),
        }
    }
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.low_temperature < 0.0 || !self.low_temperature.is_finite() {
            return Err(Error::Config(format!(
                "low_temperature must be a non-negative number, got {}",
                self.low_temperature
            )));
        }
        if !self.high_temperature.is_finite() || self.high_temperature <= self.low_temperature {
            return Err(Error::Config(format!(
                "high_temperature ({}) must exceed low_temperature ({})",
                self.high_temperature, self.low_temperature
            )));
        }
        if self.n_samples == 0 {
            return Err(Error::Config("n_samples must be positive".into()));
        }
        if self.max_parallel == 0 {
            return Err(Error::Config("max_parallel must be positive".into()));
        }
        Ok(())
    }
}

/// What the service answers with. An empty `text` is the service's way of
/// reporting a failed generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationResponse {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_logprobs: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_distributions: Option<Vec<Vec<Vec<f64>>>>,
}

/// A handle that can produce one report per call. `sample_index` is 0 for
/// the candidate and 1..=n for samples; it never goes over the wire, but
/// replay handles need it to address the cache.
pub trait GenerationService: Send + Sync {
    fn generate(
        &self,
        request: &GenerationRequest,
        sample_index: usize,
    ) -> Result<GenerationResponse>;

    fn name(&self) -> &'static str;
}

// ---------------------------------------------------------------------------
// Cache

#[derive(Serialize)]
struct KeyMaterial<'a> {
    kind: &'static str,
    endpoint: &'a str,
    image_ref: &'a str,
    temperature: f64,
    sample_index: usize,
    seed: Option<u64>,
}

/// The sub-key a replay handle indexes by: everything except the endpoint.
#[derive(Serialize)]
struct SubKey<'a> {
    image_ref: &'a str,
    temperature: f64,
    sample_index: usize,
    seed: Option<u64>,
}

#[derive(Serialize, Deserialize)]
struct CacheEntry {
    endpoint: String,
    image_ref: String,
    temperature: f64,
    sample_index: usize,
    seed: Option<u64>,
    response: GenerationResponse,
}

/// Content-addressed directory of generation responses, one JSON file per
/// key, written atomically so concurrent workers never observe torn entries.
#[derive(Debug, Clone)]
pub struct GenerationCache {
    dir: PathBuf,
}

impl GenerationCache {
    pub fn open(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(GenerationCache {
            dir: dir.to_path_buf(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Stable content address for one generation call.
    pub fn key(
        endpoint: &str,
        image_ref: &str,
        temperature: f64,
        sample_index: usize,
        seed: Option<u64>,
    ) -> String {
        let material = KeyMaterial {
            kind: "generation",
            endpoint,
            image_ref,
            temperature,
            sample_index,
            seed,
        };
        let json = serde_json::to_vec(&material).expect("key material serializes");
        let mut hasher = Sha256::new();
        hasher.update(&json);
        format!("{:x}", hasher.finalize())
    }

    fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    fn get(&self, key: &str) -> Result<Option<GenerationResponse>> {
        let path = self.path_for(key);
        match std::fs::read(&path) {
            Ok(bytes) => {
                let entry: CacheEntry =
                    serde_json::from_slice(&bytes).map_err(|e| Error::Artifact {
                        path,
                        message: format!("unreadable cache entry: {e}"),
                    })?;
                Ok(Some(entry.response))
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    fn put(
        &self,
        endpoint: &str,
        request: &GenerationRequest,
        sample_index: usize,
        response: &GenerationResponse,
    ) -> Result<()> {
        let key = Self::key(
            endpoint,
            &request.image_ref,
            request.temperature,
            sample_index,
            request.seed,
        );
        let entry = CacheEntry {
            endpoint: endpoint.to_string(),
            image_ref: request.image_ref.clone(),
            temperature: request.temperature,
            sample_index,
            seed: request.seed,
            response: response.clone(),
        };
        let mut bytes = serde_json::to_vec_pretty(&entry)?;
        bytes.push(b'\n');
        atomic_write(&self.path_for(&key), &bytes)
    }
}

// ---------------------------------------------------------------------------
// HTTP service

/// Blocking HTTP client for the generation wire protocol, with bounded
/// retries and exponential backoff. 4xx responses are treated as permanent.
pub struct HttpGenerationService {
    endpoint: String,
    retry_limit: u32,
    client: reqwest::blocking::Client,
}

impl HttpGenerationService {
    pub fn new(endpoint: &str, retry_limit: u32, timeout_secs: u64) -> Result<Self> {
        if endpoint.trim().is_empty() {
            return Err(Error::Config(
                "generation endpoint is empty; set generation.endpoint or run with --offline \
                 against a populated cache"
                    .into(),
            ));
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(timeout_secs))
            .build()
            .map_err(|e| Error::Config(format!("http client: {e}")))?;
        Ok(HttpGenerationService {
            endpoint: endpoint.to_string(),
            retry_limit,
            client,
        })
    }

    pub fn from_config(config: &GenerationConfig) -> Result<Self> {
        Self::new(&config.endpoint, config.retry_limit, config.timeout_secs)
    }
}

#[derive(Serialize)]
struct WireRequest<'a> {
    image_ref: &'a str,
    temperature: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

impl GenerationService for HttpGenerationService {
    fn generate(
        &self,
        request: &GenerationRequest,
        _sample_index: usize,
    ) -> Result<GenerationResponse> {
        let body = WireRequest {
            image_ref: &request.image_ref,
            temperature: request.temperature,
            seed: request.seed,
        };
        let attempts = self.retry_limit + 1;
        let mut last_error = String::new();
        for attempt in 1..=attempts {
            if attempt > 1 {
                let backoff = Duration::from_millis(200u64 << (attempt - 2).min(4));
                std::thread::sleep(backoff);
            }
            let sent = self.client.post(&self.endpoint).json(&body).send();
            match sent {
                Ok(response) => {
                    let status = response.status();
                    let text = response.text().unwrap_or_default();
                    if status.is_success() {
                        match serde_json::from_str::<GenerationResponse>(&text) {
                            Ok(parsed) => {
                                if let Some(lp) = &parsed.token_logprobs {
                                    probe_probabilities("token_logprobs", lp)
                                        .map_err(|m| bad_payload(&self.endpoint, &m))?;
                                }
                                if let Some(dists) = &parsed.token_distributions {
                                    for sentence in dists {
                                        probe_probabilities("token_distributions", sentence)
                                            .map_err(|m| bad_payload(&self.endpoint, &m))?;
                                    }
                                }
                                return Ok(parsed);
                            }
                            Err(e) => {
                                last_error = format!("unparseable response body: {e}");
                                break;
                            }
                        }
                    }
                    last_error = format!(
                        "http {status}: {}",
                        text.chars().take(200).collect::<String>()
                    );
                    if status.is_client_error() {
                        break;
                    }
                }
                Err(e) => last_error = e.to_string(),
            }
        }
        Err(Error::Transport {
            endpoint: self.endpoint.clone(),
            attempts,
            message: last_error,
        })
    }

    fn name(&self) -> &'static str {
        "http"
    }
}

fn bad_payload(endpoint: &str, message: &str) -> Error {
    Error::Transport {
        endpoint: endpoint.to_string(),
        attempts: 1,
        message: format!("invalid payload: {message}"),
    }
}

// ---------------------------------------------------------------------------
// Replay

/// A generation handle that answers purely from a populated cache directory.
/// Entries are indexed by `(image_ref, temperature, sample_index, seed)`; if
/// the same sub-key was cached under two different endpoints the directory is
/// ambiguous and refused up front.
pub struct ReplayService {
    index: BTreeMap<String, GenerationResponse>,
}

/// Opens a cache directory for network-free replay. Missing entries surface
/// as cache-miss errors naming the requested sample index. A directory that
/// was never created is the same situation as an empty one — nothing has been
/// sampled yet — so it reports a cache miss with the populate-first remedy
/// rather than an I/O failure.
pub fn replay_only(cache_path: &Path) -> Result<ReplayService> {
    let mut index: BTreeMap<String, GenerationResponse> = BTreeMap::new();
    let mut endpoints: BTreeMap<String, String> = BTreeMap::new();
    let entries = std::fs::read_dir(cache_path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::CacheMiss {
                description: format!("cache directory {} (not yet created)", cache_path.display()),
            }
        } else {
            Error::Artifact {
                path: cache_path.to_path_buf(),
                message: format!("cannot open cache directory: {e}"),
            }
        }
    })?;
    for entry in entries {
        let path = entry?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("json") {
            continue;
        }
        let bytes = std::fs::read(&path)?;
        let entry: CacheEntry = serde_json::from_slice(&bytes).map_err(|e| Error::Artifact {
            path: path.clone(),
            message: format!("unreadable cache entry: {e}"),
        })?;
        let sub_key = serde_json::to_string(&SubKey {
            image_ref: &entry.image_ref,
            temperature: entry.temperature,
            sample_index: entry.sample_index,
            seed: entry.seed,
        })?;
        if let Some(previous) = endpoints.get(&sub_key) {
            if *previous != entry.endpoint {
                return Err(Error::Artifact {
                    path: cache_path.to_path_buf(),
                    message: format!(
                        "ambiguous cache: {sub_key} recorded under endpoints {previous} and {}",
                        entry.endpoint
                    ),
                });
            }
        }
        endpoints.insert(sub_key.clone(), entry.endpoint.clone());
        index.insert(sub_key, entry.response);
    }
    Ok(ReplayService { index })
}

impl GenerationService for ReplayService {
    fn generate(
        &self,
        request: &GenerationRequest,
        sample_index: usize,
    ) -> Result<GenerationResponse> {
        let sub_key = serde_json::to_string(&SubKey {
            image_ref: &request.image_ref,
            temperature: request.temperature,
            sample_index,
            seed: request.seed,
        })?;
        self.index
            .get(&sub_key)
            .cloned()
            .ok_or_else(|| Error::CacheMiss {
                description: format!(
                    "study {} image_ref {} temperature {} sample_index {sample_index} seed {:?}",
                    request.study_id, request.image_ref, request.temperature, request.seed
                ),
            })
    }

    fn name(&self) -> &'static str {
        "replay"
    }
}

// ---------------------------------------------------------------------------
// Orchestration

fn one_call(
    service: &dyn GenerationService,
    cache: Option<&GenerationCache>,
    endpoint: &str,
    request: &GenerationRequest,
    sample_index: usize,
) -> Result<GenerationResponse> {
    if let Some(cache) = cache {
        let key = GenerationCache::key(
            endpoint,
            &request.image_ref,
            request.temperature,
            sample_index,
            request.seed,
        );
        if let Some(hit) = cache.get(&key)? {
            return Ok(hit);
        }
    }
    let response = service.generate(request, sample_index)?;
    if !response.text.trim().is_empty() {
        if let Some(cache) = cache {
            cache.put(endpoint, request, sample_index, &response)?;
        }
    }
    Ok(response)
}

fn response_to_report(
    study_id: &str,
    temperature: f64,
    kind: ReportKind,
    response: GenerationResponse,
) -> Report {
    Report {
        study_id: study_id.to_string(),
        text: response.text,
        temperature,
        kind,
        token_logprobs: response.token_logprobs,
        token_distributions: response.token_distributions,
    }
}

/// Generates one study: the candidate at `low_temperature` plus `n_samples`
/// samples at `high_temperature`, issued concurrently up to `max_parallel`.
///
/// A sample that fails with a transport error after retries, or whose text
/// comes back empty, is recorded as an empty slot with a warning; a cache
/// miss during replay and any candidate failure abort the study.
pub fn generate_study(
    request_base: &GenerationRequest,
    config: &GenerationConfig,
    service: &dyn GenerationService,
    cache: Option<&GenerationCache>,
) -> Result<Study> {
    config.validate()?;
    if request_base.temperature < 0.0 || !request_base.temperature.is_finite() {
        return Err(Error::Config(format!(
            "request temperature must be a non-negative number, got {}",
            request_base.temperature
        )));
    }

    let mut requests = Vec::with_capacity(config.n_samples + 1);
    for index in 0..=config.n_samples {
        let temperature = if index == 0 {
            config.low_temperature
        } else {
            config.high_temperature
        };
        requests.push(GenerationRequest {
            study_id: request_base.study_id.clone(),
            image_ref: request_base.image_ref.clone(),
            temperature,
            seed: request_base.seed.map(|base| base + index as u64),
        });
    }

    let results: Vec<OnceLock<Result<GenerationResponse>>> =
        (0..requests.len()).map(|_| OnceLock::new()).collect();
    let cursor = AtomicUsize::new(0);
    let workers = config.max_parallel.min(requests.len());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = cursor.fetch_add(1, Ordering::Relaxed);
                if i >= requests.len() {
                    break;
                }
                let outcome = one_call(service, cache, &config.endpoint, &requests[i], i);
                results[i].set(outcome).expect("each slot is filled once");
            });
        }
    });

    let mut outcomes: Vec<Result<GenerationResponse>> = results
        .into_iter()
        .map(|slot| slot.into_inner().expect("worker pool visited every slot"))
        .collect();

    let candidate_response = {
        let response = outcomes.remove(0)?;
        if response.text.trim().is_empty() {
            return Err(Error::EmptyCandidate {
                study_id: request_base.study_id.clone(),
            });
        }
        response
    };
    let candidate = response_to_report(
        &request_base.study_id,
        config.low_temperature,
        ReportKind::Candidate,
        candidate_response,
    );

    let mut samples = Vec::with_capacity(config.n_samples);
    for (offset, outcome) in outcomes.into_iter().enumerate() {
        let sample_index = offset + 1;
        let response = match outcome {
            Ok(response) => {
                if response.text.trim().is_empty() {
                    log::warn!(
                        "study {}: sample {sample_index} came back empty; keeping an empty slot",
                        request_base.study_id
                    );
                }
                response
            }
            Err(Error::Transport {
                endpoint,
                attempts,
                message,
            }) => {
                log::warn!(
                    "study {}: sample {sample_index} failed after {attempts} attempts \
                     against {endpoint}: {message}; keeping an empty slot",
                    request_base.study_id
                );
                GenerationResponse {
                    text: String::new(),
                    token_logprobs: None,
                    token_distributions: None,
                }
            }
            Err(other) => return Err(other),
        };
        samples.push(response_to_report(
            &request_base.study_id,
            config.high_temperature,
            ReportKind::Sample,
            response,
        ));
    }

    Ok(Study {
        study_id: request_base.study_id.clone(),
        candidate,
        samples,
        ground_truth: None,
        external_metrics: BTreeMap::new(),
    })
}
