//! Warm-cache replay: run generation once, then never again.
//!
//! Every generation response is cached under a content address of
//! (endpoint, image_ref, temperature, sample index, seed). A warm cache
//! therefore replays a whole run bit-for-bit with zero network calls —
//! that is what `--offline` relies on, and what makes end-to-end runs
//! reproducible even though the backing model is stochastic.
//!
//! This demo scripts a deterministic in-memory "service" (any
//! implementation of the same trait works), generates one study through it
//! with a cache attached, then replays from the cache directory alone and
//! checks the studies match.

use radguard::genclient::{
    generate_study, replay_only, GenerationCache, GenerationConfig, GenerationRequest,
    GenerationResponse, GenerationService,
};

struct ScriptedService;

impl GenerationService for ScriptedService {
    fn generate(
        &self,
        request: &GenerationRequest,
        sample_index: usize,
    ) -> radguard::Result<GenerationResponse> {
        let text = if sample_index == 0 {
            format!("There is effusion in {}.", request.image_ref)
        } else {
            format!(
                "Sample {sample_index} for {} shows effusion.",
                request.image_ref
            )
        };
        Ok(GenerationResponse {
            text,
            token_logprobs: None,
            token_distributions: None,
        })
    }

    fn name(&self) -> &'static str {
        "scripted"
    }
}

fn main() -> radguard::Result<()> {
    let dir = std::env::temp_dir().join(format!("radguard-replay-{}", std::process::id()));
    let cache = GenerationCache::open(&dir)?;

    let config = GenerationConfig {
        endpoint: "http://scripted.invalid/generate".into(),
        n_samples: 4,
        ..GenerationConfig::default()
    };
    let request = GenerationRequest {
        study_id: "demo-001".into(),
        image_ref: "img-001".into(),
        temperature: config.low_temperature,
        seed: Some(7),
    };

    let live = generate_study(&request, &config, &ScriptedService, Some(&cache))?;
    let entries = std::fs::read_dir(&dir)?.count();
    println!(
        "live run: candidate + {} samples, {entries} cache entries",
        live.samples.len()
    );

    let replay_service = replay_only(&dir)?;
    let replayed = generate_study(&request, &config, &replay_service, None)?;
    println!(
        "replay run answered from cache alone: match = {}",
        live == replayed
    );

    // A request the cache has never seen is a hard error, not a guess.
    let unseen = GenerationRequest {
        study_id: "demo-002".into(),
        image_ref: "img-002".into(),
        ..request
    };
    match generate_study(&unseen, &config, &replay_service, None) {
        Err(e) => println!("unseen study under replay: {e}"),
        Ok(_) => unreachable!("replay cannot invent responses"),
    }

    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
