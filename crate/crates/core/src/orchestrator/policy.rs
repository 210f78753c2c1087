use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingParams {
    pub temperature: f64,
    pub top_p: f64,
}

impl Default for SamplingParams {
    fn default() -> Self {
        Self { temperature: 1.0, top_p: 1.0 }
    }
}

#[derive(Debug, Clone)]
pub struct GenerationRequest<'a> {
    pub problem_id: &'a str,
    pub rollout: usize,
    /// 0-based index of this call within the episode.
    pub call_index: usize,
    pub context: &'a str,
    pub stop: &'a [String],
    pub sampling: SamplingParams,
    /// Remaining response budget.
    pub max_len: usize,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PolicyError {
    /// Worth retrying (connection reset, timeout, 5xx).
    #[error("transport error: {0}")]
    Transport(String),
    #[error("policy error: {0}")]
    Fatal(String),
}

/// Source of model continuations.
pub trait Policy: Send + Sync {
    /// Returns the continuation of `req.context`, ending at (and including)
    /// the first stop marker or at the length budget.
    fn generate(&self, req: &GenerationRequest<'_>) -> Result<String, PolicyError>;

    /// Whether `generate` may be called from several threads at once.
    fn supports_concurrency(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpPolicyConfig {
    pub url: String,
    /// Seconds.
    pub timeout: f64,
    pub concurrent: bool,
}

impl Default for HttpPolicyConfig {
    fn default() -> Self {
        Self { url: "http://127.0.0.1:8000/generate".into(), timeout: 600.0, concurrent: true }
    }
}

#[derive(Serialize)]
struct HttpRequestBody<'a> {
    prompt: &'a str,
    stop: &'a [String],
    temperature: f64,
    top_p: f64,
    max_tokens: usize,
}

#[derive(Deserialize)]
struct HttpResponseBody {
    text: String,
}

/// POSTs `{prompt, stop, temperature, top_p, max_tokens}` and reads `{text}`.
pub struct HttpPolicy {
    agent: ureq::Agent,
    config: HttpPolicyConfig,
}

impl HttpPolicy {
    pub fn new(config: HttpPolicyConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(config.timeout)))
            .build()
            .into();
        Self { agent, config }
    }
}

impl Policy for HttpPolicy {
    fn generate(&self, req: &GenerationRequest<'_>) -> Result<String, PolicyError> {
        let body = HttpRequestBody {
            prompt: req.context,
            stop: req.stop,
            temperature: req.sampling.temperature,
            top_p: req.sampling.top_p,
            max_tokens: req.max_len,
        };
        let mut resp = self.agent.post(&self.config.url).send_json(&body).map_err(|e| match e {
            ureq::Error::StatusCode(code) if code < 500 && code != 429 => {
                PolicyError::Fatal(format!("http status {code}"))
            }
            other => PolicyError::Transport(other.to_string()),
        })?;
        let parsed: HttpResponseBody = resp
            .body_mut()
            .read_json()
            .map_err(|e| PolicyError::Fatal(format!("bad response body: {e}")))?;
        Ok(parsed.text)
    }

    fn supports_concurrency(&self) -> bool {
        self.config.concurrent
    }
}

/// Replays canned continuations. Each problem id maps to one or more
/// scripts (a list of continuations, one per call); the key `"*"` matches
/// any problem. When several scripts exist, the rollout picks one with an
/// RNG seeded from `(seed, problem id, rollout)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScriptedPolicy {
    pub scripts: BTreeMap<String, Vec<Vec<String>>>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Error)]
pub enum ScriptError {
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ u64::from(*b)).wrapping_mul(0x100_0000_01b3))
}

impl ScriptedPolicy {
    pub fn new(seed: u64) -> Self {
        Self { scripts: BTreeMap::new(), seed }
    }

    pub fn with_script(mut self, problem_id: &str, calls: Vec<String>) -> Self {
        self.scripts.entry(problem_id.to_string()).or_default().push(calls);
        self
    }

    /// Reads a JSON object mapping problem ids to lists of scripts.
    pub fn from_file(path: &Path, seed: u64) -> Result<Self, ScriptError> {
        let scripts = serde_json::from_str(&fs::read_to_string(path)?)?;
        Ok(Self { scripts, seed })
    }

    fn script_for(&self, problem_id: &str, rollout: usize) -> Option<&Vec<String>> {
        let options = self.scripts.get(problem_id).or_else(|| self.scripts.get("*"))?;
        match options.len() {
            0 => None,
            1 => options.first(),
            n => {
                let seed = self.seed ^ fnv1a(problem_id.as_bytes()) ^ (rollout as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                options.get(rng.random_range(0..n))
            }
        }
    }
}

impl Policy for ScriptedPolicy {
    fn generate(&self, req: &GenerationRequest<'_>) -> Result<String, PolicyError> {
        let script = self
            .script_for(req.problem_id, req.rollout)
            .ok_or_else(|| PolicyError::Fatal(format!("no script for problem {}", req.problem_id)))?;
        script
            .get(req.call_index)
            .cloned()
            .ok_or_else(|| PolicyError::Fatal(format!("script exhausted at call {}", req.call_index)))
    }
}
