//! Endpoint and generation settings, read from a TOML key-value file.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::endpoint::{GenError, GenResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingParams {
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_top_p")]
    pub top_p: f64,
    #[serde(default)]
    pub top_k: Option<u32>,
    /// Output-token cap for initial samples and continuations.
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
}

fn default_temperature() -> f64 {
    1.0
}
fn default_top_p() -> f64 {
    1.0
}
fn default_max_tokens() -> u32 {
    32_768
}
fn default_concurrency() -> usize {
    8
}
fn default_top_logprobs() -> u32 {
    20
}
fn default_retries() -> u32 {
    3
}
fn default_backoff_ms() -> u64 {
    500
}
fn default_timeout() -> u64 {
    600
}
fn default_key_env() -> String {
    "PCVOTE_API_KEY".into()
}
fn default_rating_tokens() -> u32 {
    4096
}

impl Default for SamplingParams {
    fn default() -> Self {
        Self {
            temperature: default_temperature(),
            top_p: default_top_p(),
            top_k: None,
            max_tokens: default_max_tokens(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Math,
    Science,
}

impl Domain {
    pub fn system_prompt(self) -> &'static str {
        match self {
            Domain::Math => "You are a helpful assistant specialized in solving mathematical problems.",
            Domain::Science => {
                "You are an expert scientist solving olympiad-level problems in physics, chemistry, and biology."
            }
        }
    }
}

pub const INSTRUCTION: &str = "Please reason step by step, and put your final answer within \\boxed{}.";

/// Raw prompt: system text, then the problem statement with the
/// step-by-step instruction appended.
pub fn render_prompt(domain: Domain, problem: &str) -> String {
    format!("{}\n\n{} {}\n\n", domain.system_prompt(), problem.trim_end(), INSTRUCTION)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointConfig {
    pub base_url: String,
    pub model: String,
    #[serde(default)]
    pub benchmark: String,
    #[serde(default = "default_domain")]
    pub domain: Domain,
    #[serde(default)]
    pub sampling: SamplingParams,
    #[serde(default = "default_concurrency")]
    pub concurrency: usize,
    #[serde(default = "default_top_logprobs")]
    pub top_logprobs: u32,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    /// Name of the environment variable holding the API key.
    #[serde(default = "default_key_env")]
    pub api_key_env: String,
    /// Output-token cap for verbal rating calls.
    #[serde(default = "default_rating_tokens")]
    pub rating_max_tokens: u32,
}

fn default_domain() -> Domain {
    Domain::Math
}

impl EndpointConfig {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            model: model.into(),
            benchmark: String::new(),
            domain: Domain::Math,
            sampling: SamplingParams::default(),
            concurrency: default_concurrency(),
            top_logprobs: default_top_logprobs(),
            max_retries: default_retries(),
            backoff_ms: default_backoff_ms(),
            timeout_secs: default_timeout(),
            api_key_env: default_key_env(),
            rating_max_tokens: default_rating_tokens(),
        }
    }

    pub fn from_toml(text: &str) -> GenResult<Self> {
        let config: Self = toml::from_str(text).map_err(|e| GenError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> GenResult<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> GenResult<()> {
        if self.concurrency == 0 {
            return Err(GenError::Config("concurrency must be at least 1".into()));
        }
        if self.top_logprobs != 0 && self.top_logprobs != 20 {
            return Err(GenError::Config("top_logprobs must be 20 (or 0 to disable log-probabilities)".into()));
        }
        if self.base_url.is_empty() {
            return Err(GenError::Config("base_url is empty".into()));
        }
        Ok(())
    }
}
