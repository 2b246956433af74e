//! Completion endpoint abstraction and the OpenAI-compatible HTTP client.

use std::future::Future;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::config::EndpointConfig;

#[derive(Debug, Error)]
pub enum GenError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },
    /// The endpoint cannot continue a partial trace.
    #[error("endpoint capability missing: {0}")]
    Capability(String),
    #[error("malformed response: {0}")]
    Decode(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Pool(#[from] pcvote_core::Error),
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl GenError {
    /// Transport failures, rate limits and server errors are worth retrying.
    pub fn is_retryable(&self) -> bool {
        match self {
            GenError::Transport(_) => true,
            GenError::Http { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}

pub type GenResult<T> = std::result::Result<T, GenError>;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompletionRequest {
    /// Full raw prompt; continuations append the partial trace.
    pub prompt: String,
    pub max_tokens: u32,
    /// Number of top log-probabilities per position (0 disables them).
    pub top_logprobs: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TokenInfo {
    pub text: String,
    pub logprob: f64,
    /// Candidates sorted by descending log-probability.
    pub top: Vec<(String, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Completion {
    pub text: String,
    /// Generated-token count as reported by the endpoint.
    pub n_tokens: u64,
    /// Per-token detail when the endpoint returned log-probabilities.
    pub tokens: Option<Vec<TokenInfo>>,
}

pub trait Endpoint: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> impl Future<Output = GenResult<Completion>> + Send;
}

/// Client for `POST {base_url}/completions` (raw prompt, no chat template).
pub struct HttpEndpoint {
    client: reqwest::Client,
    config: EndpointConfig,
    api_key: Option<String>,
}

pub const REQUIRED_SHAPE: &str =
    "POST {base_url}/completions accepting a raw `prompt` string (OpenAI legacy completions); chat-only endpoints cannot continue a partial trace";

impl HttpEndpoint {
    pub fn new(config: EndpointConfig) -> GenResult<Self> {
        let client = reqwest::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| GenError::Config(e.to_string()))?;
        let api_key = std::env::var(&config.api_key_env).ok().filter(|k| !k.is_empty());
        Ok(Self { client, config, api_key })
    }

    fn body(&self, request: &CompletionRequest) -> Value {
        let s = &self.config.sampling;
        let mut body = json!({
            "model": self.config.model,
            "prompt": request.prompt,
            "max_tokens": request.max_tokens,
            "temperature": s.temperature,
            "top_p": s.top_p,
            "n": 1,
        });
        if let Some(k) = s.top_k {
            body["top_k"] = json!(k);
        }
        if request.top_logprobs > 0 {
            body["logprobs"] = json!(request.top_logprobs);
        }
        body
    }
}

#[derive(Deserialize)]
struct RawResponse {
    choices: Vec<RawChoice>,
    #[serde(default)]
    usage: Option<RawUsage>,
}

#[derive(Deserialize)]
struct RawChoice {
    text: String,
    #[serde(default)]
    logprobs: Option<RawLogprobs>,
}

#[derive(Deserialize)]
struct RawLogprobs {
    tokens: Vec<String>,
    token_logprobs: Vec<Option<f64>>,
    #[serde(default)]
    top_logprobs: Option<Vec<Option<Map<String, Value>>>>,
}

#[derive(Deserialize)]
struct RawUsage {
    completion_tokens: u64,
}

/// Parses a legacy completions response body.
pub fn parse_completion(body: &str) -> GenResult<Completion> {
    let raw: RawResponse = serde_json::from_str(body).map_err(|e| GenError::Decode(e.to_string()))?;
    let choice = raw.choices.into_iter().next().ok_or_else(|| GenError::Decode("no choices".into()))?;
    let tokens = match choice.logprobs {
        Some(lp) => {
            let tops = lp.top_logprobs.unwrap_or_default();
            let infos = lp
                .tokens
                .into_iter()
                .zip(lp.token_logprobs)
                .enumerate()
                .map(|(i, (text, logprob))| {
                    let mut top: Vec<(String, f64)> = tops
                        .get(i)
                        .and_then(|m| m.as_ref())
                        .map(|m| m.iter().filter_map(|(k, v)| v.as_f64().map(|x| (k.clone(), x))).collect())
                        .unwrap_or_default();
                    top.sort_by(|a, b| b.1.total_cmp(&a.1));
                    TokenInfo { text, logprob: logprob.unwrap_or(f64::NAN), top }
                })
                .collect::<Vec<_>>();
            Some(infos)
        }
        None => None,
    };
    let n_tokens = match (&raw.usage, &tokens) {
        (Some(u), _) => u.completion_tokens,
        (None, Some(t)) => t.len() as u64,
        (None, None) => return Err(GenError::Decode("response has neither usage nor token log-probabilities".into())),
    };
    Ok(Completion { text: choice.text, n_tokens, tokens })
}

impl Endpoint for HttpEndpoint {
    async fn complete(&self, request: &CompletionRequest) -> GenResult<Completion> {
        let url = format!("{}/completions", self.config.base_url.trim_end_matches('/'));
        let mut req = self.client.post(&url).json(&self.body(request));
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().await.map_err(|e| GenError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let body = resp.text().await.map_err(|e| GenError::Transport(e.to_string()))?;
        match status {
            200..=299 => parse_completion(&body),
            404 | 405 | 501 => Err(GenError::Capability(format!("{url} answered HTTP {status}; need {REQUIRED_SHAPE}"))),
            _ => Err(GenError::Http { status, body }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_legacy_response_with_logprobs() {
        let body = r#"{"choices":[{"text":"a b","logprobs":{"tokens":["a"," b"],"token_logprobs":[-0.1,-0.2],
            "top_logprobs":[{"a":-0.1,"c":-3.0},{"x":-2.5," b":-0.2}]}}],"usage":{"completion_tokens":2}}"#;
        let c = parse_completion(body).unwrap();
        assert_eq!(c.n_tokens, 2);
        let toks = c.tokens.unwrap();
        assert_eq!(toks[1].top[0], (" b".to_string(), -0.2));
        assert_eq!(toks[1].top[1].0, "x");
    }

    #[test]
    fn plain_response_needs_usage() {
        let c = parse_completion(r#"{"choices":[{"text":"hi"}],"usage":{"completion_tokens":5}}"#).unwrap();
        assert_eq!(c.n_tokens, 5);
        assert!(c.tokens.is_none());
        assert!(parse_completion(r#"{"choices":[{"text":"hi"}]}"#).is_err());
        assert!(parse_completion(r#"{"choices":[]}"#).is_err());
    }

    #[test]
    fn retry_classes() {
        assert!(GenError::Transport("x".into()).is_retryable());
        assert!(GenError::Http { status: 503, body: String::new() }.is_retryable());
        assert!(GenError::Http { status: 429, body: String::new() }.is_retryable());
        assert!(!GenError::Http { status: 400, body: String::new() }.is_retryable());
        assert!(!GenError::Capability("x".into()).is_retryable());
    }
}
