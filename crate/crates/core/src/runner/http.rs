//! Blocking client for an Ollama-style `/api/generate` endpoint.

use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use super::config::InferenceConfig;

pub const DEFAULT_PATH: &str = "/api/generate";
pub const DEFAULT_RETRIES: u32 = 3;
pub const DEFAULT_BACKOFF: Duration = Duration::from_millis(200);
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(300);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HttpGenerateError {
    #[error("connection to {endpoint} failed: {message}")]
    ConnectionFailed { endpoint: String, message: String },
    #[error("server answered HTTP {0}")]
    HttpError(u16),
    #[error("malformed response: {0}")]
    MalformedResponse(String),
}

/// Parsed non-streaming generate response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateResponse {
    pub text: String,
    /// Generated token count (`eval_count`), if reported.
    pub eval_count: Option<u64>,
    /// Generation time in nanoseconds (`eval_duration`), if reported.
    pub eval_duration_ns: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct HttpClient {
    url: String,
    retries: u32,
    backoff: Duration,
    send_beam_size: bool,
    client: reqwest::blocking::Client,
}

/// Appends the default generate path when `endpoint` carries no path of its own.
fn resolve_url(endpoint: &str) -> String {
    let trimmed = endpoint.trim_end_matches('/');
    let after_scheme = trimmed.split_once("://").map_or(trimmed, |(_, rest)| rest);
    if after_scheme.contains('/') {
        trimmed.to_string()
    } else {
        format!("{trimmed}{DEFAULT_PATH}")
    }
}

impl HttpClient {
    pub fn new(endpoint: &str) -> Self {
        Self::with_timeout(endpoint, DEFAULT_TIMEOUT)
    }

    pub fn with_timeout(endpoint: &str, timeout: Duration) -> Self {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .expect("HTTP client construction");
        Self {
            url: resolve_url(endpoint),
            retries: DEFAULT_RETRIES,
            backoff: DEFAULT_BACKOFF,
            send_beam_size: false,
            client,
        }
    }

    /// Retries after the first attempt; `0` means a single try.
    pub fn retries(mut self, retries: u32) -> Self {
        self.retries = retries;
        self
    }

    /// Initial backoff, doubled after every failed attempt.
    pub fn backoff(mut self, backoff: Duration) -> Self {
        self.backoff = backoff;
        self
    }

    /// Forward `beam_size` in the options block; only for servers that accept it.
    pub fn send_beam_size(mut self, yes: bool) -> Self {
        self.send_beam_size = yes;
        self
    }

    pub fn sends_beam_size(&self) -> bool {
        self.send_beam_size
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    pub fn request_body(&self, config: &InferenceConfig, prompt: &str) -> Value {
        let mut options = json!({
            "temperature": config.temperature,
            "top_p": config.top_p,
            "top_k": config.top_k,
            "num_predict": config.max_tokens,
        });
        if self.send_beam_size {
            options["beam_size"] = json!(config.beam_size);
        }
        json!({
            "model": config.model_name,
            "prompt": prompt,
            "stream": false,
            "options": options,
        })
    }

    fn attempt(&self, body: &Value) -> Result<GenerateResponse, HttpGenerateError> {
        let response = self
            .client
            .post(&self.url)
            .json(body)
            .send()
            .map_err(|e| HttpGenerateError::ConnectionFailed {
                endpoint: self.url.clone(),
                message: e.to_string(),
            })?;
        let status = response.status();
        if !status.is_success() {
            return Err(HttpGenerateError::HttpError(status.as_u16()));
        }
        let bytes = response
            .bytes()
            .map_err(|e| HttpGenerateError::ConnectionFailed {
                endpoint: self.url.clone(),
                message: e.to_string(),
            })?;
        parse_response(&bytes)
    }

    pub fn generate(&self, config: &InferenceConfig, prompt: &str) -> Result<GenerateResponse, HttpGenerateError> {
        let body = self.request_body(config, prompt);
        let mut delay = self.backoff;
        let mut attempt = 0;
        loop {
            match self.attempt(&body) {
                Ok(r) => return Ok(r),
                Err(e) if attempt >= self.retries => return Err(e),
                Err(_) => {
                    thread::sleep(delay);
                    delay = delay.saturating_mul(2);
                    attempt += 1;
                }
            }
        }
    }
}

pub fn parse_response(bytes: &[u8]) -> Result<GenerateResponse, HttpGenerateError> {
    let value: Value =
        serde_json::from_slice(bytes).map_err(|e| HttpGenerateError::MalformedResponse(e.to_string()))?;
    let text = value
        .get("response")
        .and_then(Value::as_str)
        .ok_or_else(|| HttpGenerateError::MalformedResponse("missing string field `response`".into()))?;
    Ok(GenerateResponse {
        text: text.to_string(),
        eval_count: value.get("eval_count").and_then(Value::as_u64),
        eval_duration_ns: value.get("eval_duration").and_then(Value::as_u64),
    })
}

/// One generate call with default retry settings.
pub fn http_generate(
    endpoint: &str,
    config: &InferenceConfig,
    prompt: &str,
) -> Result<GenerateResponse, HttpGenerateError> {
    HttpClient::new(endpoint).generate(config, prompt)
}
