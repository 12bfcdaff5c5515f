//! Chat-completions HTTP adapter.
//!
//! One protocol adapter covers both proprietary endpoints and self-hosted
//! open-source servers speaking the same wire format: a JSON `POST` to
//! `<base_url>/chat/completions` with a system message and a user message
//! whose content mixes text and image parts (inline base64 data URLs or
//! plain URLs).
//!
//! Transient transport failures (connection errors, timeouts, HTTP 408/429/
//! 5xx) are retried with exponential backoff up to a configured count. A
//! hard per-call timeout bounds every attempt so the episode loop can never
//! block indefinitely.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{
    InFlightLimiter, ModelBackend, ModelError, ModelRequest, ModelResponse, UsageCounters,
};
use crate::Real;

/// Environment variable holding the API key by default.
pub const API_KEY_ENV: &str = "VLN_MODEL_API_KEY";
/// Environment variable holding the endpoint base URL by default.
pub const BASE_URL_ENV: &str = "VLN_MODEL_BASE_URL";

/// How images travel to the backend.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImageTransport {
    /// Read the file under the asset root and inline it as a data URL.
    Base64,
    /// Send `<url_prefix>/<relative path>` and let the server fetch it.
    Url,
}

/// Remote backend configuration, mirrored from the run configuration file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelSettings {
    /// Target model name sent in the payload.
    pub model: String,
    /// Base URL, e.g. `https://host/v1`. Falls back to `VLN_MODEL_BASE_URL`.
    #[serde(default)]
    pub base_url: Option<String>,
    /// Name of the env var holding the API key. `None` disables auth
    /// entirely (self-hosted servers).
    #[serde(default = "default_api_key_env")]
    pub api_key_env: Option<String>,
    /// Hard per-call timeout in seconds.
    #[serde(default = "default_timeout_s")]
    pub timeout_s: u64,
    /// Transport retries after the first attempt.
    #[serde(default = "default_transport_retries")]
    pub transport_retries: usize,
    /// Initial backoff in milliseconds, doubled per retry.
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
    /// Maximum concurrent calls through this handle.
    #[serde(default = "default_max_in_flight")]
    pub max_in_flight: usize,
    #[serde(default = "default_image_transport")]
    pub image_transport: ImageTransport,
    /// Prefix for `ImageTransport::Url`.
    #[serde(default)]
    pub image_url_prefix: Option<String>,
}

fn default_api_key_env() -> Option<String> {
    Some(API_KEY_ENV.to_string())
}
fn default_timeout_s() -> u64 {
    120
}
fn default_transport_retries() -> usize {
    3
}
fn default_backoff_ms() -> u64 {
    500
}
fn default_max_in_flight() -> usize {
    4
}
fn default_image_transport() -> ImageTransport {
    ImageTransport::Base64
}

impl Default for ModelSettings {
    fn default() -> Self {
        ModelSettings {
            model: "default".to_string(),
            base_url: None,
            api_key_env: default_api_key_env(),
            timeout_s: default_timeout_s(),
            transport_retries: default_transport_retries(),
            backoff_ms: default_backoff_ms(),
            max_in_flight: default_max_in_flight(),
            image_transport: default_image_transport(),
            image_url_prefix: None,
        }
    }
}

pub struct ChatModel {
    id: String,
    settings: ModelSettings,
    asset_root: PathBuf,
    agent: ureq::Agent,
    limiter: InFlightLimiter,
    /// Test hook: skip the real backoff sleep.
    sleep_between_retries: bool,
}

impl ChatModel {
    pub fn new(
        id: impl Into<String>,
        settings: ModelSettings,
        asset_root: impl Into<PathBuf>,
    ) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(settings.timeout_s)))
            .http_status_as_error(false)
            .build()
            .into();
        let limiter = InFlightLimiter::new(settings.max_in_flight);
        ChatModel {
            id: id.into(),
            settings,
            asset_root: asset_root.into(),
            agent,
            limiter,
            sleep_between_retries: true,
        }
    }

    #[doc(hidden)]
    pub fn without_backoff_sleep(mut self) -> Self {
        self.sleep_between_retries = false;
        self
    }

    fn endpoint(&self) -> Result<String, ModelError> {
        let base = match &self.settings.base_url {
            Some(url) => url.clone(),
            None => std::env::var(BASE_URL_ENV).map_err(|_| {
                ModelError::Misconfigured(format!(
                    "no base_url configured and {BASE_URL_ENV} is not set"
                ))
            })?,
        };
        Ok(format!("{}/chat/completions", base.trim_end_matches('/')))
    }

    fn api_key(&self) -> Result<Option<String>, ModelError> {
        match &self.settings.api_key_env {
            None => Ok(None),
            Some(var) => match std::env::var(var) {
                Ok(key) if !key.is_empty() => Ok(Some(key)),
                _ => Err(ModelError::AuthMissing(var.clone())),
            },
        }
    }

    fn image_part(&self, reference: &str) -> Result<Value, ModelError> {
        match self.settings.image_transport {
            ImageTransport::Url => {
                let prefix = self
                    .settings
                    .image_url_prefix
                    .as_deref()
                    .unwrap_or("")
                    .trim_end_matches('/');
                let url = if prefix.is_empty() {
                    reference.to_string()
                } else {
                    format!("{prefix}/{reference}")
                };
                Ok(json!({"type": "image_url", "image_url": {"url": url}}))
            }
            ImageTransport::Base64 => {
                let path = self.asset_root.join(reference);
                let bytes = std::fs::read(&path).map_err(|e| {
                    ModelError::Misconfigured(format!("cannot read image {}: {e}", path.display()))
                })?;
                let encoded = base64::engine::general_purpose::STANDARD.encode(bytes);
                Ok(json!({
                    "type": "image_url",
                    "image_url": {"url": format!("data:image/jpeg;base64,{encoded}")}
                }))
            }
        }
    }

    fn payload(&self, req: &ModelRequest) -> Result<Value, ModelError> {
        let mut user_content = vec![json!({"type": "text", "text": req.task_text})];
        for image in &req.images {
            user_content.push(self.image_part(image)?);
        }
        let mut payload = json!({
            "model": self.settings.model,
            "messages": [
                {"role": "system", "content": req.system_text},
                {"role": "user", "content": user_content},
            ],
            "max_tokens": req.params.max_tokens,
            "temperature": req.params.temperature,
        });
        if let Some(seed) = req.params.seed {
            payload["seed"] = json!(seed);
        }
        Ok(payload)
    }

    fn call_once(&self, url: &str, key: Option<&str>, payload: &Value) -> AttemptResult {
        let mut builder = self.agent.post(url);
        if let Some(key) = key {
            builder = builder.header("Authorization", &format!("Bearer {key}"));
        }
        match builder.send_json(payload) {
            Err(e) => AttemptResult::Retryable(format!("transport: {e}")),
            Ok(mut response) => {
                let status = response.status().as_u16();
                let body = response
                    .body_mut()
                    .read_to_string()
                    .unwrap_or_else(|e| format!("<unreadable body: {e}>"));
                match status {
                    200..=299 => AttemptResult::Ok(body),
                    408 | 429 | 500..=599 => {
                        AttemptResult::Retryable(format!("http {status}: {body}"))
                    }
                    _ if looks_like_context_overflow(&body) => {
                        AttemptResult::Fatal(ModelError::ContextOverflow(truncate(&body, 400)))
                    }
                    _ => AttemptResult::Fatal(ModelError::Transport {
                        attempts: 1,
                        reason: format!("http {status}: {}", truncate(&body, 400)),
                    }),
                }
            }
        }
    }
}

enum AttemptResult {
    Ok(String),
    Retryable(String),
    Fatal(ModelError),
}

impl ModelBackend for ChatModel {
    fn id(&self) -> &str {
        &self.id
    }

    fn generate(&self, req: &ModelRequest) -> Result<ModelResponse, ModelError> {
        // Resolved before any network traffic.
        let key = self.api_key()?;
        let url = self.endpoint()?;
        let payload = self.payload(req)?;

        let _guard = self.limiter.acquire();
        let started = Instant::now();
        let attempts = 1 + self.settings.transport_retries;
        let mut last_reason = String::new();
        for attempt in 0..attempts {
            if attempt > 0 && self.sleep_between_retries {
                let backoff = self.settings.backoff_ms.saturating_mul(1 << (attempt - 1));
                std::thread::sleep(Duration::from_millis(backoff));
            }
            match self.call_once(&url, key.as_deref(), &payload) {
                AttemptResult::Ok(body) => {
                    let latency_s = started.elapsed().as_secs_f64();
                    return parse_completion(&body, &self.id, latency_s);
                }
                AttemptResult::Fatal(err) => return Err(err),
                AttemptResult::Retryable(reason) => last_reason = reason,
            }
        }
        Err(ModelError::Transport {
            attempts,
            reason: last_reason,
        })
    }
}

fn looks_like_context_overflow(body: &str) -> bool {
    let lower = body.to_ascii_lowercase();
    lower.contains("context_length_exceeded")
        || lower.contains("context length")
        || lower.contains("maximum context")
}

fn truncate(s: &str, max: usize) -> String {
    if s.len() <= max {
        s.to_string()
    } else {
        let mut end = max;
        while !s.is_char_boundary(end) {
            end -= 1;
        }
        format!("{}…", &s[..end])
    }
}

fn parse_completion(
    body: &str,
    backend_id: &str,
    latency_s: Real,
) -> Result<ModelResponse, ModelError> {
    let value: Value = serde_json::from_str(body).map_err(|e| ModelError::Transport {
        attempts: 1,
        reason: format!("non-json completion body: {e}"),
    })?;
    if let Some(err) = value.get("error") {
        let msg = err
            .get("message")
            .and_then(Value::as_str)
            .unwrap_or("unknown backend error");
        if looks_like_context_overflow(msg) {
            return Err(ModelError::ContextOverflow(msg.to_string()));
        }
        return Err(ModelError::Transport {
            attempts: 1,
            reason: msg.to_string(),
        });
    }
    let text = value
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .ok_or_else(|| ModelError::Transport {
            attempts: 1,
            reason: "completion body lacks choices[0].message.content".to_string(),
        })?;
    let usage = UsageCounters {
        prompt_tokens: value
            .pointer("/usage/prompt_tokens")
            .and_then(Value::as_u64)
            .unwrap_or(0),
        completion_tokens: value
            .pointer("/usage/completion_tokens")
            .and_then(Value::as_u64)
            .unwrap_or(0),
    };
    Ok(ModelResponse {
        text: text.trim_end().to_string(),
        latency_s,
        usage,
        backend_id: backend_id.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auth_missing_is_detected_before_any_network_call() {
        let settings = ModelSettings {
            api_key_env: Some("VLN_TEST_KEY_THAT_DOES_NOT_EXIST".to_string()),
            base_url: Some("http://127.0.0.1:1".to_string()),
            ..ModelSettings::default()
        };
        let model = ChatModel::new("chat", settings, ".");
        let err = model
            .generate(&ModelRequest::text_only("s", "t"))
            .unwrap_err();
        assert!(matches!(err, ModelError::AuthMissing(_)), "{err}");
    }

    #[test]
    fn completion_parsing_extracts_text_and_usage() {
        let body = r#"{
            "choices": [{"message": {"content": "Action: 2  "}}],
            "usage": {"prompt_tokens": 11, "completion_tokens": 3}
        }"#;
        let resp = parse_completion(body, "chat", 0.1).unwrap();
        assert_eq!(resp.text, "Action: 2");
        assert_eq!(resp.usage.prompt_tokens, 11);
        assert_eq!(resp.usage.completion_tokens, 3);
    }

    #[test]
    fn context_overflow_is_mapped() {
        let body = r#"{"error": {"message": "context_length_exceeded: too long"}}"#;
        let err = parse_completion(body, "chat", 0.1).unwrap_err();
        assert!(matches!(err, ModelError::ContextOverflow(_)));
    }
}
