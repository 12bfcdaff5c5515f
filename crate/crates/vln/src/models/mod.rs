//! Uniform interface to language-model backends.
//!
//! A backend receives a [`ModelRequest`] (system text, task text, ordered
//! image references) and returns the generated text verbatim, trimmed only of
//! trailing whitespace. Remote chat endpoints, the echo backend, and the
//! deterministic scripted policies in [`crate::fixtures`] all implement
//! [`ModelBackend`], so agents never care what is behind the handle.

mod chat;
mod scripted;

pub use chat::{ChatModel, ImageTransport, ModelSettings};
pub use scripted::{EchoModel, ScriptedModel};

use std::sync::{Condvar, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Real;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("transport failure after {attempts} attempts: {reason}")]
    Transport { attempts: usize, reason: String },
    #[error("api key environment variable {0} is not set")]
    AuthMissing(String),
    #[error("backend reported context overflow: {0}")]
    ContextOverflow(String),
    #[error("backend misconfigured: {0}")]
    Misconfigured(String),
    #[error("scripted model exhausted after {0} responses")]
    ScriptExhausted(usize),
}

/// Generation parameters forwarded to the backend where supported.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    pub max_tokens: u32,
    /// Defaults to 0 for determinism; the backend may ignore it.
    pub temperature: Real,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for GenerationParams {
    fn default() -> Self {
        GenerationParams {
            max_tokens: 1024,
            temperature: 0.0,
            seed: None,
        }
    }
}

/// One inference call: prompt text plus the visual observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRequest {
    pub system_text: String,
    pub task_text: String,
    /// Image references, relative to the asset root. Empty in text-only mode.
    #[serde(default)]
    pub images: Vec<String>,
    #[serde(default)]
    pub params: GenerationParams,
}

impl ModelRequest {
    pub fn text_only(system_text: impl Into<String>, task_text: impl Into<String>) -> Self {
        ModelRequest {
            system_text: system_text.into(),
            task_text: task_text.into(),
            images: Vec::new(),
            params: GenerationParams::default(),
        }
    }
}

/// Token usage as reported by the backend (zero when unknown).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsageCounters {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelResponse {
    pub text: String,
    pub latency_s: Real,
    pub usage: UsageCounters,
    pub backend_id: String,
}

/// A language-model backend. Handles are shareable across concurrent
/// episodes; each call is independent.
pub trait ModelBackend: Send + Sync {
    fn id(&self) -> &str;

    /// Generates a completion. Implementations return the backend text
    /// verbatim apart from stripping trailing whitespace.
    fn generate(&self, req: &ModelRequest) -> Result<ModelResponse, ModelError>;
}

/// Counting semaphore bounding in-flight calls to a shared backend.
#[derive(Debug)]
pub struct InFlightLimiter {
    max: usize,
    state: Mutex<usize>,
    cond: Condvar,
}

impl InFlightLimiter {
    pub fn new(max: usize) -> Self {
        InFlightLimiter {
            max: max.max(1),
            state: Mutex::new(0),
            cond: Condvar::new(),
        }
    }

    pub fn acquire(&self) -> InFlightGuard<'_> {
        let mut in_flight = self.state.lock().expect("limiter poisoned");
        while *in_flight >= self.max {
            in_flight = self.cond.wait(in_flight).expect("limiter poisoned");
        }
        *in_flight += 1;
        InFlightGuard { limiter: self }
    }
}

pub struct InFlightGuard<'a> {
    limiter: &'a InFlightLimiter,
}

impl Drop for InFlightGuard<'_> {
    fn drop(&mut self) {
        let mut in_flight = self.limiter.state.lock().expect("limiter poisoned");
        *in_flight -= 1;
        self.limiter.cond.notify_one();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    #[test]
    fn echo_round_trip_is_byte_exact() {
        let m = EchoModel;
        let text = "line one\n  indented ✓ bytes\tand tabs";
        let req = ModelRequest::text_only("sys", text);
        let resp = m.generate(&req).unwrap();
        assert_eq!(resp.text, text);
    }

    #[test]
    fn limiter_caps_in_flight() {
        let limiter = Arc::new(InFlightLimiter::new(2));
        let peak = Arc::new(AtomicUsize::new(0));
        let live = Arc::new(AtomicUsize::new(0));
        let mut handles = Vec::new();
        for _ in 0..8 {
            let (limiter, peak, live) = (limiter.clone(), peak.clone(), live.clone());
            handles.push(std::thread::spawn(move || {
                let _guard = limiter.acquire();
                let now = live.fetch_add(1, Ordering::SeqCst) + 1;
                peak.fetch_max(now, Ordering::SeqCst);
                std::thread::sleep(std::time::Duration::from_millis(5));
                live.fetch_sub(1, Ordering::SeqCst);
            }));
        }
        for h in handles {
            h.join().unwrap();
        }
        assert!(peak.load(Ordering::SeqCst) <= 2);
    }
}
