//! Deterministic backends for tests and offline runs.

use std::sync::Mutex;
use std::time::Instant;

use super::{ModelBackend, ModelError, ModelRequest, ModelResponse, UsageCounters};

/// Returns the request's task text verbatim. Useful for transport-fidelity
/// checks and prompt debugging.
#[derive(Debug, Default)]
pub struct EchoModel;

impl ModelBackend for EchoModel {
    fn id(&self) -> &str {
        "echo"
    }

    fn generate(&self, req: &ModelRequest) -> Result<ModelResponse, ModelError> {
        Ok(ModelResponse {
            text: req.task_text.trim_end().to_string(),
            latency_s: 0.0,
            usage: UsageCounters::default(),
            backend_id: self.id().to_string(),
        })
    }
}

/// Plays back a fixed sequence of responses, one per call, in order.
///
/// Fully deterministic: the same request sequence always yields the same
/// response sequence. Calls past the end return [`ModelError::ScriptExhausted`]
/// unless the script is set to repeat its last entry or cycle from the top.
#[derive(Debug)]
pub struct ScriptedModel {
    id: String,
    script: Vec<String>,
    cursor: Mutex<usize>,
    exhausted: Exhausted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Exhausted {
    Error,
    RepeatLast,
    Cycle,
}

impl ScriptedModel {
    pub fn new(id: impl Into<String>, script: Vec<String>) -> Self {
        ScriptedModel {
            id: id.into(),
            script,
            cursor: Mutex::new(0),
            exhausted: Exhausted::Error,
        }
    }

    /// After the script runs out, keep answering with the final entry.
    pub fn repeating(mut self) -> Self {
        self.exhausted = Exhausted::RepeatLast;
        self
    }

    /// Wrap around to the top of the script instead of running out.
    pub fn cycling(mut self) -> Self {
        self.exhausted = Exhausted::Cycle;
        self
    }

    pub fn calls_made(&self) -> usize {
        *self.cursor.lock().expect("cursor poisoned")
    }
}

impl ModelBackend for ScriptedModel {
    fn id(&self) -> &str {
        &self.id
    }

    fn generate(&self, _req: &ModelRequest) -> Result<ModelResponse, ModelError> {
        let started = Instant::now();
        let mut cursor = self.cursor.lock().expect("cursor poisoned");
        let index = *cursor;
        *cursor += 1;
        let text = if index < self.script.len() {
            self.script[index].clone()
        } else if self.script.is_empty() {
            return Err(ModelError::ScriptExhausted(0));
        } else {
            match self.exhausted {
                Exhausted::RepeatLast => self.script[self.script.len() - 1].clone(),
                Exhausted::Cycle => self.script[index % self.script.len()].clone(),
                Exhausted::Error => return Err(ModelError::ScriptExhausted(self.script.len())),
            }
        };
        Ok(ModelResponse {
            text: text.trim_end().to_string(),
            latency_s: started.elapsed().as_secs_f64(),
            usage: UsageCounters::default(),
            backend_id: self.id.clone(),
        })
    }
}
