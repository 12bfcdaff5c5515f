//! Factory registry: models, agents, and tasks behind unique string ids.
//!
//! Components register a constructor taking the run configuration; the
//! runner resolves ids at preflight, so integrating a new component is a
//! single registration call. Nothing is constructed before preflight
//! passes.

use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;

use crate::agents::AgentConfig;
use crate::models::{ChatModel, EchoModel, ModelBackend};
use crate::runner::RunConfig;
use crate::tasks::{load_split, SplitLoad};

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("duplicate {kind} id {id:?}")]
    DuplicateId { kind: ComponentKind, id: String },
    #[error("unknown {kind} id {id:?}")]
    UnknownComponent { kind: ComponentKind, id: String },
    #[error("unknown component kind {0:?} (expected model, agent, or task)")]
    UnknownKind(String),
    #[error("{kind} {id:?} failed to construct: {reason}")]
    Construction {
        kind: ComponentKind,
        id: String,
        reason: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComponentKind {
    Model,
    Agent,
    Task,
}

impl std::fmt::Display for ComponentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ComponentKind::Model => "model",
            ComponentKind::Agent => "agent",
            ComponentKind::Task => "task",
        })
    }
}

impl std::str::FromStr for ComponentKind {
    type Err = RegistryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "model" => Ok(ComponentKind::Model),
            "agent" => Ok(ComponentKind::Agent),
            "task" => Ok(ComponentKind::Task),
            other => Err(RegistryError::UnknownKind(other.to_string())),
        }
    }
}

pub type ModelCtor = Box<dyn Fn(&RunConfig) -> Result<Arc<dyn ModelBackend>, String> + Send + Sync>;
pub type AgentCtor = Box<dyn Fn(&RunConfig) -> Result<AgentConfig, String> + Send + Sync>;
pub type TaskCtor = Box<dyn Fn(&RunConfig) -> Result<SplitLoad, String> + Send + Sync>;

/// Component registry. Construct with [`Registry::with_builtins`] for the
/// stock components, or [`Registry::empty`] for a bare one.
pub struct Registry {
    models: BTreeMap<String, ModelCtor>,
    agents: BTreeMap<String, AgentCtor>,
    tasks: BTreeMap<String, TaskCtor>,
}

impl Registry {
    pub fn empty() -> Self {
        Registry {
            models: BTreeMap::new(),
            agents: BTreeMap::new(),
            tasks: BTreeMap::new(),
        }
    }

    /// Registry pre-loaded with the stock components:
    ///
    /// - models: `echo`, `chat`, and the scripted policies
    ///   (`scripted-optimal`, `scripted-random`, `scripted-looper`,
    ///   `scripted-garbage`, `scripted-revise-once`, `scripted-guidable`);
    /// - agents: `navgpt[-cot|-reflection|-cot-reflection]` (text-summary
    ///   memory) and `mapgpt[...]` (text-map memory);
    /// - tasks: `fine`, `coarse`, `zero`.
    pub fn with_builtins() -> Self {
        let mut registry = Registry::empty();
        registry.register_builtin_models();
        registry.register_builtin_agents();
        registry.register_builtin_tasks();
        registry
    }

    fn register_builtin_models(&mut self) {
        self.register_model("echo", |_| Ok(Arc::new(EchoModel)))
            .expect("fresh registry");
        self.register_model("chat", |cfg| {
            Ok(Arc::new(ChatModel::new(
                "chat",
                cfg.model_settings.clone(),
                &cfg.asset_root,
            )))
        })
        .expect("fresh registry");
        crate::fixtures::register_scripted_models(self).expect("fresh registry");
    }

    fn register_builtin_agents(&mut self) {
        use crate::agents::{MemoryKind, Reasoning};
        let families = [
            ("navgpt", MemoryKind::TextSummary),
            ("mapgpt", MemoryKind::TextMap),
        ];
        let variants = [
            ("", Reasoning::Baseline),
            ("-cot", Reasoning::CoT),
            ("-reflection", Reasoning::Reflection),
            ("-cot-reflection", Reasoning::CoTReflection),
        ];
        for (family, memory) in families {
            for (suffix, reasoning) in variants {
                let id = format!("{family}{suffix}");
                self.register_agent(&id, move |cfg| {
                    let mut agent = AgentConfig::new(memory, reasoning);
                    if let Some(diagnostics) = &cfg.diagnostics {
                        agent.diagnostics = diagnostics.clone();
                    }
                    Ok(agent)
                })
                .expect("fresh registry");
            }
        }
    }

    fn register_builtin_tasks(&mut self) {
        use crate::tasks::Granularity;
        for granularity in [Granularity::Fine, Granularity::Coarse, Granularity::Zero] {
            self.register_task(granularity.dir_name(), move |cfg| {
                load_split(granularity, &cfg.split, &cfg.data_root, &cfg.asset_root)
                    .map_err(|e| e.to_string())
            })
            .expect("fresh registry");
        }
    }

    pub fn register_model(
        &mut self,
        id: &str,
        ctor: impl Fn(&RunConfig) -> Result<Arc<dyn ModelBackend>, String> + Send + Sync + 'static,
    ) -> Result<(), RegistryError> {
        if self.models.contains_key(id) {
            return Err(RegistryError::DuplicateId {
                kind: ComponentKind::Model,
                id: id.to_string(),
            });
        }
        self.models.insert(id.to_string(), Box::new(ctor));
        Ok(())
    }

    pub fn register_agent(
        &mut self,
        id: &str,
        ctor: impl Fn(&RunConfig) -> Result<AgentConfig, String> + Send + Sync + 'static,
    ) -> Result<(), RegistryError> {
        if self.agents.contains_key(id) {
            return Err(RegistryError::DuplicateId {
                kind: ComponentKind::Agent,
                id: id.to_string(),
            });
        }
        self.agents.insert(id.to_string(), Box::new(ctor));
        Ok(())
    }

    pub fn register_task(
        &mut self,
        id: &str,
        ctor: impl Fn(&RunConfig) -> Result<SplitLoad, String> + Send + Sync + 'static,
    ) -> Result<(), RegistryError> {
        if self.tasks.contains_key(id) {
            return Err(RegistryError::DuplicateId {
                kind: ComponentKind::Task,
                id: id.to_string(),
            });
        }
        self.tasks.insert(id.to_string(), Box::new(ctor));
        Ok(())
    }

    pub fn has(&self, kind: ComponentKind, id: &str) -> bool {
        match kind {
            ComponentKind::Model => self.models.contains_key(id),
            ComponentKind::Agent => self.agents.contains_key(id),
            ComponentKind::Task => self.tasks.contains_key(id),
        }
    }

    pub fn ids(&self, kind: ComponentKind) -> Vec<&str> {
        match kind {
            ComponentKind::Model => self.models.keys().map(|s| s.as_str()).collect(),
            ComponentKind::Agent => self.agents.keys().map(|s| s.as_str()).collect(),
            ComponentKind::Task => self.tasks.keys().map(|s| s.as_str()).collect(),
        }
    }

    pub fn build_model(
        &self,
        id: &str,
        cfg: &RunConfig,
    ) -> Result<Arc<dyn ModelBackend>, RegistryError> {
        let ctor = self
            .models
            .get(id)
            .ok_or_else(|| RegistryError::UnknownComponent {
                kind: ComponentKind::Model,
                id: id.to_string(),
            })?;
        ctor(cfg).map_err(|reason| RegistryError::Construction {
            kind: ComponentKind::Model,
            id: id.to_string(),
            reason,
        })
    }

    pub fn build_agent(&self, id: &str, cfg: &RunConfig) -> Result<AgentConfig, RegistryError> {
        let ctor = self
            .agents
            .get(id)
            .ok_or_else(|| RegistryError::UnknownComponent {
                kind: ComponentKind::Agent,
                id: id.to_string(),
            })?;
        ctor(cfg).map_err(|reason| RegistryError::Construction {
            kind: ComponentKind::Agent,
            id: id.to_string(),
            reason,
        })
    }

    pub fn build_task(&self, id: &str, cfg: &RunConfig) -> Result<SplitLoad, RegistryError> {
        let ctor = self
            .tasks
            .get(id)
            .ok_or_else(|| RegistryError::UnknownComponent {
                kind: ComponentKind::Task,
                id: id.to_string(),
            })?;
        ctor(cfg).map_err(|reason| RegistryError::Construction {
            kind: ComponentKind::Task,
            id: id.to_string(),
            reason,
        })
    }
}
