//! Prompt construction from templates.
//!
//! The exact wording of every prompt is versioned data, not code: one
//! template file per (memory family, reasoning variant) under
//! `templates/<memory>/<variant>.txt`, with the system and task components
//! separated by a `===TASK===` line. The task component carries the named
//! placeholders `{instruction}`, `{history}`, `{heading}`, `{elevation}`,
//! `{options}`, `{map}`, `{guidance}`, `{exemplars}`.
//!
//! Construction is a pure function: identical (config, episode, observation,
//! memory, extras) yield byte-identical request text.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::memory::{AgentMemory, HistoryEntry, MemoryKind, TopoMemory};
use super::{AgentConfig, AgentError, Reasoning};
use crate::models::{GenerationParams, ModelRequest};
use crate::observation::Observation;
use crate::tasks::EpisodeSpec;

const TASK_SEPARATOR: &str = "===TASK===";

/// History sentinel before the first move.
pub const NO_HISTORY_SENTINEL: &str = "No navigation history yet.";

/// One prompt template: persistent system component plus the per-step task
/// component with placeholders.
#[derive(Debug, Clone)]
pub struct Template {
    pub system: String,
    pub task: String,
}

impl Template {
    fn parse(raw: &str, name: &str) -> Result<Self, AgentError> {
        let mut parts = raw.splitn(2, TASK_SEPARATOR);
        let system = parts.next().unwrap_or_default().trim_end().to_string();
        let task = parts
            .next()
            .ok_or_else(|| {
                AgentError::TemplateInvalid(format!("{name}: missing {TASK_SEPARATOR} separator"))
            })?
            .trim_start_matches('\n')
            .to_string();
        Ok(Template { system, task })
    }
}

/// The eight templates, keyed by memory family and reasoning variant.
#[derive(Debug, Clone)]
pub struct TemplateSet {
    templates: BTreeMap<(MemoryKind, Reasoning), Template>,
}

macro_rules! builtin {
    ($memory:literal, $variant:literal) => {
        include_str!(concat!("../../templates/", $memory, "/", $variant, ".txt"))
    };
}

impl TemplateSet {
    /// The templates shipped with the crate.
    pub fn builtin() -> Self {
        let raw = [
            (
                MemoryKind::TextSummary,
                Reasoning::Baseline,
                builtin!("text_summary", "baseline"),
            ),
            (
                MemoryKind::TextSummary,
                Reasoning::CoT,
                builtin!("text_summary", "cot"),
            ),
            (
                MemoryKind::TextSummary,
                Reasoning::Reflection,
                builtin!("text_summary", "reflection"),
            ),
            (
                MemoryKind::TextSummary,
                Reasoning::CoTReflection,
                builtin!("text_summary", "cot_reflection"),
            ),
            (
                MemoryKind::TextMap,
                Reasoning::Baseline,
                builtin!("text_map", "baseline"),
            ),
            (
                MemoryKind::TextMap,
                Reasoning::CoT,
                builtin!("text_map", "cot"),
            ),
            (
                MemoryKind::TextMap,
                Reasoning::Reflection,
                builtin!("text_map", "reflection"),
            ),
            (
                MemoryKind::TextMap,
                Reasoning::CoTReflection,
                builtin!("text_map", "cot_reflection"),
            ),
        ];
        let templates = raw
            .into_iter()
            .map(|(memory, variant, text)| {
                let template = Template::parse(text, variant.template_name())
                    .expect("builtin templates are well-formed");
                ((memory, variant), template)
            })
            .collect();
        TemplateSet { templates }
    }

    /// Loads `<dir>/<memory>/<variant>.txt` for all eight combinations.
    pub fn load_dir(dir: &Path) -> Result<Self, AgentError> {
        let mut templates = BTreeMap::new();
        for memory in [MemoryKind::TextSummary, MemoryKind::TextMap] {
            for variant in [
                Reasoning::Baseline,
                Reasoning::CoT,
                Reasoning::Reflection,
                Reasoning::CoTReflection,
            ] {
                let path = dir
                    .join(memory.template_dir())
                    .join(format!("{}.txt", variant.template_name()));
                let raw = std::fs::read_to_string(&path)
                    .map_err(|e| AgentError::TemplateInvalid(format!("{}: {e}", path.display())))?;
                let template = Template::parse(&raw, &path.display().to_string())?;
                templates.insert((memory, variant), template);
            }
        }
        Ok(TemplateSet { templates })
    }

    pub fn get(&self, memory: MemoryKind, variant: Reasoning) -> &Template {
        &self.templates[&(memory, variant)]
    }
}

/// A curated failure case for failure-aware in-context learning.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FailureExemplar {
    pub instruction_excerpt: String,
    pub wrong_decision: String,
    pub consequence: String,
}

/// A named set of failure exemplars.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExemplarSet {
    pub id: String,
    pub exemplars: Vec<FailureExemplar>,
}

impl ExemplarSet {
    /// The three sample exemplars shipped with the crate.
    pub fn builtin_default() -> Self {
        serde_json::from_str(include_str!("../../exemplars/default.json"))
            .expect("builtin exemplar set is well-formed")
    }

    pub fn load(path: &Path) -> Result<Self, AgentError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| AgentError::ExemplarsInvalid(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| AgentError::ExemplarsInvalid(format!("{}: {e}", path.display())))
    }

    /// Renders the first `n` exemplars as prompt blocks.
    pub fn blocks(&self, n: usize) -> Result<String, AgentError> {
        if n > self.exemplars.len() {
            return Err(AgentError::ExemplarsInvalid(format!(
                "requested {n} exemplars but set {} holds {}",
                self.id,
                self.exemplars.len()
            )));
        }
        let mut out = String::new();
        for (i, ex) in self.exemplars.iter().take(n).enumerate() {
            out.push_str(&format!(
                "Failure example {}:\nInstruction: {}\nWrong decision: {}\nConsequence: {}\n\n",
                i + 1,
                ex.instruction_excerpt,
                ex.wrong_decision,
                ex.consequence
            ));
        }
        if n > 0 {
            out.push_str("Avoid the mistakes illustrated above.\n\n");
        }
        Ok(out)
    }
}

/// Per-step inputs that are not part of the durable memory state.
#[derive(Debug, Clone, Default)]
pub struct PromptExtras {
    /// Oracle guidance to inject under the "Assistant guidance" heading.
    pub guidance: Option<String>,
    /// Pre-rendered failure exemplar blocks (see [`ExemplarSet::blocks`]).
    pub exemplar_blocks: String,
    pub params: GenerationParams,
}

/// Renders the options block: one line per candidate keyed by its relative
/// direction, in marker order, plus the explicit stop entry.
pub fn render_options(obs: &Observation) -> String {
    let mut out = String::new();
    for c in &obs.candidates {
        let caption = c.caption.as_deref().unwrap_or("an unannotated location");
        out.push_str(&format!(
            "- {}: [{}] {} ({:.1} m)\n",
            c.relative_bucket, c.marker, caption, c.distance
        ));
    }
    out.push_str("- Stop: end the episode at the current position");
    out
}

/// Renders text-summary history: one line per executed step.
pub fn render_history(entries: &[HistoryEntry]) -> String {
    if entries.is_empty() {
        return NO_HISTORY_SENTINEL.to_string();
    }
    entries
        .iter()
        .map(|e| {
            format!(
                "Step {}: turned {:+.0} degrees, moved forward {:.1} meters, arriving at: {}",
                e.step, e.turn_angle, e.forward, e.destination_summary
            )
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Renders the map-connectivity paragraph: one line per seen node.
pub fn render_map(map: &TopoMemory) -> String {
    map.seen_labels()
        .iter()
        .map(|&label| {
            let neighbors = map.neighbors_of(label);
            let list = if neighbors.is_empty() {
                "nothing yet".to_string()
            } else {
                neighbors
                    .iter()
                    .map(|&n| TopoMemory::label_name(n))
                    .collect::<Vec<_>>()
                    .join(", ")
            };
            format!("{} is connected to {}", TopoMemory::label_name(label), list)
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Renders the exploration state for text-map agents.
pub fn render_exploration_state(map: &TopoMemory) -> String {
    let name = |labels: &[usize]| -> String {
        if labels.is_empty() {
            "none".to_string()
        } else {
            labels
                .iter()
                .map(|&l| TopoMemory::label_name(l))
                .collect::<Vec<_>>()
                .join(", ")
        }
    };
    format!(
        "You are at {} ({}).\nVisited nodes: {}.\nUnvisited frontier: {}.",
        TopoMemory::label_name(map.current()),
        map.summary_of(map.current()),
        name(&map.visited_labels()),
        name(&map.frontier_labels()),
    )
}

/// Builds the full model request for one step. Pure.
pub fn build_prompt(
    cfg: &AgentConfig,
    templates: &TemplateSet,
    episode: &EpisodeSpec,
    obs: &Observation,
    memory: &AgentMemory,
    extras: &PromptExtras,
) -> ModelRequest {
    let template = templates.get(cfg.memory, cfg.reasoning);
    let (history, map_text) = match memory {
        AgentMemory::Summary(entries) => (render_history(entries), String::new()),
        AgentMemory::Map(map) => (render_exploration_state(map), render_map(map)),
    };
    let guidance = match &extras.guidance {
        Some(text) => format!("\nAssistant guidance: {text}\n"),
        None => String::new(),
    };
    let task = template
        .task
        .replace("{instruction}", &episode.instruction.text)
        .replace("{history}", &history)
        .replace("{map}", &map_text)
        .replace("{heading}", &format!("{:.0}", obs.pose.heading))
        .replace("{elevation}", &format!("{:.0}", obs.pose.elevation))
        .replace("{options}", &render_options(obs))
        .replace("{guidance}", &guidance)
        .replace("{exemplars}", &extras.exemplar_blocks);
    let images: Vec<String> = obs.views.iter().filter_map(|v| v.image.clone()).collect();
    ModelRequest {
        system_text: template.system.clone(),
        task_text: task,
        images,
        params: extras.params.clone(),
    }
}
