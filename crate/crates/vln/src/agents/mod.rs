//! Agent configurations and the decide loop.
//!
//! Eight configurations: two memory families (text summary, text map) times
//! four reasoning variants (baseline, CoT, reflection, CoT+reflection),
//! optionally extended with the oracle-assist and failure-exemplar
//! diagnostic modes.
//!
//! A step decision calls the model, parses the output, and validates the
//! action against the offered candidates. Parse failures and invalid
//! actions re-prompt with an explicit error sentence up to the retry
//! budget; exhaustion is a generation-error outcome, recorded rather than
//! thrown. Reflection variants honor a `Revise` declaration with exactly
//! one replanning call before moving.

mod memory;
mod oracle;
pub mod prompt;

pub use memory::{pose_after_move, AgentMemory, HistoryEntry, MemoryKind, TopoMemory};
pub use oracle::{
    oracle_assist, Diagnostics, FailureIclCfg, OracleAssistCfg, OracleTrigger, TriggerReason,
};
pub use prompt::{build_prompt, ExemplarSet, FailureExemplar, PromptExtras, Template, TemplateSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::models::{ModelBackend, ModelRequest};
use crate::observation::Observation;
use crate::parser::{self, ActionToken, ExecutableAction, ParseOutcome};
use crate::tasks::EpisodeSpec;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("template invalid: {0}")]
    TemplateInvalid(String),
    #[error("exemplar set invalid: {0}")]
    ExemplarsInvalid(String),
}

/// Reasoning variants layered on top of a memory family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reasoning {
    Baseline,
    CoT,
    Reflection,
    CoTReflection,
}

impl Reasoning {
    pub fn template_name(&self) -> &'static str {
        match self {
            Reasoning::Baseline => "baseline",
            Reasoning::CoT => "cot",
            Reasoning::Reflection => "reflection",
            Reasoning::CoTReflection => "cot_reflection",
        }
    }

    pub fn reflects(&self) -> bool {
        matches!(self, Reasoning::Reflection | Reasoning::CoTReflection)
    }
}

/// One of the eight agent configurations, plus optional diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub memory: MemoryKind,
    pub reasoning: Reasoning,
    #[serde(default)]
    pub diagnostics: Diagnostics,
}

impl AgentConfig {
    pub fn new(memory: MemoryKind, reasoning: Reasoning) -> Self {
        AgentConfig {
            memory,
            reasoning,
            diagnostics: Diagnostics::default(),
        }
    }
}

/// Keep-or-revise declaration of reflection variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FinalDecision {
    Keep,
    Revise,
}

/// A parsed, validated decision as recorded in the trajectory log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentDecision {
    pub raw_text: String,
    pub action: ActionToken,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reasoning_trace: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reflection: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_decision: Option<FinalDecision>,
}

/// One model call made while deciding, kept verbatim for the log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attempt {
    pub request: ModelRequest,
    /// Raw model output; absent when the call itself failed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<String>,
    /// Why a further attempt followed (parse failure, invalid action,
    /// transport error, revise).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Result of one step's decide loop.
#[derive(Debug)]
pub enum DecisionOutcome {
    Decided {
        decision: AgentDecision,
        action: ExecutableAction,
    },
    /// Retry budget exhausted without a parseable, valid action.
    GenerationError,
}

#[derive(Debug)]
pub struct StepDecision {
    pub attempts: Vec<Attempt>,
    pub outcome: DecisionOutcome,
}

fn parse_for(reasoning: Reasoning, text: &str) -> Result<ParseOutcome, parser::ParseError> {
    if reasoning.reflects() {
        parser::parse_reflection(text)
    } else {
        parser::parse_baseline(text)
    }
}

fn decision_from(reasoning: Reasoning, raw: &str, outcome: &ParseOutcome) -> AgentDecision {
    let final_decision = if reasoning.reflects() {
        outcome
            .decision_text
            .as_deref()
            .and_then(|d| match d.to_ascii_lowercase().as_str() {
                "keep" => Some(FinalDecision::Keep),
                "revise" => Some(FinalDecision::Revise),
                _ => None,
            })
    } else {
        None
    };
    AgentDecision {
        raw_text: raw.to_string(),
        action: outcome.action_token.clone(),
        reasoning_trace: parser::extract_tag(raw, "Reasoning"),
        reflection: outcome.reflection_text.clone(),
        final_decision,
    }
}

/// Runs one call-parse-validate pass with the step's retry budget. Each
/// failed pass re-prompts with the base task text plus a single explicit
/// error sentence.
fn attempt_pass(
    base: &ModelRequest,
    reasoning: Reasoning,
    obs: &Observation,
    model: &dyn ModelBackend,
    retries: usize,
    attempts: &mut Vec<Attempt>,
) -> Option<(AgentDecision, ExecutableAction)> {
    let mut error_sentence: Option<String> = None;
    for _ in 0..=retries {
        let mut request = base.clone();
        if let Some(error) = &error_sentence {
            request.task_text = format!("{}\n\n{}", base.task_text, error);
        }
        let response = match model.generate(&request) {
            Ok(r) => r,
            Err(e) => {
                attempts.push(Attempt {
                    request,
                    response: None,
                    note: Some(format!("model call failed: {e}")),
                });
                error_sentence = Some(
                    "Your previous reply did not arrive. Answer again using exactly the \
                     required output format."
                        .to_string(),
                );
                continue;
            }
        };
        match parse_for(reasoning, &response.text)
            .and_then(|parsed| parser::validate_action(&parsed, obs).map(|a| (parsed, a)))
        {
            Ok((parsed, action)) => {
                attempts.push(Attempt {
                    request,
                    response: Some(response.text.clone()),
                    note: None,
                });
                return Some((decision_from(reasoning, &response.text, &parsed), action));
            }
            Err(e) => {
                attempts.push(Attempt {
                    request,
                    response: Some(response.text.clone()),
                    note: Some(e.to_string()),
                });
                error_sentence = Some(format!(
                    "Your previous reply could not be executed ({e}). Answer again using \
                     exactly the required output format, choosing one of the offered options."
                ));
            }
        }
    }
    None
}

/// Decides one step: build the prompt, call the model, parse, validate,
/// retry on failure, and honor a reflection `Revise` with one replanning
/// call.
#[allow(clippy::too_many_arguments)]
pub fn decide(
    cfg: &AgentConfig,
    templates: &TemplateSet,
    episode: &EpisodeSpec,
    obs: &Observation,
    memory: &AgentMemory,
    extras: &PromptExtras,
    model: &dyn ModelBackend,
    retries: usize,
) -> StepDecision {
    let base = build_prompt(cfg, templates, episode, obs, memory, extras);
    let mut attempts = Vec::new();

    let first = attempt_pass(&base, cfg.reasoning, obs, model, retries, &mut attempts);
    let Some((decision, action)) = first else {
        return StepDecision {
            attempts,
            outcome: DecisionOutcome::GenerationError,
        };
    };

    if decision.final_decision == Some(FinalDecision::Revise) {
        // One replanning round per step; a second Revise is not honored.
        if let Some(last) = attempts.last_mut() {
            last.note = Some("revise declared; replanning".to_string());
        }
        let mut replan = base.clone();
        replan.task_text = format!(
            "{}\n\nYou declared Revise on your previous decision. Replan now and answer \
             with a different, valid action.",
            base.task_text
        );
        match attempt_pass(&replan, cfg.reasoning, obs, model, retries, &mut attempts) {
            Some((mut revised, action)) => {
                revised.final_decision = decision.final_decision;
                return StepDecision {
                    attempts,
                    outcome: DecisionOutcome::Decided {
                        decision: revised,
                        action,
                    },
                };
            }
            None => {
                return StepDecision {
                    attempts,
                    outcome: DecisionOutcome::GenerationError,
                }
            }
        }
    }

    StepDecision {
        attempts,
        outcome: DecisionOutcome::Decided { decision, action },
    }
}

#[cfg(test)]
mod tests {
    use super::memory::tests_support::line_world_and_start;
    use super::*;
    use crate::models::ScriptedModel;
    use crate::observation::{compose_observation, ObservationFormat};
    use crate::tasks::{Granularity, Instruction};

    fn episode() -> EpisodeSpec {
        let (_, start) = line_world_and_start();
        EpisodeSpec {
            episode_id: "ep0".to_string(),
            scan_id: "line".to_string(),
            start,
            instruction: Instruction {
                text: "Walk east.".to_string(),
                granularity: Granularity::Fine,
                object_category: None,
            },
            instruction_variants: Vec::new(),
            goals: vec!["C".to_string()],
            gt_path: vec!["A".into(), "B".into(), "C".into()],
            gt_length_m: 4.0,
        }
    }

    fn setup() -> (
        crate::world::WorldGraph,
        Observation,
        AgentMemory,
        TemplateSet,
    ) {
        let (g, start) = line_world_and_start();
        let obs = compose_observation(&g, &start, ObservationFormat::FourView, true).unwrap();
        let memory = AgentMemory::new(MemoryKind::TextSummary, &g, &start).unwrap();
        (g, obs, memory, TemplateSet::builtin())
    }

    #[test]
    fn scripted_marker_becomes_move() {
        let (_g, obs, memory, templates) = setup();
        let cfg = AgentConfig::new(MemoryKind::TextSummary, Reasoning::Baseline);
        let model = ScriptedModel::new("s", vec!["Action: 1".to_string()]);
        let step = decide(
            &cfg,
            &templates,
            &episode(),
            &obs,
            &memory,
            &PromptExtras::default(),
            &model,
            3,
        );
        match step.outcome {
            DecisionOutcome::Decided { action, decision } => {
                assert!(matches!(action, ExecutableAction::MoveTo { marker: 1, .. }));
                assert_eq!(decision.action, ActionToken::Marker(1));
            }
            _ => panic!("expected a decision"),
        }
        assert_eq!(step.attempts.len(), 1);
    }

    #[test]
    fn garbage_thrice_exhausts_into_generation_error() {
        let (_g, obs, memory, templates) = setup();
        let cfg = AgentConfig::new(MemoryKind::TextSummary, Reasoning::Baseline);
        let model = ScriptedModel::new("g", vec!["no clue".to_string()]).repeating();
        let step = decide(
            &cfg,
            &templates,
            &episode(),
            &obs,
            &memory,
            &PromptExtras::default(),
            &model,
            3,
        );
        assert!(matches!(step.outcome, DecisionOutcome::GenerationError));
        // Initial attempt plus exactly three retries.
        assert_eq!(step.attempts.len(), 4);
        assert!(step.attempts.iter().all(|a| a.note.is_some()));
        // Retry prompts carry the explicit error signal.
        assert!(step.attempts[1]
            .request
            .task_text
            .contains("could not be executed"));
    }

    #[test]
    fn invalid_marker_retries_then_succeeds() {
        let (_g, obs, memory, templates) = setup();
        let cfg = AgentConfig::new(MemoryKind::TextSummary, Reasoning::Baseline);
        let model = ScriptedModel::new("s", vec!["Action: 9".to_string(), "Action: 1".to_string()]);
        let step = decide(
            &cfg,
            &templates,
            &episode(),
            &obs,
            &memory,
            &PromptExtras::default(),
            &model,
            3,
        );
        assert!(matches!(step.outcome, DecisionOutcome::Decided { .. }));
        assert_eq!(step.attempts.len(), 2);
        assert!(step.attempts[0]
            .note
            .as_deref()
            .unwrap()
            .contains("unknown marker"));
    }

    #[test]
    fn revise_triggers_one_replanning_call() {
        let (_g, obs, memory, templates) = setup();
        let cfg = AgentConfig::new(MemoryKind::TextSummary, Reasoning::Reflection);
        let model = ScriptedModel::new(
            "s",
            vec![
                "Action: 1\n<Reflection>Too hasty.</Reflection>\nFinal Decision: Revise"
                    .to_string(),
                "Action: Stop\n<Reflection>Confident.</Reflection>\nFinal Decision: Keep"
                    .to_string(),
            ],
        );
        let step = decide(
            &cfg,
            &templates,
            &episode(),
            &obs,
            &memory,
            &PromptExtras::default(),
            &model,
            3,
        );
        match step.outcome {
            DecisionOutcome::Decided { action, decision } => {
                assert_eq!(action, ExecutableAction::Stop);
                assert_eq!(decision.reflection.as_deref(), Some("Confident."));
            }
            _ => panic!("expected a decision"),
        }
        assert_eq!(step.attempts.len(), 2);
        assert!(step.attempts[1].request.task_text.contains("Replan now"));
        assert!(step.attempts[0].note.as_deref().unwrap().contains("revise"));
    }

    #[test]
    fn keep_decision_does_not_replan() {
        let (_g, obs, memory, templates) = setup();
        let cfg = AgentConfig::new(MemoryKind::TextSummary, Reasoning::Reflection);
        let model = ScriptedModel::new(
            "s",
            vec!["Action: 1\n<Reflection>Fine.</Reflection>\nFinal Decision: Keep".to_string()],
        );
        let step = decide(
            &cfg,
            &templates,
            &episode(),
            &obs,
            &memory,
            &PromptExtras::default(),
            &model,
            3,
        );
        assert!(matches!(step.outcome, DecisionOutcome::Decided { .. }));
        assert_eq!(step.attempts.len(), 1);
    }

    #[test]
    fn baseline_never_carries_final_decision() {
        let (_g, obs, memory, templates) = setup();
        let cfg = AgentConfig::new(MemoryKind::TextSummary, Reasoning::Baseline);
        // Baseline output that happens to contain reflection-looking text.
        let model = ScriptedModel::new("s", vec!["Action: 1\nFinal Decision: Revise".to_string()]);
        let step = decide(
            &cfg,
            &templates,
            &episode(),
            &obs,
            &memory,
            &PromptExtras::default(),
            &model,
            3,
        );
        match step.outcome {
            DecisionOutcome::Decided { decision, .. } => {
                assert_eq!(decision.final_decision, None);
            }
            _ => panic!("expected a decision"),
        }
        assert_eq!(step.attempts.len(), 1);
    }
}
