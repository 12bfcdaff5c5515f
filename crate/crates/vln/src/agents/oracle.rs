//! Diagnostic modes: oracle-guided navigation and failure-aware in-context
//! learning.
//!
//! The oracle is queried when the navigator struggles — the running
//! trajectory trips the loop detector, or geodesic distance to the goal has
//! strictly increased for a configured number of consecutive steps. Each
//! trigger event allows at most one query; its guidance is injected into the
//! next prompt under a marked "Assistant guidance" heading.

use serde::{Deserialize, Serialize};

use crate::analysis::{detect_loops, LoopSegment};
use crate::models::{ModelBackend, ModelRequest};
use crate::observation::Observation;
use crate::tasks::EpisodeSpec;
use crate::{Real, ViewpointId};

/// Oracle-assist configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleAssistCfg {
    /// Registry id of the oracle model.
    pub model: String,
    /// Consecutive steps of strictly increasing goal distance that fire the
    /// regression trigger.
    #[serde(default = "default_regress_steps")]
    pub regress_steps: usize,
}

fn default_regress_steps() -> usize {
    3
}

/// Failure-aware in-context learning configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureIclCfg {
    /// Number of failure exemplars to prepend (1–3 in practice).
    pub n: usize,
    /// Exemplar set id: `default` for the built-in set, otherwise a path to
    /// a JSON exemplar file.
    #[serde(default = "default_exemplar_set")]
    pub exemplar_set: String,
}

fn default_exemplar_set() -> String {
    "default".to_string()
}

/// Optional diagnostic modes of an agent configuration.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_assist: Option<OracleAssistCfg>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_icl: Option<FailureIclCfg>,
}

/// Why the oracle was queried.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TriggerReason {
    /// The loop detector flagged the running trajectory.
    Looping,
    /// Goal distance strictly increased for the configured streak.
    MovingAway,
}

impl TriggerReason {
    fn as_text(&self) -> &'static str {
        match self {
            TriggerReason::Looping => "looping over the same viewpoints",
            TriggerReason::MovingAway => "moving steadily away from the goal",
        }
    }
}

/// Trigger state tracked across an episode. A trigger event is a change of
/// the flagged loop-segment set, or the regression streak reaching its
/// threshold; each event permits one oracle query.
#[derive(Debug, Clone)]
pub struct OracleTrigger {
    regress_steps: usize,
    last_segments: Vec<LoopSegment>,
    last_goal_dist: Option<Real>,
    streak: usize,
    streak_fired: bool,
}

impl OracleTrigger {
    pub fn new(regress_steps: usize) -> Self {
        OracleTrigger {
            regress_steps: regress_steps.max(1),
            last_segments: Vec::new(),
            last_goal_dist: None,
            streak: 0,
            streak_fired: false,
        }
    }

    /// Observes the trajectory after a move; returns a reason when a new
    /// trigger event fires.
    pub fn observe(&mut self, executed: &[ViewpointId], goal_dist: Real) -> Option<TriggerReason> {
        let mut fired = None;

        let segments = detect_loops(executed);
        if !segments.is_empty() && segments != self.last_segments {
            fired = Some(TriggerReason::Looping);
        }
        self.last_segments = segments;

        if let Some(last) = self.last_goal_dist {
            if goal_dist > last {
                self.streak += 1;
            } else {
                self.streak = 0;
                self.streak_fired = false;
            }
        }
        self.last_goal_dist = Some(goal_dist);
        if fired.is_none() && self.streak >= self.regress_steps && !self.streak_fired {
            self.streak_fired = true;
            fired = Some(TriggerReason::MovingAway);
        }
        fired
    }
}

/// Queries the oracle for guidance. The request reuses the navigator's
/// current observation (options text and images) plus enough identifiers
/// for a world-aware oracle to localize the agent. A failing oracle call is
/// logged and skipped, never fatal.
pub fn oracle_assist(
    episode: &EpisodeSpec,
    obs: &Observation,
    executed: &[ViewpointId],
    reason: TriggerReason,
    oracle: &dyn ModelBackend,
) -> Option<String> {
    let recent: Vec<&str> = executed.iter().rev().take(6).map(|s| s.as_str()).collect();
    let trail = recent.into_iter().rev().collect::<Vec<_>>().join(" -> ");
    let task_text = format!(
        "Episode: {}\nCurrent viewpoint: {}\nInstruction: {}\nRecent trajectory: {}\n\
         Navigable options:\n{}\nThe navigator appears to be {}. \
         Give short, concrete guidance: which option to take next, or whether to stop.",
        episode.episode_id,
        obs.pose.viewpoint,
        episode.instruction.text,
        trail,
        super::prompt::render_options(obs),
        reason.as_text(),
    );
    let request = ModelRequest {
        system_text: "You are an experienced navigation oracle. You see another agent's \
                      observation and suggest a plan in one or two sentences."
            .to_string(),
        task_text,
        images: obs.views.iter().filter_map(|v| v.image.clone()).collect(),
        params: Default::default(),
    };
    match oracle.generate(&request) {
        Ok(resp) => Some(resp.text),
        Err(e) => {
            log::warn!(
                "oracle unavailable for episode {}: {e}; guidance skipped",
                episode.episode_id
            );
            None
        }
    }
}
