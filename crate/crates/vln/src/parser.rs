//! Turns raw model text into a validated navigation action.
//!
//! Two-stage parsing: stage 1 locates an `Action` declaration and extracts
//! the action value from a bounded window after it, tolerating markdown
//! symbols and stray decoration; stage 2 (reflection-enabled agents only)
//! captures `Reflection` and `Decision`/`Final Decision` blocks as metadata.
//! Metadata never alters the action token — revise handling lives in the
//! agent, keyed on the decision text.
//!
//! All scanning is bounded and linear; parsing is deterministic and total.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Direction;
use crate::observation::Observation;
use crate::ViewpointId;

/// Width of the value window following an `Action` declaration, in
/// characters. Wide enough for numerals plus decoration without swallowing
/// later text.
pub const ACTION_WINDOW_CHARS: usize = 64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("no Action declaration with a usable value was found")]
    NoActionFound,
    #[error("invalid action: {0}")]
    InvalidAction(InvalidActionReason),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InvalidActionReason {
    /// Numeric marker not present in the candidate set.
    UnknownMarker,
    /// Direction token with no candidate in that bucket.
    EmptyBucket,
    /// Direction token with two or more candidates in that bucket.
    AmbiguousBucket,
}

impl std::fmt::Display for InvalidActionReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            InvalidActionReason::UnknownMarker => "unknown marker",
            InvalidActionReason::EmptyBucket => "no candidate in that direction",
            InvalidActionReason::AmbiguousBucket => "more than one candidate in that direction",
        };
        f.write_str(s)
    }
}

/// The raw action value extracted from text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ActionToken {
    Marker(u32),
    Direction(Direction),
    Stop,
}

impl std::fmt::Display for ActionToken {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ActionToken::Marker(m) => write!(f, "{m}"),
            ActionToken::Direction(d) => write!(f, "{d}"),
            ActionToken::Stop => f.write_str("Stop"),
        }
    }
}

/// Outcome of stage-1 (+ optional stage-2) parsing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParseOutcome {
    pub action_token: ActionToken,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reflection_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decision_text: Option<String>,
    /// Tolerance notes recorded while scanning.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
}

/// A concrete, executable action resolved against an observation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExecutableAction {
    MoveTo { marker: u32, target: ViewpointId },
    Stop,
}

static ACTION_DECL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\baction\b").expect("static regex"));
static NUMBER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\d+").expect("static regex"));
static STOP: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)\bstop\b").expect("static regex"));
static DIRECTION: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\b(left|front|right|back)\b").expect("static regex"));
static REFLECTION_TAG: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?is)<\s*reflection\s*>(.*?)<\s*/\s*reflection\s*>").expect("static regex")
});
static REFLECTION_LINE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)^\s*\**reflection\**\s*[:\-]\s*(.+)$").expect("static regex")
});
static DECISION: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)\b(?:final\s+)?decision\b[\s:*_`\->—→=]*\b(keep|revise)\b")
        .expect("static regex")
});

/// Extracts the body of an XML-style tag, e.g. `<Reasoning>…</Reasoning>`.
pub fn extract_tag(text: &str, tag: &str) -> Option<String> {
    let pattern = format!(r"(?is)<\s*{tag}\s*>(.*?)<\s*/\s*{tag}\s*>");
    Regex::new(&pattern)
        .ok()?
        .captures(text)
        .map(|c| c[1].trim().to_string())
}

/// First `Action` declaration that yields a value wins. Within one
/// declaration's window, an earlier `stop` beats a numeric value, a numeric
/// value beats a direction token regardless of position.
fn extract_action(text: &str) -> Option<(ActionToken, Vec<String>)> {
    for decl in ACTION_DECL.find_iter(text) {
        let window_start = decl.end();
        let window_end = text[window_start..]
            .char_indices()
            .take(ACTION_WINDOW_CHARS)
            .last()
            .map(|(i, c)| window_start + i + c.len_utf8())
            .unwrap_or(window_start);
        let window = &text[window_start..window_end];

        let stop_at = STOP.find(window).map(|m| m.start());
        let number = NUMBER
            .find_iter(window)
            .find_map(|m| m.as_str().parse::<u32>().ok().map(|n| (m.start(), n)));
        let direction = DIRECTION.find(window).map(|m| {
            let token = match m.as_str().to_ascii_lowercase().as_str() {
                "left" => Direction::Left,
                "front" => Direction::Front,
                "right" => Direction::Right,
                _ => Direction::Back,
            };
            (m.start(), token)
        });

        let mut diagnostics = Vec::new();
        let token = match (stop_at, number, direction) {
            (Some(s), Some((n, _)), _) if s < n => Some(ActionToken::Stop),
            (Some(s), None, Some((d, _))) if s < d => Some(ActionToken::Stop),
            (Some(_), None, None) => Some(ActionToken::Stop),
            (_, Some((_, n)), dir) => {
                if dir.is_some() {
                    diagnostics.push("numeric value preferred over direction token".to_string());
                }
                Some(ActionToken::Marker(n))
            }
            (_, None, Some((_, d))) => Some(ActionToken::Direction(d)),
            _ => None,
        };
        if let Some(token) = token {
            if decl.start() > 0 {
                diagnostics.push(format!(
                    "action declaration found at offset {}",
                    decl.start()
                ));
            }
            return Some((token, diagnostics));
        }
        // Declaration without a usable value: keep scanning.
    }
    None
}

/// Minimal parsing for baseline and CoT agents: locate the `Action` field
/// and extract its value (numeric marker, direction token, or stop).
pub fn parse_baseline(text: &str) -> Result<ParseOutcome, ParseError> {
    let (action_token, diagnostics) = extract_action(text).ok_or(ParseError::NoActionFound)?;
    Ok(ParseOutcome {
        action_token,
        reflection_text: None,
        decision_text: None,
        diagnostics,
    })
}

/// Two-stage parsing for reflection-enabled agents: the action value first,
/// then optional `Reflection` and `Decision` blocks as auxiliary metadata.
pub fn parse_reflection(text: &str) -> Result<ParseOutcome, ParseError> {
    let (action_token, diagnostics) = extract_action(text).ok_or(ParseError::NoActionFound)?;
    let reflection_text = REFLECTION_TAG
        .captures(text)
        .map(|c| c[1].trim().to_string())
        .or_else(|| {
            text.lines().find_map(|line| {
                REFLECTION_LINE
                    .captures(line)
                    .map(|c| c[1].trim().to_string())
            })
        });
    let decision_text = DECISION.captures(text).map(|c| {
        let word = c[1].to_ascii_lowercase();
        let mut chars = word.chars();
        match chars.next() {
            Some(first) => first.to_ascii_uppercase().to_string() + chars.as_str(),
            None => word,
        }
    });
    Ok(ParseOutcome {
        action_token,
        reflection_text,
        decision_text,
        diagnostics,
    })
}

/// Resolves a parsed token against the offered candidate set.
///
/// Markers must name an offered candidate; direction tokens must resolve to
/// exactly one candidate in that bucket (empty and ambiguous buckets are
/// rejected so the agent re-prompts instead of guessing); stop is always
/// valid.
pub fn validate_action(
    outcome: &ParseOutcome,
    obs: &Observation,
) -> Result<ExecutableAction, ParseError> {
    match &outcome.action_token {
        ActionToken::Stop => Ok(ExecutableAction::Stop),
        ActionToken::Marker(marker) => match obs.candidate(*marker) {
            Some(c) => Ok(ExecutableAction::MoveTo {
                marker: *marker,
                target: c.target.clone(),
            }),
            None => Err(ParseError::InvalidAction(
                InvalidActionReason::UnknownMarker,
            )),
        },
        ActionToken::Direction(direction) => {
            let bucket = obs.candidates_in(*direction);
            match bucket.as_slice() {
                [] => Err(ParseError::InvalidAction(InvalidActionReason::EmptyBucket)),
                [single] => Ok(ExecutableAction::MoveTo {
                    marker: single.marker,
                    target: single.target.clone(),
                }),
                _ => Err(ParseError::InvalidAction(
                    InvalidActionReason::AmbiguousBucket,
                )),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observation::{compose_observation, ObservationFormat};
    use crate::world::{NodeRecord, Pose, WorldGraph};
    use std::collections::BTreeMap;

    #[test]
    fn plain_marker() {
        let out = parse_baseline("Action: 3").unwrap();
        assert_eq!(out.action_token, ActionToken::Marker(3));
    }

    #[test]
    fn direction_after_prose() {
        let out = parse_baseline("I think the door is promising. Action: Left").unwrap();
        assert_eq!(out.action_token, ActionToken::Direction(Direction::Left));
    }

    #[test]
    fn markdown_noise_tolerated() {
        let out = parse_baseline("**Action** → `2` (move)").unwrap();
        assert_eq!(out.action_token, ActionToken::Marker(2));
    }

    #[test]
    fn stop_case_insensitive() {
        for text in ["Action: Stop", "action: STOP.", "Action:\nstop"] {
            let out = parse_baseline(text).unwrap();
            assert_eq!(out.action_token, ActionToken::Stop, "{text:?}");
        }
    }

    #[test]
    fn numeric_preferred_over_direction_in_same_window() {
        let out = parse_baseline("Action: go Left toward option 2").unwrap();
        assert_eq!(out.action_token, ActionToken::Marker(2));
    }

    #[test]
    fn earlier_stop_beats_numeric() {
        let out = parse_baseline("Action: stop (option 5 was wrong)").unwrap();
        assert_eq!(out.action_token, ActionToken::Stop);
    }

    #[test]
    fn first_yielding_declaration_wins() {
        let out = parse_baseline("Action: 1 is my pick.\nAction: 2").unwrap();
        assert_eq!(out.action_token, ActionToken::Marker(1));
    }

    #[test]
    fn value_outside_window_is_ignored() {
        let padding = "x".repeat(ACTION_WINDOW_CHARS + 8);
        let text = format!("Action {padding} 7");
        assert_eq!(parse_baseline(&text), Err(ParseError::NoActionFound));
    }

    #[test]
    fn no_action_found() {
        assert_eq!(
            parse_baseline("I am unsure what to do."),
            Err(ParseError::NoActionFound)
        );
    }

    #[test]
    fn reflection_fields_are_metadata_only() {
        let text = "Action: 1\n<Reflection>The hallway matches.</Reflection>\nFinal Decision: Keep";
        let out = parse_reflection(text).unwrap();
        assert_eq!(out.action_token, ActionToken::Marker(1));
        assert_eq!(out.reflection_text.as_deref(), Some("The hallway matches."));
        assert_eq!(out.decision_text.as_deref(), Some("Keep"));
    }

    #[test]
    fn revise_decision_detected() {
        let text = "Action: 2\n<Reflection>Wrong way.</Reflection>\n**Final Decision**: Revise";
        let out = parse_reflection(text).unwrap();
        assert_eq!(out.decision_text.as_deref(), Some("Revise"));
    }

    #[test]
    fn reflection_without_action_is_no_action() {
        let text = "<Reflection>thinking hard</Reflection>\nFinal Decision: Keep";
        assert_eq!(parse_reflection(text), Err(ParseError::NoActionFound));
    }

    #[test]
    fn baseline_and_reflection_agree_without_reflection_fields() {
        for text in [
            "Action: 4",
            "The **Action** is `Right`",
            "action → stop",
            "after deliberation, Action: 12",
        ] {
            let a = parse_baseline(text).unwrap().action_token;
            let b = parse_reflection(text).unwrap().action_token;
            assert_eq!(a, b, "{text:?}");
        }
    }

    fn bucket_world() -> (WorldGraph, Pose) {
        use crate::Real;
        // Center with two candidates to the right and one in front.
        let mut nodes = BTreeMap::new();
        let mk = |x: Real, y: Real| NodeRecord {
            position: [x, y, 0.0],
            navigable: true,
            view_assets: BTreeMap::new(),
            summary: None,
            marker_captions: None,
        };
        nodes.insert("C".to_string(), mk(0.0, 0.0));
        nodes.insert("F".to_string(), mk(0.0, 4.0)); // heading 0 → Front
        nodes.insert("R1".to_string(), mk(4.0, 1.0)); // ~76° → Right
        nodes.insert("R2".to_string(), mk(4.0, -1.0)); // ~104° → Right
        let g = WorldGraph::from_parts(
            "buckets",
            nodes,
            vec![
                ("C".into(), "F".into(), None),
                ("C".into(), "R1".into(), None),
                ("C".into(), "R2".into(), None),
            ],
        )
        .unwrap();
        (g, Pose::new("C", 0.0, 0.0))
    }

    #[test]
    fn validate_marker_and_buckets() {
        let (g, pose) = bucket_world();
        let obs = compose_observation(&g, &pose, ObservationFormat::FourView, true).unwrap();

        let ok = parse_baseline("Action: 2").unwrap();
        let action = validate_action(&ok, &obs).unwrap();
        assert!(matches!(action, ExecutableAction::MoveTo { marker: 2, .. }));

        let unknown = parse_baseline("Action: 9").unwrap();
        assert_eq!(
            validate_action(&unknown, &obs),
            Err(ParseError::InvalidAction(
                InvalidActionReason::UnknownMarker
            ))
        );

        let empty = parse_baseline("Action: Back").unwrap();
        assert_eq!(
            validate_action(&empty, &obs),
            Err(ParseError::InvalidAction(InvalidActionReason::EmptyBucket))
        );

        let ambiguous = parse_baseline("Action: Right").unwrap();
        assert_eq!(
            validate_action(&ambiguous, &obs),
            Err(ParseError::InvalidAction(
                InvalidActionReason::AmbiguousBucket
            ))
        );

        let front = parse_baseline("Action: Front").unwrap();
        let action = validate_action(&front, &obs).unwrap();
        assert_eq!(
            action,
            ExecutableAction::MoveTo {
                marker: obs.candidates_in(Direction::Front)[0].marker,
                target: "F".to_string()
            }
        );

        let stop = parse_baseline("Action: Stop").unwrap();
        assert_eq!(validate_action(&stop, &obs), Ok(ExecutableAction::Stop));
    }
}
