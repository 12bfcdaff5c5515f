//! Agent-centric observations: the composite panorama and the ordered,
//! marker-indexed candidate set.
//!
//! The front view is the cardinal render nearest the agent's continuous
//! heading (quadrant quantization); Left/Right/Back follow at −90/+90/+180.
//! The four views are always presented in the order
//! `[Left, Front, Right, Back]`. Candidates enumerate the graph neighbors
//! in ascending global-heading order with consecutive markers starting at 1.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{self, Direction};
use crate::world::{Pose, WorldError, WorldGraph};
use crate::{Real, ViewpointId};

#[derive(Debug, Error)]
pub enum ObservationError {
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Geometry(#[from] geometry::GeometryError),
    #[error("viewpoint {viewpoint} lacks view assets for heading {heading}")]
    MissingAssets {
        viewpoint: ViewpointId,
        heading: u16,
    },
    #[error("unsupported observation format {0:?}: assets provide only four cardinal renders")]
    UnsupportedFormat(ObservationFormat),
    #[error("viewpoint {0} is not navigable")]
    NotNavigable(ViewpointId),
}

/// Observation formats. Only the four-view strip and the single stitched
/// composite are producible from the shipped asset scheme; the dense sweeps
/// exist as requests so callers get a typed error instead of silent
/// degradation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[derive(Default)]
pub enum ObservationFormat {
    #[default]
    FourView,
    SingleStitched,
    Dense24,
    Dense36,
}

/// Labels of view slots in presentation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ViewLabel {
    Left,
    Front,
    Right,
    Back,
    /// Single stitched composite covering all four segments.
    Stitched,
}

impl ViewLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            ViewLabel::Left => "Left",
            ViewLabel::Front => "Front",
            ViewLabel::Right => "Right",
            ViewLabel::Back => "Back",
            ViewLabel::Stitched => "Stitched",
        }
    }
}

/// One presented view: a direction label, the cardinal render it shows, and
/// the image reference (absent in text-only mode).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewSlot {
    pub label: ViewLabel,
    pub cardinal: u16,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<String>,
}

/// A navigable candidate action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    /// 1-based, consecutive, assigned in ascending global-heading order.
    pub marker: u32,
    pub target: ViewpointId,
    /// World-frame heading from the current node to the target, `[0, 360)`.
    pub global_heading: Real,
    pub relative_bucket: Direction,
    /// Edge length in meters.
    pub distance: Real,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caption: Option<String>,
}

/// The full agent-centric observation at a pose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub pose: Pose,
    /// Cardinal render serving as the front view.
    pub front_cardinal: u16,
    pub views: Vec<ViewSlot>,
    pub candidates: Vec<Candidate>,
    /// Stop is always on offer.
    pub stop_available: bool,
}

impl Observation {
    /// Candidate with the given marker, if any.
    pub fn candidate(&self, marker: u32) -> Option<&Candidate> {
        self.candidates.iter().find(|c| c.marker == marker)
    }

    /// Candidates falling into a relative-direction bucket.
    pub fn candidates_in(&self, bucket: Direction) -> Vec<&Candidate> {
        self.candidates
            .iter()
            .filter(|c| c.relative_bucket == bucket)
            .collect()
    }
}

/// Composes the observation at `pose` in the requested format.
///
/// `text_only` drops image references instead of failing when assets are
/// absent. Deterministic: identical inputs produce identical observations.
pub fn compose_observation(
    graph: &WorldGraph,
    pose: &Pose,
    format: ObservationFormat,
    text_only: bool,
) -> Result<Observation, ObservationError> {
    match format {
        ObservationFormat::FourView | ObservationFormat::SingleStitched => {}
        other => return Err(ObservationError::UnsupportedFormat(other)),
    }

    let node = graph.node(&pose.viewpoint)?;
    if !node.navigable {
        return Err(ObservationError::NotNavigable(pose.viewpoint.clone()));
    }
    let front = geometry::quantize_heading(pose.heading)?;

    let image_for = |cardinal: u16| -> Result<Option<String>, ObservationError> {
        if text_only {
            return Ok(None);
        }
        match node.view_assets.get(&cardinal) {
            Some(reference) => Ok(Some(reference.clone())),
            None => Err(ObservationError::MissingAssets {
                viewpoint: pose.viewpoint.clone(),
                heading: cardinal,
            }),
        }
    };

    // Agent-centric order with the cardinal each slot displays.
    let slots = [
        (ViewLabel::Left, (front + 270) % 360),
        (ViewLabel::Front, front),
        (ViewLabel::Right, (front + 90) % 360),
        (ViewLabel::Back, (front + 180) % 360),
    ];

    let views = match format {
        ObservationFormat::FourView => {
            let mut views = Vec::with_capacity(4);
            for (label, cardinal) in slots {
                views.push(ViewSlot {
                    label,
                    cardinal,
                    image: image_for(cardinal)?,
                });
            }
            views
        }
        ObservationFormat::SingleStitched => {
            // One composite reference with the direction labels baked into
            // the metadata string, segments in [Left, Front, Right, Back]
            // order.
            let mut parts = Vec::with_capacity(4);
            let mut any_image = false;
            for (label, cardinal) in slots {
                match image_for(cardinal)? {
                    Some(reference) => {
                        any_image = true;
                        parts.push(format!("{}:{}", label.as_str(), reference));
                    }
                    None => parts.push(format!("{}:-", label.as_str())),
                }
            }
            vec![ViewSlot {
                label: ViewLabel::Stitched,
                cardinal: front,
                image: any_image.then(|| parts.join("|")),
            }]
        }
        _ => unreachable!("dense formats rejected above"),
    };

    let mut candidates = Vec::new();
    for (i, entry) in graph.marker_order(&pose.viewpoint)?.iter().enumerate() {
        let marker = (i + 1) as u32;
        let relative = geometry::normalize_degrees(entry.global_heading - front as Real);
        let caption = node
            .marker_captions
            .as_ref()
            .and_then(|m| m.get(&marker).cloned());
        candidates.push(Candidate {
            marker,
            target: entry.target.clone(),
            global_heading: entry.global_heading,
            relative_bucket: geometry::direction_bucket(relative)?,
            distance: entry.distance,
            caption,
        });
    }

    Ok(Observation {
        pose: pose.clone(),
        front_cardinal: front,
        views,
        candidates,
        stop_available: true,
    })
}

/// Convenience for the four-view default.
pub fn render_format_variant(
    graph: &WorldGraph,
    pose: &Pose,
    format: ObservationFormat,
) -> Result<Observation, ObservationError> {
    compose_observation(graph, pose, format, true)
}
