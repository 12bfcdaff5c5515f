//! Agent memory: text-summary histories and text-map topological memory.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::geometry;
use crate::observation::Candidate;
use crate::world::{Pose, WorldError, WorldGraph};
use crate::{Real, ViewpointId};

/// The two memory families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MemoryKind {
    TextSummary,
    TextMap,
}

impl MemoryKind {
    pub fn template_dir(&self) -> &'static str {
        match self {
            MemoryKind::TextSummary => "text_summary",
            MemoryKind::TextMap => "text_map",
        }
    }
}

/// One executed step of text-summary history: relative turn, forward
/// displacement, and the semantic description of the destination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    /// 1-based executed step count.
    pub step: usize,
    /// Signed minimal rotation in degrees, positive clockwise.
    pub turn_angle: Real,
    /// Forward displacement in meters; zero only for in-place events.
    pub forward: Real,
    pub destination_summary: String,
}

/// Topological text map grown while exploring. Local labels (`node_0`,
/// `node_1`, …) are assigned in first-seen order starting at the start
/// viewpoint; visited and frontier sets are disjoint by construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopoMemory {
    /// Label index → viewpoint id, in first-seen order.
    seen: Vec<ViewpointId>,
    /// Viewpoint id → label index.
    labels: BTreeMap<ViewpointId, usize>,
    /// Scene summary per label (falls back to a generic phrase).
    summaries: Vec<String>,
    /// Undirected adjacency over labels, pairs ordered `(low, high)`.
    adjacency: BTreeSet<(usize, usize)>,
    visited: BTreeSet<usize>,
    current: usize,
}

impl TopoMemory {
    pub fn label_name(label: usize) -> String {
        format!("node_{label}")
    }

    fn summary_for(graph: &WorldGraph, id: &str) -> String {
        graph
            .node(id)
            .ok()
            .and_then(|n| n.summary.clone())
            .unwrap_or_else(|| "an unannotated viewpoint".to_string())
    }

    fn label_of(&mut self, graph: &WorldGraph, id: &ViewpointId) -> usize {
        if let Some(&label) = self.labels.get(id) {
            return label;
        }
        let label = self.seen.len();
        self.seen.push(id.clone());
        self.labels.insert(id.clone(), label);
        self.summaries.push(Self::summary_for(graph, id));
        label
    }

    fn observe_neighbors(&mut self, graph: &WorldGraph, at: usize) -> Result<(), WorldError> {
        let id = self.seen[at].clone();
        for entry in graph.marker_order(&id)? {
            let neighbor = self.label_of(graph, &entry.target);
            let pair = if at < neighbor {
                (at, neighbor)
            } else {
                (neighbor, at)
            };
            self.adjacency.insert(pair);
        }
        Ok(())
    }

    fn arrive(&mut self, graph: &WorldGraph, id: &ViewpointId) -> Result<(), WorldError> {
        let label = self.label_of(graph, id);
        self.visited.insert(label);
        self.current = label;
        self.observe_neighbors(graph, label)
    }

    pub fn current(&self) -> usize {
        self.current
    }

    pub fn summary_of(&self, label: usize) -> &str {
        &self.summaries[label]
    }

    /// All seen labels in first-seen order.
    pub fn seen_labels(&self) -> Vec<usize> {
        (0..self.seen.len()).collect()
    }

    pub fn visited_labels(&self) -> Vec<usize> {
        self.visited.iter().copied().collect()
    }

    /// Frontier = seen \ visited.
    pub fn frontier_labels(&self) -> Vec<usize> {
        (0..self.seen.len())
            .filter(|l| !self.visited.contains(l))
            .collect()
    }

    pub fn neighbors_of(&self, label: usize) -> Vec<usize> {
        self.adjacency
            .iter()
            .filter_map(|&(a, b)| {
                if a == label {
                    Some(b)
                } else if b == label {
                    Some(a)
                } else {
                    None
                }
            })
            .collect()
    }

    pub fn viewpoint_of(&self, label: usize) -> &ViewpointId {
        &self.seen[label]
    }
}

/// Memory state of an episode's agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AgentMemory {
    Summary(Vec<HistoryEntry>),
    Map(TopoMemory),
}

impl AgentMemory {
    /// Initial memory at the episode start: empty history, or a map seeded
    /// with the start node and its observable neighbors.
    pub fn new(kind: MemoryKind, graph: &WorldGraph, start: &Pose) -> Result<Self, WorldError> {
        match kind {
            MemoryKind::TextSummary => Ok(AgentMemory::Summary(Vec::new())),
            MemoryKind::TextMap => {
                let mut map = TopoMemory {
                    seen: Vec::new(),
                    labels: BTreeMap::new(),
                    summaries: Vec::new(),
                    adjacency: BTreeSet::new(),
                    visited: BTreeSet::new(),
                    current: 0,
                };
                map.arrive(graph, &start.viewpoint)?;
                Ok(AgentMemory::Map(map))
            }
        }
    }

    /// Records one executed move. The summary family appends a history
    /// entry; the map family labels the destination (first visit only),
    /// marks it visited, and inserts adjacency for its observable neighbors.
    pub fn record_move(
        &mut self,
        graph: &WorldGraph,
        old_pose: &Pose,
        taken: &Candidate,
    ) -> Result<(), WorldError> {
        match self {
            AgentMemory::Summary(entries) => {
                let summary = TopoMemory::summary_for(graph, &taken.target);
                entries.push(HistoryEntry {
                    step: entries.len() + 1,
                    turn_angle: geometry::signed_turn_degrees(
                        old_pose.heading,
                        taken.global_heading,
                    ),
                    forward: taken.distance,
                    destination_summary: summary,
                });
                Ok(())
            }
            AgentMemory::Map(map) => map.arrive(graph, &taken.target),
        }
    }

    pub fn executed_steps(&self) -> Option<usize> {
        match self {
            AgentMemory::Summary(entries) => Some(entries.len()),
            AgentMemory::Map(_) => None,
        }
    }
}

/// Pose after executing a move: the agent stands at the target facing the
/// direction it travelled; elevation is untouched.
pub fn pose_after_move(old: &Pose, taken: &Candidate) -> Pose {
    Pose {
        viewpoint: taken.target.clone(),
        heading: taken.global_heading,
        elevation: old.elevation,
    }
}
