//! Connectivity-graph environments with pre-rendered view assets.
//!
//! A scan lives under `<asset_root>/<scan_id>/` as:
//!
//! - `graph.json` — nodes (id, x, y, z, navigable) and explicit undirected
//!   edges; the only mandatory file.
//! - `images/<viewpoint_id>_<heading>.jpg` — four cardinal renders per
//!   viewpoint; optional (text-only mode tolerates their absence).
//! - `annotations.json` — per-viewpoint scene summaries and marker captions;
//!   optional.
//!
//! [`WorldGraph`] is immutable after load and safe for unlimited concurrent
//! readers.

mod annotate;

pub use annotate::{annotate_world, AnnotateOptions, AnnotationRun, SkippedNode};

use std::collections::{BTreeMap, BinaryHeap};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{self, CARDINALS};
use crate::{Real, ViewpointId, ASSET_ROOT_ENV};

/// Tolerance for the edge-weight == Euclidean-distance invariant.
pub const EDGE_WEIGHT_TOLERANCE_M: Real = 1e-9;

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("graph file not found for scan {scan}: {path}")]
    GraphNotFound { scan: String, path: PathBuf },
    #[error("malformed graph for scan {scan}: {reason}")]
    GraphMalformed { scan: String, reason: String },
    #[error("unknown viewpoint {0}")]
    UnknownViewpoint(ViewpointId),
    #[error("no path between {from} and {to}")]
    Unreachable { from: ViewpointId, to: ViewpointId },
    #[error("model backend unavailable during annotation: {0}")]
    ModelUnavailable(String),
    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Agent pose: a viewpoint plus continuous heading and elevation.
///
/// Heading is normalized to `[0, 360)` at construction. Elevation is carried
/// but never altered by graph moves; the discrete action space has no
/// look-up/down action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub viewpoint: ViewpointId,
    pub heading: Real,
    pub elevation: Real,
}

impl Pose {
    pub fn new(viewpoint: impl Into<ViewpointId>, heading: Real, elevation: Real) -> Self {
        Pose {
            viewpoint: viewpoint.into(),
            heading: geometry::normalize_degrees(heading),
            elevation,
        }
    }
}

/// One viewpoint of the scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    /// Position in meters (x east, y north, z up).
    pub position: [Real; 3],
    pub navigable: bool,
    /// Cardinal heading (0/90/180/270) to relative image path. Either empty
    /// (no assets) or exactly four entries.
    #[serde(default)]
    pub view_assets: BTreeMap<u16, String>,
    /// One-sentence scene summary, when annotated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<String>,
    /// Marker index (1-based, ascending global heading) to caption.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub marker_captions: Option<BTreeMap<u32, String>>,
}

/// Navigable viewpoint graph with metric coordinates and cached view assets.
#[derive(Debug, Clone)]
pub struct WorldGraph {
    scan_id: String,
    nodes: BTreeMap<ViewpointId, NodeRecord>,
    /// Canonical undirected edge set, keys ordered `(a, b)` with `a < b`.
    edges: BTreeMap<(ViewpointId, ViewpointId), Real>,
    /// Index structures for shortest-path queries.
    ids: Vec<ViewpointId>,
    index: BTreeMap<ViewpointId, usize>,
    adjacency: Vec<Vec<(usize, Real)>>,
}

/// On-disk node entry of `graph.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct GraphFileNode {
    id: ViewpointId,
    x: Real,
    y: Real,
    z: Real,
    navigable: bool,
}

/// On-disk edge entry of `graph.json`. A missing weight is computed from the
/// endpoint positions; a present one is validated against them.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct GraphFileEdge {
    a: ViewpointId,
    b: ViewpointId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weight: Option<Real>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct GraphFile {
    scan_id: String,
    nodes: Vec<GraphFileNode>,
    edges: Vec<GraphFileEdge>,
}

/// Per-viewpoint entry of `annotations.json`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct NodeAnnotation {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub marker_captions: Option<BTreeMap<u32, String>>,
}

impl WorldGraph {
    /// Builds a validated graph from parts. Edge weights are computed from
    /// node positions when absent and checked against them when present.
    pub fn from_parts(
        scan_id: impl Into<String>,
        nodes: BTreeMap<ViewpointId, NodeRecord>,
        edge_list: Vec<(ViewpointId, ViewpointId, Option<Real>)>,
    ) -> Result<Self, WorldError> {
        let scan_id = scan_id.into();
        let malformed = |reason: String| WorldError::GraphMalformed {
            scan: scan_id.clone(),
            reason,
        };

        for (id, node) in &nodes {
            if node.position.iter().any(|c| !c.is_finite()) {
                return Err(malformed(format!("node {id} has a non-finite coordinate")));
            }
            if !node.view_assets.is_empty() {
                let keys: Vec<u16> = node.view_assets.keys().copied().collect();
                if keys != CARDINALS {
                    return Err(malformed(format!(
                        "node {id} view assets must cover exactly {{0, 90, 180, 270}}, got {keys:?}"
                    )));
                }
            }
        }

        let mut edges = BTreeMap::new();
        for (a, b, weight) in edge_list {
            if a == b {
                return Err(malformed(format!("self-loop on {a}")));
            }
            let pa = nodes
                .get(&a)
                .ok_or_else(|| malformed(format!("edge references unknown node {a}")))?
                .position;
            let pb = nodes
                .get(&b)
                .ok_or_else(|| malformed(format!("edge references unknown node {b}")))?
                .position;
            let computed = geometry::euclidean(pa, pb);
            let w = match weight {
                Some(w) => {
                    if !w.is_finite() || (w - computed).abs() > EDGE_WEIGHT_TOLERANCE_M {
                        return Err(malformed(format!(
                            "edge {a}-{b} weight {w} disagrees with node distance {computed}"
                        )));
                    }
                    w
                }
                None => computed,
            };
            let key = if a < b { (a, b) } else { (b, a) };
            if edges.insert(key.clone(), w).is_some() {
                return Err(malformed(format!("duplicate edge {}-{}", key.0, key.1)));
            }
        }

        let ids: Vec<ViewpointId> = nodes.keys().cloned().collect();
        let index: BTreeMap<ViewpointId, usize> = ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i))
            .collect();
        let mut adjacency = vec![Vec::new(); ids.len()];
        for ((a, b), w) in &edges {
            let (ia, ib) = (index[a], index[b]);
            adjacency[ia].push((ib, *w));
            adjacency[ib].push((ia, *w));
        }
        for list in &mut adjacency {
            list.sort_by_key(|(a, _)| *a);
        }

        for (id, node) in &nodes {
            if node.navigable && adjacency[index[id]].is_empty() {
                return Err(malformed(format!("navigable node {id} has no edges")));
            }
        }

        Ok(WorldGraph {
            scan_id,
            nodes,
            edges,
            ids,
            index,
            adjacency,
        })
    }

    pub fn scan_id(&self) -> &str {
        &self.scan_id
    }

    pub fn nodes(&self) -> &BTreeMap<ViewpointId, NodeRecord> {
        &self.nodes
    }

    pub fn node(&self, id: &str) -> Result<&NodeRecord, WorldError> {
        self.nodes
            .get(id)
            .ok_or_else(|| WorldError::UnknownViewpoint(id.to_string()))
    }

    pub fn contains(&self, id: &str) -> bool {
        self.nodes.contains_key(id)
    }

    pub fn node_count(&self) -> usize {
        self.ids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> impl Iterator<Item = (&ViewpointId, &ViewpointId, Real)> {
        self.edges.iter().map(|((a, b), w)| (a, b, *w))
    }

    /// Neighbors of a viewpoint with edge weights, ordered by id.
    pub fn neighbors(&self, id: &str) -> Result<Vec<(&ViewpointId, Real)>, WorldError> {
        let i = *self
            .index
            .get(id)
            .ok_or_else(|| WorldError::UnknownViewpoint(id.to_string()))?;
        Ok(self.adjacency[i]
            .iter()
            .map(|&(j, w)| (&self.ids[j], w))
            .collect())
    }

    pub fn edge_weight(&self, a: &str, b: &str) -> Option<Real> {
        let key = if a < b { (a, b) } else { (b, a) };
        self.edges
            .get(&(key.0.to_string(), key.1.to_string()))
            .copied()
    }

    /// Dijkstra distances from `source` to every node, `+∞` for unreachable.
    pub fn distances_from(&self, source: &str) -> Result<Vec<Real>, WorldError> {
        let src = *self
            .index
            .get(source)
            .ok_or_else(|| WorldError::UnknownViewpoint(source.to_string()))?;
        let mut dist = vec![Real::INFINITY; self.ids.len()];
        let mut heap = BinaryHeap::new();
        dist[src] = 0.0;
        heap.push(MinCost {
            cost: 0.0,
            node: src,
        });
        while let Some(MinCost { cost, node }) = heap.pop() {
            if cost > dist[node] {
                continue;
            }
            for &(next, w) in &self.adjacency[node] {
                let c = cost + w;
                if c < dist[next] {
                    dist[next] = c;
                    heap.push(MinCost {
                        cost: c,
                        node: next,
                    });
                }
            }
        }
        Ok(dist)
    }

    /// Index of a viewpoint in the order used by [`Self::distances_from`].
    pub fn node_index(&self, id: &str) -> Result<usize, WorldError> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| WorldError::UnknownViewpoint(id.to_string()))
    }

    /// Shortest-path length in meters over edge weights.
    ///
    /// Returns `+∞` when the viewpoints are disconnected, so downstream
    /// metrics (NE, OSR) stay computable for stranded agents.
    pub fn geodesic_distance(&self, a: &str, b: &str) -> Result<Real, WorldError> {
        let target = *self
            .index
            .get(b)
            .ok_or_else(|| WorldError::UnknownViewpoint(b.to_string()))?;
        if a == b {
            // Still validates existence.
            self.node_index(a)?;
            return Ok(0.0);
        }
        let dist = self.distances_from(a)?;
        Ok(dist[target])
    }

    /// Shortest path from `a` to `b` inclusive. `a == b` yields `[a]`.
    pub fn shortest_path(&self, a: &str, b: &str) -> Result<Vec<ViewpointId>, WorldError> {
        let src = self.node_index(a)?;
        let dst = self.node_index(b)?;
        if src == dst {
            return Ok(vec![a.to_string()]);
        }
        let mut dist = vec![Real::INFINITY; self.ids.len()];
        let mut prev: Vec<Option<usize>> = vec![None; self.ids.len()];
        let mut heap = BinaryHeap::new();
        dist[src] = 0.0;
        heap.push(MinCost {
            cost: 0.0,
            node: src,
        });
        while let Some(MinCost { cost, node }) = heap.pop() {
            if node == dst {
                break;
            }
            if cost > dist[node] {
                continue;
            }
            for &(next, w) in &self.adjacency[node] {
                let c = cost + w;
                if c < dist[next] {
                    dist[next] = c;
                    prev[next] = Some(node);
                    heap.push(MinCost {
                        cost: c,
                        node: next,
                    });
                }
            }
        }
        if dist[dst].is_infinite() {
            return Err(WorldError::Unreachable {
                from: a.to_string(),
                to: b.to_string(),
            });
        }
        let mut path = vec![dst];
        let mut cur = dst;
        while let Some(p) = prev[cur] {
            path.push(p);
            cur = p;
        }
        path.reverse();
        Ok(path.into_iter().map(|i| self.ids[i].clone()).collect())
    }

    /// Total weight of a contiguous path; `None` if any hop is not an edge.
    pub fn path_length(&self, path: &[ViewpointId]) -> Option<Real> {
        let mut total = 0.0;
        for pair in path.windows(2) {
            total += self.edge_weight(&pair[0], &pair[1])?;
        }
        Some(total)
    }

    /// Canonical candidate ordering at a viewpoint: neighbors sorted by
    /// ascending world-frame heading, ties broken by lexicographic id.
    /// Marker `k` (1-based) always refers to the `k`-th entry, independent of
    /// the agent's own heading.
    pub fn marker_order(&self, id: &str) -> Result<Vec<MarkerTarget>, WorldError> {
        let here = self.node(id)?.position;
        let mut order: Vec<MarkerTarget> = self
            .neighbors(id)?
            .into_iter()
            .map(|(n, w)| MarkerTarget {
                target: n.clone(),
                global_heading: geometry::heading_between(here, self.nodes[n].position),
                distance: w,
            })
            .collect();
        order.sort_by(|a, b| {
            a.global_heading
                .partial_cmp(&b.global_heading)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| a.target.cmp(&b.target))
        });
        Ok(order)
    }

    /// Applies loaded annotations onto the node records.
    pub fn apply_annotations(&mut self, annotations: &BTreeMap<ViewpointId, NodeAnnotation>) {
        for (id, ann) in annotations {
            if let Some(node) = self.nodes.get_mut(id) {
                if ann.summary.is_some() {
                    node.summary = ann.summary.clone();
                }
                if ann.marker_captions.is_some() {
                    node.marker_captions = ann.marker_captions.clone();
                }
            }
        }
    }

    pub(crate) fn set_annotation(
        &mut self,
        id: &str,
        summary: Option<String>,
        captions: Option<BTreeMap<u32, String>>,
    ) {
        if let Some(node) = self.nodes.get_mut(id) {
            if summary.is_some() {
                node.summary = summary;
            }
            if captions.is_some() {
                node.marker_captions = captions;
            }
        }
    }

    /// Extracts the current annotations in `annotations.json` form.
    pub fn annotations(&self) -> BTreeMap<ViewpointId, NodeAnnotation> {
        self.nodes
            .iter()
            .filter(|(_, n)| n.summary.is_some() || n.marker_captions.is_some())
            .map(|(id, n)| {
                (
                    id.clone(),
                    NodeAnnotation {
                        summary: n.summary.clone(),
                        marker_captions: n.marker_captions.clone(),
                    },
                )
            })
            .collect()
    }

    /// Serializes the graph (nodes and edges, not annotations) in canonical
    /// form: nodes sorted by id, edges sorted by ordered pair, weights
    /// written explicitly.
    pub fn to_canonical_json(&self) -> String {
        let file = GraphFile {
            scan_id: self.scan_id.clone(),
            nodes: self
                .nodes
                .iter()
                .map(|(id, n)| GraphFileNode {
                    id: id.clone(),
                    x: n.position[0],
                    y: n.position[1],
                    z: n.position[2],
                    navigable: n.navigable,
                })
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|((a, b), w)| GraphFileEdge {
                    a: a.clone(),
                    b: b.clone(),
                    weight: Some(*w),
                })
                .collect(),
        };
        let mut text = serde_json::to_string_pretty(&file).expect("graph serializes");
        text.push('\n');
        text
    }

    /// Writes `graph.json` (and `annotations.json` when any annotation is
    /// present) under `<asset_root>/<scan_id>/`.
    pub fn save(&self, asset_root: &Path) -> Result<(), WorldError> {
        let dir = asset_root.join(&self.scan_id);
        fs::create_dir_all(&dir).map_err(|e| WorldError::Io {
            path: dir.clone(),
            source: e,
        })?;
        let graph_path = dir.join("graph.json");
        fs::write(&graph_path, self.to_canonical_json()).map_err(|e| WorldError::Io {
            path: graph_path,
            source: e,
        })?;
        let annotations = self.annotations();
        if !annotations.is_empty() {
            let ann_path = dir.join("annotations.json");
            let mut text =
                serde_json::to_string_pretty(&annotations).expect("annotations serialize");
            text.push('\n');
            fs::write(&ann_path, text).map_err(|e| WorldError::Io {
                path: ann_path,
                source: e,
            })?;
        }
        Ok(())
    }
}

/// Resolves the default asset root from `VLN_ASSET_ROOT`.
pub fn default_asset_root() -> Option<PathBuf> {
    std::env::var_os(ASSET_ROOT_ENV).map(PathBuf::from)
}

/// Loads and validates a scan. A missing graph file is fatal; missing images
/// are tolerated (text-only mode); `annotations.json` is merged when present.
pub fn load_world(asset_root: &Path, scan_id: &str) -> Result<WorldGraph, WorldError> {
    let dir = asset_root.join(scan_id);
    let graph_path = dir.join("graph.json");
    let text = match fs::read_to_string(&graph_path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(WorldError::GraphNotFound {
                scan: scan_id.to_string(),
                path: graph_path,
            })
        }
        Err(e) => {
            return Err(WorldError::Io {
                path: graph_path,
                source: e,
            })
        }
    };
    let file: GraphFile = serde_json::from_str(&text).map_err(|e| WorldError::GraphMalformed {
        scan: scan_id.to_string(),
        reason: format!("invalid json: {e}"),
    })?;
    if file.scan_id != scan_id {
        return Err(WorldError::GraphMalformed {
            scan: scan_id.to_string(),
            reason: format!("graph file declares scan_id {}", file.scan_id),
        });
    }

    let images_present = dir.join("images").is_dir();
    let mut nodes = BTreeMap::new();
    for n in file.nodes {
        let view_assets = if images_present {
            CARDINALS
                .iter()
                .map(|h| (*h, format!("images/{}_{}.jpg", n.id, h)))
                .collect()
        } else {
            BTreeMap::new()
        };
        let record = NodeRecord {
            position: [n.x, n.y, n.z],
            navigable: n.navigable,
            view_assets,
            summary: None,
            marker_captions: None,
        };
        if nodes.insert(n.id.clone(), record).is_some() {
            return Err(WorldError::GraphMalformed {
                scan: scan_id.to_string(),
                reason: format!("duplicate node {}", n.id),
            });
        }
    }
    let edges = file
        .edges
        .into_iter()
        .map(|e| (e.a, e.b, e.weight))
        .collect();
    let mut world = WorldGraph::from_parts(scan_id, nodes, edges)?;

    let ann_path = dir.join("annotations.json");
    if ann_path.is_file() {
        let text = fs::read_to_string(&ann_path).map_err(|e| WorldError::Io {
            path: ann_path.clone(),
            source: e,
        })?;
        let annotations: BTreeMap<ViewpointId, NodeAnnotation> = serde_json::from_str(&text)
            .map_err(|e| WorldError::GraphMalformed {
                scan: scan_id.to_string(),
                reason: format!("invalid annotations.json: {e}"),
            })?;
        world.apply_annotations(&annotations);
    }
    Ok(world)
}

/// One entry of the canonical marker order at a viewpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkerTarget {
    pub target: ViewpointId,
    /// World-frame heading from the viewpoint to the target, degrees.
    pub global_heading: Real,
    /// Edge length in meters.
    pub distance: Real,
}

/// Min-heap entry for Dijkstra.
#[derive(Debug, PartialEq)]
struct MinCost {
    cost: Real,
    node: usize,
}

impl Eq for MinCost {}

impl PartialOrd for MinCost {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for MinCost {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        other
            .cost
            .partial_cmp(&self.cost)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| other.node.cmp(&self.node))
    }
}
