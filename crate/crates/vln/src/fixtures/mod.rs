//! Deterministic synthetic worlds, splits, and scripted behaviors.
//!
//! Everything here is a pure function of its seed and spec, which makes
//! full-pipeline testing possible without real scenes or paid models.
//! Synthetic scans are jittered rings with random chords (optionally two
//! stacked rings joined by stair edges), nodes named `vp_0007` and
//! described as "a synthetic room 7", so prompt-driven scripted policies
//! can localize themselves from rendered text alone.

mod policies;

pub use policies::{
    register_scripted_models, GarbageEmitter, GuidableLooper, GuidanceOracle, Looper,
    OptimalFollower, RandomWalker, ReviseOnce,
};

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tasks::{
    largest_remainder, validate_episode, EpisodeSpec, Granularity, Instruction, LengthBin,
};
use crate::world::{NodeRecord, Pose, WorldError, WorldGraph};
use crate::{Real, ViewpointId};

/// The 21 goal categories used by zero-granularity episodes.
pub const ZERO_CATEGORIES: [&str; 21] = [
    "armchair",
    "bathtub",
    "bed",
    "bookshelf",
    "cabinet",
    "chair",
    "chest of drawers",
    "clothes dryer",
    "counter",
    "cushion",
    "fireplace",
    "gym equipment",
    "picture",
    "plant",
    "seating bench",
    "sink",
    "sofa",
    "stool",
    "table",
    "toilet",
    "towel rack",
];

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("synth spec invalid: {0}")]
    SpecInvalid(String),
    #[error("cannot fill length bin {bin}: needed {needed}, available {available}")]
    BinUnfillable {
        bin: usize,
        needed: usize,
        available: usize,
    },
    #[error(transparent)]
    World(#[from] WorldError),
    #[error("io error at {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Target share of episodes per granularity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GranularityMix {
    pub fine: Real,
    pub coarse: Real,
    pub zero: Real,
}

impl Default for GranularityMix {
    fn default() -> Self {
        GranularityMix {
            fine: 1.0,
            coarse: 0.0,
            zero: 0.0,
        }
    }
}

/// A ground-truth length bin target for split generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthLengthBin {
    pub min_m: Real,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_m: Option<Real>,
    pub share: Real,
}

impl SynthLengthBin {
    fn contains(&self, length: Real) -> bool {
        length >= self.min_m && self.max_m.is_none_or(|max| length < max)
    }

    /// The corresponding sampling-plan bin.
    pub fn to_length_bin(&self) -> LengthBin {
        LengthBin {
            min_m: self.min_m,
            max_m: self.max_m,
            proportion: self.share,
        }
    }
}

fn default_node_count() -> usize {
    16
}
fn default_degree_range() -> (usize, usize) {
    (2, 4)
}
fn default_scale() -> Real {
    4.0
}
fn default_episode_count() -> usize {
    20
}
fn default_layers() -> u8 {
    1
}
fn default_stair_links() -> usize {
    2
}
fn default_scan_id() -> String {
    "synth".to_string()
}
fn default_bins() -> Vec<SynthLengthBin> {
    vec![SynthLengthBin {
        min_m: 0.0,
        max_m: None,
        share: 1.0,
    }]
}

/// Specification of a synthetic world and split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub seed: u64,
    #[serde(default = "default_scan_id")]
    pub scan_id: String,
    #[serde(default = "default_node_count")]
    pub node_count: usize,
    #[serde(default = "default_degree_range")]
    pub degree_range: (usize, usize),
    #[serde(default = "default_scale")]
    pub coord_scale_m: Real,
    #[serde(default = "default_episode_count")]
    pub episode_count: usize,
    #[serde(default)]
    pub granularity_mix: GranularityMix,
    #[serde(default = "default_bins")]
    pub length_bins: Vec<SynthLengthBin>,
    /// 1 for a single ring, 2 for two stacked rings joined by stair edges.
    #[serde(default = "default_layers")]
    pub layers: u8,
    #[serde(default = "default_stair_links")]
    pub stair_links: usize,
    /// Offset added to room numbers, keeping scans distinguishable when a
    /// tree holds several.
    #[serde(default)]
    pub room_base: usize,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            seed: 0,
            scan_id: default_scan_id(),
            node_count: default_node_count(),
            degree_range: default_degree_range(),
            coord_scale_m: default_scale(),
            episode_count: default_episode_count(),
            granularity_mix: GranularityMix::default(),
            length_bins: default_bins(),
            layers: default_layers(),
            stair_links: default_stair_links(),
            room_base: 0,
        }
    }
}

impl SynthSpec {
    fn validate(&self) -> Result<(), FixtureError> {
        let (min_deg, max_deg) = self.degree_range;
        if self.node_count < 4 {
            return Err(FixtureError::SpecInvalid("node_count must be >= 4".into()));
        }
        if min_deg < 2 || max_deg < min_deg {
            return Err(FixtureError::SpecInvalid(
                "degree_range must satisfy 2 <= min <= max".into(),
            ));
        }
        if min_deg >= self.node_count {
            return Err(FixtureError::SpecInvalid(
                "min degree must be below node_count".into(),
            ));
        }
        if !(1..=2).contains(&self.layers) {
            return Err(FixtureError::SpecInvalid("layers must be 1 or 2".into()));
        }
        if self.layers == 2 && max_deg < 3 {
            return Err(FixtureError::SpecInvalid(
                "stair edges need max degree >= 3".into(),
            ));
        }
        if self.coord_scale_m <= 0.0 {
            return Err(FixtureError::SpecInvalid(
                "coord_scale_m must be > 0".into(),
            ));
        }
        let share_sum: Real = self.length_bins.iter().map(|b| b.share).sum();
        if (share_sum - 1.0).abs() > 1e-9 {
            return Err(FixtureError::SpecInvalid(format!(
                "length bin shares sum to {share_sum}, expected 1"
            )));
        }
        let mix = self.granularity_mix;
        if (mix.fine + mix.coarse + mix.zero - 1.0).abs() > 1e-9 {
            return Err(FixtureError::SpecInvalid(
                "granularity mix must sum to 1".into(),
            ));
        }
        Ok(())
    }
}

/// Node id for a room number.
pub fn room_id(n: usize) -> ViewpointId {
    format!("vp_{n:04}")
}

/// Room number of a synthetic node id.
pub fn room_number(id: &str) -> Option<usize> {
    id.strip_prefix("vp_")?.parse().ok()
}

/// The marker caption used for a candidate leading to room `n`.
pub fn room_caption(n: usize) -> String {
    format!("a synthetic room {n}")
}

/// The object category placed in room `n`.
pub fn room_category(n: usize) -> &'static str {
    ZERO_CATEGORIES[n % ZERO_CATEGORIES.len()]
}

/// The scene summary of room `n`.
pub fn room_summary(n: usize) -> String {
    format!("a synthetic room {n} containing a {}", room_category(n))
}

/// Generates a connected synthetic world satisfying every graph invariant:
/// ring backbone (guaranteeing connectivity and minimum degree 2), random
/// chords up to the degree bounds, jittered coordinates, Euclidean edge
/// weights, placeholder view assets, and deterministic pseudo-captions.
pub fn gen_world(spec: &SynthSpec) -> Result<WorldGraph, FixtureError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.node_count;
    let (min_deg, max_deg) = spec.degree_range;

    let layer_sizes: Vec<usize> = if spec.layers == 2 {
        vec![n / 2, n - n / 2]
    } else {
        vec![n]
    };

    // Positions: one jittered ring per layer.
    let mut positions = Vec::with_capacity(n);
    for (layer, &size) in layer_sizes.iter().enumerate() {
        let radius = spec.coord_scale_m * size as Real / (2.0 * std::f64::consts::PI);
        let z = 3.0 * layer as Real;
        let phase = 0.5 * layer as Real;
        for i in 0..size {
            let angle = 2.0 * std::f64::consts::PI * (i as Real + phase) / size as Real;
            let jitter = 0.15 * spec.coord_scale_m;
            positions.push([
                radius * angle.cos() + rng.random_range(-jitter..jitter),
                radius * angle.sin() + rng.random_range(-jitter..jitter),
                z,
            ]);
        }
    }

    let mut degree = vec![0usize; n];
    let mut edge_set: std::collections::BTreeSet<(usize, usize)> =
        std::collections::BTreeSet::new();
    let add_edge = |edge_set: &mut std::collections::BTreeSet<(usize, usize)>,
                    degree: &mut Vec<usize>,
                    a: usize,
                    b: usize|
     -> bool {
        if a == b {
            return false;
        }
        let key = (a.min(b), a.max(b));
        if edge_set.contains(&key) {
            return false;
        }
        edge_set.insert(key);
        degree[a] += 1;
        degree[b] += 1;
        true
    };

    // Ring backbone per layer.
    let mut offset = 0;
    for &size in &layer_sizes {
        for i in 0..size {
            add_edge(
                &mut edge_set,
                &mut degree,
                offset + i,
                offset + (i + 1) % size,
            );
        }
        offset += size;
    }

    // Stair links between layers.
    if spec.layers == 2 {
        let lower = layer_sizes[0];
        let links = spec.stair_links.clamp(1, lower.min(layer_sizes[1]));
        for k in 0..links {
            let a = k * lower / links;
            let b = lower + k * layer_sizes[1] / links;
            add_edge(&mut edge_set, &mut degree, a, b.min(n - 1));
        }
    }

    // Chords: first raise every node to the minimum degree, then sprinkle
    // extras while respecting the maximum.
    let mut guard = 0;
    while let Some(u) = (0..n).find(|&u| degree[u] < min_deg) {
        guard += 1;
        if guard > 4 * n * max_deg {
            return Err(FixtureError::SpecInvalid(
                "degree constraints are unsatisfiable".into(),
            ));
        }
        let mut partners: Vec<usize> = (0..n)
            .filter(|&v| v != u && degree[v] < max_deg && !edge_set.contains(&(u.min(v), u.max(v))))
            .collect();
        partners.sort_by(|&a, &b| {
            let da = crate::geometry::euclidean(positions[u], positions[a]);
            let db = crate::geometry::euclidean(positions[u], positions[b]);
            da.partial_cmp(&db).unwrap_or(std::cmp::Ordering::Equal)
        });
        match partners.first() {
            Some(&v) => {
                add_edge(&mut edge_set, &mut degree, u, v);
            }
            None => {
                return Err(FixtureError::SpecInvalid(
                    "degree constraints are unsatisfiable".into(),
                ))
            }
        }
    }
    for _ in 0..n / 3 {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if degree[a] < max_deg && degree[b] < max_deg {
            add_edge(&mut edge_set, &mut degree, a, b);
        }
    }

    let mut nodes = BTreeMap::new();
    for (i, position) in positions.iter().enumerate() {
        let number = spec.room_base + i;
        let id = room_id(number);
        nodes.insert(
            id.clone(),
            NodeRecord {
                position: *position,
                navigable: true,
                view_assets: crate::geometry::CARDINALS
                    .iter()
                    .map(|h| (*h, format!("images/{id}_{h}.jpg")))
                    .collect(),
                summary: None,
                marker_captions: None,
            },
        );
    }
    let edges = edge_set
        .into_iter()
        .map(|(a, b)| {
            (
                room_id(spec.room_base + a),
                room_id(spec.room_base + b),
                None,
            )
        })
        .collect();
    let mut world = WorldGraph::from_parts(spec.scan_id.clone(), nodes, edges)?;

    // Annotations: summaries and per-marker captions in canonical marker
    // order, so scripted policies can read destinations off the prompt.
    let ids: Vec<ViewpointId> = world.nodes().keys().cloned().collect();
    for id in ids {
        let number = room_number(&id).expect("synthetic id");
        let captions: BTreeMap<u32, String> = world
            .marker_order(&id)?
            .iter()
            .enumerate()
            .map(|(k, entry)| {
                let target_number = room_number(&entry.target).expect("synthetic id");
                ((k + 1) as u32, room_caption(target_number))
            })
            .collect();
        world.set_annotation(&id, Some(room_summary(number)), Some(captions));
    }
    Ok(world)
}

/// Nearest instance of a category, ties broken by node id. Returns the
/// instance and its geodesic distance.
pub fn nearest_category_instance(
    world: &WorldGraph,
    from: &str,
    category: &str,
) -> Result<Option<(ViewpointId, Real)>, WorldError> {
    let dist = world.distances_from(from)?;
    let mut best: Option<(ViewpointId, Real)> = None;
    for id in world.nodes().keys() {
        let Some(number) = room_number(id) else {
            continue;
        };
        if room_category(number) != category {
            continue;
        }
        let d = dist[world.node_index(id)?];
        if !d.is_finite() {
            continue;
        }
        let better = match &best {
            None => true,
            Some((_, bd)) => d < *bd,
        };
        if better {
            best = Some((id.clone(), d));
        }
    }
    Ok(best)
}

/// All instances of a category in the world, sorted by id.
pub fn category_instances(world: &WorldGraph, category: &str) -> Vec<ViewpointId> {
    world
        .nodes()
        .keys()
        .filter(|id| room_number(id).is_some_and(|n| room_category(n) == category))
        .cloned()
        .collect()
}

fn fine_instruction(gt: &[ViewpointId], verb: &str) -> String {
    let mut sentences = Vec::new();
    for (i, id) in gt.iter().enumerate().skip(1) {
        let number = room_number(id).expect("synthetic id");
        let caption = room_caption(number);
        let sentence = if i == gt.len() - 1 {
            format!("Finally stop at {caption}.")
        } else if i == 1 {
            format!("{verb} to {caption}.")
        } else {
            format!("Then {} to {caption}.", verb.to_lowercase())
        };
        sentences.push(sentence);
    }
    sentences.join(" ")
}

fn coarse_instruction(goal: &ViewpointId, variant: usize) -> String {
    let caption = room_caption(room_number(goal).expect("synthetic id"));
    match variant {
        0 => format!("Find the area described as {caption} and stop there."),
        1 => format!("Your destination is {caption}; go there and stop."),
        _ => format!("Navigate until you reach {caption}, then stop."),
    }
}

/// Generates a validated split over a synthetic world. Ground-truth paths
/// are exact shortest paths; instruction text is synthesized per
/// granularity; requested length-bin counts are honored exactly (largest
/// remainder over the shares).
pub fn gen_split(world: &WorldGraph, spec: &SynthSpec) -> Result<Vec<EpisodeSpec>, FixtureError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed.wrapping_add(0x51717));
    let ids: Vec<ViewpointId> = world.nodes().keys().cloned().collect();

    // Candidate (start, goal) pairs per bin by exact geodesic length.
    let mut per_bin: Vec<Vec<(ViewpointId, ViewpointId, Real)>> =
        vec![Vec::new(); spec.length_bins.len()];
    for a in &ids {
        let dist = world.distances_from(a)?;
        for b in &ids {
            if a == b {
                continue;
            }
            let d = dist[world.node_index(b)?];
            if !d.is_finite() {
                continue;
            }
            if let Some(bin) = spec.length_bins.iter().position(|bin| bin.contains(d)) {
                per_bin[bin].push((a.clone(), b.clone(), d));
            }
        }
    }

    let shares: Vec<Real> = spec.length_bins.iter().map(|b| b.share).collect();
    let quotas = largest_remainder(spec.episode_count, &shares);

    let mut picked: Vec<(ViewpointId, ViewpointId)> = Vec::with_capacity(spec.episode_count);
    for (bin, &quota) in quotas.iter().enumerate() {
        if quota == 0 {
            continue;
        }
        let candidates = &per_bin[bin];
        if candidates.len() < quota {
            return Err(FixtureError::BinUnfillable {
                bin,
                needed: quota,
                available: candidates.len(),
            });
        }
        for index in sample_indices(&mut rng, candidates.len(), quota) {
            let (a, b, _) = &candidates[index];
            picked.push((a.clone(), b.clone()));
        }
    }

    // Granularity labels apportioned by the mix, then shuffled.
    let mix = [
        spec.granularity_mix.fine,
        spec.granularity_mix.coarse,
        spec.granularity_mix.zero,
    ];
    let counts = largest_remainder(picked.len(), &mix);
    let mut labels = Vec::with_capacity(picked.len());
    for (g, &count) in [Granularity::Fine, Granularity::Coarse, Granularity::Zero]
        .iter()
        .zip(&counts)
    {
        labels.extend(std::iter::repeat_n(*g, count));
    }
    for i in (1..labels.len()).rev() {
        let j = rng.random_range(0..=i);
        labels.swap(i, j);
    }

    let mut episodes = Vec::with_capacity(picked.len());
    for (k, ((start_id, goal_id), granularity)) in picked.into_iter().zip(labels).enumerate() {
        let heading = 15.0 * rng.random_range(0..24) as Real;
        let start = Pose::new(start_id.clone(), heading, 0.0);
        let (instruction, variants, goals, gt_path) = match granularity {
            Granularity::Fine => {
                let gt = world.shortest_path(&start_id, &goal_id)?;
                let text = fine_instruction(&gt, "Walk");
                let variants = vec![
                    fine_instruction(&gt, "Head"),
                    fine_instruction(&gt, "Proceed"),
                ];
                (
                    Instruction {
                        text,
                        granularity,
                        object_category: None,
                    },
                    variants,
                    vec![goal_id.clone()],
                    gt,
                )
            }
            Granularity::Coarse => {
                let gt = world.shortest_path(&start_id, &goal_id)?;
                (
                    Instruction {
                        text: coarse_instruction(&goal_id, 0),
                        granularity,
                        object_category: None,
                    },
                    vec![
                        coarse_instruction(&goal_id, 1),
                        coarse_instruction(&goal_id, 2),
                    ],
                    vec![goal_id.clone()],
                    gt,
                )
            }
            Granularity::Zero => {
                // The goal is the nearest instance of the picked node's
                // category; all instances count as goals.
                let category =
                    room_category(room_number(&goal_id).expect("synthetic id")).to_string();
                let (nearest, _) = nearest_category_instance(world, &start_id, &category)?
                    .expect("category instance exists");
                if nearest == start_id {
                    // Start already sits in the goal category; skip by
                    // retargeting to the picked goal's path instead.
                    let gt = world.shortest_path(&start_id, &goal_id)?;
                    let category =
                        room_category(room_number(&goal_id).expect("synthetic id")).to_string();
                    (
                        Instruction {
                            text: category.clone(),
                            granularity,
                            object_category: Some(category.clone()),
                        },
                        Vec::new(),
                        category_instances(world, &category),
                        gt,
                    )
                } else {
                    let gt = world.shortest_path(&start_id, &nearest)?;
                    (
                        Instruction {
                            text: category.clone(),
                            granularity,
                            object_category: Some(category.clone()),
                        },
                        Vec::new(),
                        category_instances(world, &category),
                        gt,
                    )
                }
            }
        };
        let mut episode = EpisodeSpec {
            episode_id: format!("ep_{k:04}"),
            scan_id: world.scan_id().to_string(),
            start,
            instruction,
            instruction_variants: variants,
            goals,
            gt_path,
            gt_length_m: 0.0,
        };
        validate_episode(&mut episode, world).map_err(|reason| {
            FixtureError::SpecInvalid(format!("generated episode invalid: {reason}"))
        })?;
        episodes.push(episode);
    }
    Ok(episodes)
}

/// Writes a complete asset-plus-split tree: `graph.json`,
/// `annotations.json`, placeholder images, and one split file per
/// granularity present in `episodes`.
pub fn materialize(
    world: &WorldGraph,
    episodes: &[EpisodeSpec],
    split_name: &str,
    asset_root: &Path,
    data_root: &Path,
    write_images: bool,
) -> Result<(), FixtureError> {
    world.save(asset_root)?;
    if write_images {
        let images = asset_root.join(world.scan_id()).join("images");
        std::fs::create_dir_all(&images).map_err(|e| FixtureError::Io {
            path: images.clone(),
            source: e,
        })?;
        for (id, node) in world.nodes() {
            for heading in node.view_assets.keys() {
                let path = images.join(format!("{id}_{heading}.jpg"));
                // Placeholder bytes; enough for I/O-latency measurements.
                std::fs::write(&path, b"synthetic-render").map_err(|e| FixtureError::Io {
                    path: path.clone(),
                    source: e,
                })?;
            }
        }
    }
    let mut by_granularity: BTreeMap<Granularity, Vec<&EpisodeSpec>> = BTreeMap::new();
    for e in episodes {
        by_granularity
            .entry(e.instruction.granularity)
            .or_default()
            .push(e);
    }
    for (granularity, list) in by_granularity {
        let dir = data_root.join(granularity.dir_name());
        std::fs::create_dir_all(&dir).map_err(|e| FixtureError::Io {
            path: dir.clone(),
            source: e,
        })?;
        let path = dir.join(format!("{split_name}.json"));
        let text = serde_json::to_string_pretty(&list).expect("episodes serialize") + "\n";
        std::fs::write(&path, text).map_err(|e| FixtureError::Io {
            path: path.clone(),
            source: e,
        })?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gen_world_is_deterministic() {
        let spec = SynthSpec::default();
        let a = gen_world(&spec).unwrap();
        let b = gen_world(&spec).unwrap();
        assert_eq!(a.to_canonical_json(), b.to_canonical_json());
    }

    #[test]
    fn degrees_stay_in_range() {
        let spec = SynthSpec {
            seed: 3,
            node_count: 24,
            degree_range: (2, 4),
            ..SynthSpec::default()
        };
        let world = gen_world(&spec).unwrap();
        for id in world.nodes().keys() {
            let degree = world.neighbors(id).unwrap().len();
            assert!((2..=4).contains(&degree), "{id} has degree {degree}");
        }
    }

    #[test]
    fn many_seeds_all_connected() {
        for seed in 0..100 {
            let spec = SynthSpec {
                seed,
                node_count: 12,
                ..SynthSpec::default()
            };
            let world = gen_world(&spec).unwrap();
            // BFS oracle from the first node.
            let ids: Vec<_> = world.nodes().keys().cloned().collect();
            let mut seen = std::collections::BTreeSet::new();
            let mut queue = std::collections::VecDeque::from([ids[0].clone()]);
            seen.insert(ids[0].clone());
            while let Some(v) = queue.pop_front() {
                for (n, _) in world.neighbors(&v).unwrap() {
                    if seen.insert(n.clone()) {
                        queue.push_back(n.clone());
                    }
                }
            }
            assert_eq!(seen.len(), ids.len(), "seed {seed} not connected");
        }
    }

    #[test]
    fn captions_match_observation_markers() {
        let spec = SynthSpec {
            seed: 9,
            ..SynthSpec::default()
        };
        let world = gen_world(&spec).unwrap();
        for id in world.nodes().keys() {
            let pose = Pose::new(id.clone(), 0.0, 0.0);
            let obs = crate::observation::compose_observation(
                &world,
                &pose,
                crate::observation::ObservationFormat::FourView,
                true,
            )
            .unwrap();
            for c in &obs.candidates {
                let target_number = room_number(&c.target).unwrap();
                assert_eq!(
                    c.caption.as_deref(),
                    Some(room_caption(target_number).as_str())
                );
            }
        }
    }

    #[test]
    fn split_respects_bins_and_validates() {
        let spec = SynthSpec {
            seed: 5,
            node_count: 20,
            episode_count: 12,
            length_bins: vec![
                SynthLengthBin {
                    min_m: 0.0,
                    max_m: Some(8.0),
                    share: 0.5,
                },
                SynthLengthBin {
                    min_m: 8.0,
                    max_m: None,
                    share: 0.5,
                },
            ],
            ..SynthSpec::default()
        };
        let world = gen_world(&spec).unwrap();
        let episodes = gen_split(&world, &spec).unwrap();
        assert_eq!(episodes.len(), 12);
        let short = episodes.iter().filter(|e| e.gt_length_m < 8.0).count();
        assert_eq!(short, 6);
        for e in &episodes {
            assert_eq!(e.gt_path[0], e.start.viewpoint);
            assert!(e.goals.contains(e.gt_path.last().unwrap()));
        }
    }

    #[test]
    fn fine_instruction_sentence_count_matches_path() {
        let spec = SynthSpec {
            seed: 21,
            episode_count: 10,
            ..SynthSpec::default()
        };
        let world = gen_world(&spec).unwrap();
        let episodes = gen_split(&world, &spec).unwrap();
        for e in &episodes {
            let sentences = e.instruction.text.matches("a synthetic room").count();
            assert_eq!(sentences, e.gt_path.len() - 1, "{}", e.instruction.text);
            assert_eq!(e.instruction_variants.len(), 2);
        }
    }

    #[test]
    fn zero_split_uses_categories() {
        let spec = SynthSpec {
            seed: 8,
            node_count: 24,
            episode_count: 8,
            granularity_mix: GranularityMix {
                fine: 0.0,
                coarse: 0.0,
                zero: 1.0,
            },
            ..SynthSpec::default()
        };
        let world = gen_world(&spec).unwrap();
        let episodes = gen_split(&world, &spec).unwrap();
        for e in &episodes {
            assert_eq!(e.instruction.granularity, Granularity::Zero);
            assert_eq!(
                e.instruction.object_category.as_deref(),
                Some(e.instruction.text.as_str())
            );
            // gt ends at an instance of the category.
            let last = room_number(e.gt_path.last().unwrap()).unwrap();
            assert_eq!(room_category(last), e.instruction.text);
        }
    }

    #[test]
    fn two_layer_world_spans_elevations() {
        let spec = SynthSpec {
            seed: 4,
            node_count: 16,
            layers: 2,
            degree_range: (2, 5),
            ..SynthSpec::default()
        };
        let world = gen_world(&spec).unwrap();
        let zs: std::collections::BTreeSet<i64> = world
            .nodes()
            .values()
            .map(|n| n.position[2] as i64)
            .collect();
        assert_eq!(zs.len(), 2);
        // Still connected across the stair edges.
        let ids: Vec<_> = world.nodes().keys().cloned().collect();
        assert!(world
            .geodesic_distance(&ids[0], ids.last().unwrap())
            .unwrap()
            .is_finite());
    }

    #[test]
    fn materialize_round_trips_through_loaders() {
        let spec = SynthSpec {
            seed: 2,
            episode_count: 6,
            ..SynthSpec::default()
        };
        let world = gen_world(&spec).unwrap();
        let episodes = gen_split(&world, &spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let assets = dir.path().join("assets");
        let data = dir.path().join("data");
        materialize(&world, &episodes, "dev", &assets, &data, true).unwrap();

        let loaded = crate::world::load_world(&assets, "synth").unwrap();
        assert_eq!(loaded.node_count(), world.node_count());
        assert!(
            loaded
                .node(&episodes[0].start.viewpoint)
                .unwrap()
                .view_assets
                .len()
                == 4
        );
        let split = crate::tasks::load_split(Granularity::Fine, "dev", &data, &assets).unwrap();
        assert_eq!(split.episodes.len(), 6);
        assert!(split.rejected.is_empty());
    }
}
