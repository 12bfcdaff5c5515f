//! Episodes over the three instruction granularities, split loading, and
//! stratified benchmark sampling.
//!
//! Split files live at `<data_root>/<task>/<split>.json` as a JSON list of
//! episode records in the harness's own schema; conversion from upstream
//! datasets is a one-time external step. Sampling stratifies by scan id,
//! apportions per-scan counts over path-length bins by largest remainder,
//! and retains exactly one instruction per trajectory, drawn uniformly by a
//! seeded generator.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;
use crate::world::{load_world, Pose, WorldError, WorldGraph};
use crate::{Real, ViewpointId};

#[derive(Debug, Error)]
pub enum TaskError {
    #[error("split file not found: {0}")]
    SplitNotFound(PathBuf),
    #[error("split file {path} is not valid json: {reason}")]
    SplitMalformed { path: PathBuf, reason: String },
    #[error(transparent)]
    World(#[from] WorldError),
    #[error("sampling plan invalid: {0}")]
    PlanInvalid(String),
    #[error("insufficient pool for scan {scan} bin {bin}: needed {needed}, available {available}")]
    InsufficientPool {
        scan: String,
        bin: usize,
        needed: usize,
        available: usize,
    },
}

/// Instruction granularity spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    /// Step-by-step route description.
    Fine,
    /// High-level description of a remote, out-of-sight target.
    Coarse,
    /// A single term naming the target category.
    Zero,
}

impl Granularity {
    pub fn dir_name(&self) -> &'static str {
        match self {
            Granularity::Fine => "fine",
            Granularity::Coarse => "coarse",
            Granularity::Zero => "zero",
        }
    }
}

impl std::str::FromStr for Granularity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "fine" => Ok(Granularity::Fine),
            "coarse" => Ok(Granularity::Coarse),
            "zero" => Ok(Granularity::Zero),
            other => Err(format!("unknown task granularity {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instruction {
    pub text: String,
    pub granularity: Granularity,
    /// Required for zero-granularity episodes, where the instruction text is
    /// exactly the category term.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object_category: Option<String>,
}

/// One navigation task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSpec {
    pub episode_id: String,
    pub scan_id: String,
    pub start: Pose,
    pub instruction: Instruction,
    /// Alternative phrasings of the same instruction; sampling keeps one.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub instruction_variants: Vec<String>,
    /// Target viewpoints; reaching any of them counts.
    pub goals: Vec<ViewpointId>,
    /// Ground-truth path from the start viewpoint to a goal.
    pub gt_path: Vec<ViewpointId>,
    /// Metric length of `gt_path`; recomputed from the graph at load time.
    #[serde(skip)]
    pub gt_length_m: Real,
}

/// A half-open path-length bin `[min_m, max_m)`; `None` means unbounded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthBin {
    pub min_m: Real,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_m: Option<Real>,
    pub proportion: Real,
}

impl LengthBin {
    pub fn contains(&self, length_m: Real) -> bool {
        length_m >= self.min_m && self.max_m.is_none_or(|max| length_m < max)
    }
}

/// Stratified sampling plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingPlan {
    /// Episodes to draw per scan id.
    pub strata: BTreeMap<String, usize>,
    /// Path-length bins; proportions must sum to 1 (±1e−9).
    pub length_bins: Vec<LengthBin>,
    /// Target counts per object category (zero-granularity pools). Balancing
    /// is a greedy preference within each stratum cell, not a hard quota.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category_balance: Option<BTreeMap<String, usize>>,
}

impl SamplingPlan {
    pub fn validate(&self) -> Result<(), TaskError> {
        let total: Real = self.length_bins.iter().map(|b| b.proportion).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(TaskError::PlanInvalid(format!(
                "bin proportions sum to {total}, expected 1"
            )));
        }
        for (i, bin) in self.length_bins.iter().enumerate() {
            if bin.proportion < 0.0 {
                return Err(TaskError::PlanInvalid(format!(
                    "bin {i} has negative proportion"
                )));
            }
            if let Some(max) = bin.max_m {
                if max <= bin.min_m {
                    return Err(TaskError::PlanInvalid(format!("bin {i} is empty")));
                }
            }
            for (j, other) in self.length_bins.iter().enumerate().skip(i + 1) {
                let i_max = bin.max_m.unwrap_or(Real::INFINITY);
                let j_max = other.max_m.unwrap_or(Real::INFINITY);
                if bin.min_m < j_max && other.min_m < i_max {
                    return Err(TaskError::PlanInvalid(format!("bins {i} and {j} overlap")));
                }
            }
        }
        Ok(())
    }

    fn bin_of(&self, length_m: Real) -> Option<usize> {
        self.length_bins.iter().position(|b| b.contains(length_m))
    }
}

/// Largest-remainder apportionment of `total` over fractional `shares`.
///
/// Floors the quotas, then hands the remaining units to the largest
/// fractional remainders (ties broken by index). Deterministic and exact:
/// the result always sums to `total`.
pub fn largest_remainder<S: Scalar>(total: usize, shares: &[S]) -> Vec<usize> {
    if shares.is_empty() {
        return Vec::new();
    }
    let total_s = S::from_usize(total).expect("count fits scalar");
    let mut counts = Vec::with_capacity(shares.len());
    let mut remainders: Vec<(usize, S)> = Vec::with_capacity(shares.len());
    let mut assigned = 0usize;
    for (i, share) in shares.iter().enumerate() {
        let quota = *share * total_s;
        let floor = quota.floor();
        let count = floor.to_usize().unwrap_or(0);
        counts.push(count);
        assigned += count;
        remainders.push((i, quota - floor));
    }
    remainders.sort_by(|(ia, ra), (ib, rb)| {
        rb.partial_cmp(ra)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| ia.cmp(ib))
    });
    let mut leftover = total.saturating_sub(assigned);
    for (i, _) in remainders {
        if leftover == 0 {
            break;
        }
        counts[i] += 1;
        leftover -= 1;
    }
    counts
}

/// A rejected episode with the reason it failed validation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RejectedEpisode {
    pub episode_id: String,
    pub reason: String,
}

/// Result of loading a split: validated episodes plus collected rejects.
#[derive(Debug)]
pub struct SplitLoad {
    pub episodes: Vec<EpisodeSpec>,
    pub rejected: Vec<RejectedEpisode>,
}

/// Validates one episode against its world graph and fills `gt_length_m`.
pub fn validate_episode(episode: &mut EpisodeSpec, graph: &WorldGraph) -> Result<(), String> {
    if !episode.start.heading.is_finite() {
        return Err("start heading is not finite".to_string());
    }
    episode.start.heading = crate::geometry::normalize_degrees(episode.start.heading);
    if !graph.contains(&episode.start.viewpoint) {
        return Err(format!(
            "start viewpoint {} unknown",
            episode.start.viewpoint
        ));
    }
    if episode.goals.is_empty() {
        return Err("episode has no goals".to_string());
    }
    for goal in &episode.goals {
        if !graph.contains(goal) {
            return Err(format!("goal viewpoint {goal} unknown"));
        }
    }
    if episode.gt_path.is_empty() {
        return Err("ground-truth path is empty".to_string());
    }
    if episode.gt_path[0] != episode.start.viewpoint {
        return Err("ground-truth path does not begin at the start viewpoint".to_string());
    }
    let last = episode.gt_path.last().expect("non-empty");
    if !episode.goals.contains(last) {
        return Err("ground-truth path does not end at a goal".to_string());
    }
    match graph.path_length(&episode.gt_path) {
        Some(length) => episode.gt_length_m = length,
        None => return Err("ground-truth path uses a missing edge".to_string()),
    }
    if episode.instruction.granularity == Granularity::Zero {
        match &episode.instruction.object_category {
            None => return Err("zero-granularity episode lacks an object category".to_string()),
            Some(category) if category != &episode.instruction.text => {
                return Err(
                    "zero-granularity instruction text must equal the category term".to_string(),
                )
            }
            Some(_) => {}
        }
    }
    Ok(())
}

/// Loads `<data_root>/<task>/<split_name>.json`, validating every episode
/// against its scan graph under `asset_root`. Invalid episodes are rejected
/// with reasons, not fatal; a missing split file is.
pub fn load_split(
    task: Granularity,
    split_name: &str,
    data_root: &Path,
    asset_root: &Path,
) -> Result<SplitLoad, TaskError> {
    let path = data_root
        .join(task.dir_name())
        .join(format!("{split_name}.json"));
    let text = match std::fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(TaskError::SplitNotFound(path))
        }
        Err(e) => {
            return Err(TaskError::SplitMalformed {
                path,
                reason: e.to_string(),
            })
        }
    };
    let raw: Vec<EpisodeSpec> =
        serde_json::from_str(&text).map_err(|e| TaskError::SplitMalformed {
            path: path.clone(),
            reason: e.to_string(),
        })?;

    let mut worlds: BTreeMap<String, WorldGraph> = BTreeMap::new();
    let mut episodes = Vec::new();
    let mut rejected = Vec::new();
    for mut episode in raw {
        if episode.instruction.granularity != task {
            rejected.push(RejectedEpisode {
                episode_id: episode.episode_id.clone(),
                reason: format!(
                    "episode granularity {:?} does not match task {:?}",
                    episode.instruction.granularity, task
                ),
            });
            continue;
        }
        if !worlds.contains_key(&episode.scan_id) {
            match load_world(asset_root, &episode.scan_id) {
                Ok(world) => {
                    worlds.insert(episode.scan_id.clone(), world);
                }
                Err(e @ WorldError::GraphNotFound { .. }) => {
                    // Fatal: the asset tree itself is unusable.
                    return Err(TaskError::World(e));
                }
                Err(e) => return Err(TaskError::World(e)),
            }
        }
        let graph = &worlds[&episode.scan_id];
        match validate_episode(&mut episode, graph) {
            Ok(()) => episodes.push(episode),
            Err(reason) => rejected.push(RejectedEpisode {
                episode_id: episode.episode_id.clone(),
                reason,
            }),
        }
    }
    Ok(SplitLoad { episodes, rejected })
}

/// Stratified sampling: per-scan counts match the plan exactly; within each
/// scan, per-bin counts follow largest-remainder apportionment; exactly one
/// instruction is retained per selected trajectory. Deterministic for a
/// fixed `(pool, plan, seed)`.
pub fn stratified_sample(
    pool: &[EpisodeSpec],
    plan: &SamplingPlan,
    seed: u64,
) -> Result<Vec<EpisodeSpec>, TaskError> {
    plan.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shares: Vec<Real> = plan.length_bins.iter().map(|b| b.proportion).collect();

    let mut selected = Vec::new();
    for (scan, &count) in &plan.strata {
        // Stable candidate order before seeded choice.
        let mut scan_pool: Vec<&EpisodeSpec> = pool.iter().filter(|e| &e.scan_id == scan).collect();
        scan_pool.sort_by(|a, b| a.episode_id.cmp(&b.episode_id));

        let quotas = largest_remainder(count, &shares);
        for (bin_index, &quota) in quotas.iter().enumerate() {
            if quota == 0 {
                continue;
            }
            let candidates: Vec<&EpisodeSpec> = scan_pool
                .iter()
                .copied()
                .filter(|e| plan.bin_of(e.gt_length_m) == Some(bin_index))
                .collect();
            if candidates.len() < quota {
                return Err(TaskError::InsufficientPool {
                    scan: scan.clone(),
                    bin: bin_index,
                    needed: quota,
                    available: candidates.len(),
                });
            }
            let picks = match &plan.category_balance {
                Some(targets) => pick_balanced(&candidates, quota, targets, &selected),
                None => sample_indices(&mut rng, candidates.len(), quota)
                    .into_iter()
                    .map(|i| candidates[i])
                    .collect(),
            };
            for episode in picks {
                let mut chosen = episode.clone();
                let options = 1 + chosen.instruction_variants.len();
                let pick = rng.random_range(0..options);
                if pick > 0 {
                    chosen.instruction.text = chosen.instruction_variants[pick - 1].clone();
                }
                chosen.instruction_variants.clear();
                selected.push(chosen);
            }
        }
    }
    Ok(selected)
}

/// Greedy category balancing: repeatedly take the candidate whose category
/// has the largest remaining deficit against its target, ties broken by
/// episode id.
fn pick_balanced<'a>(
    candidates: &[&'a EpisodeSpec],
    quota: usize,
    targets: &BTreeMap<String, usize>,
    already_selected: &[EpisodeSpec],
) -> Vec<&'a EpisodeSpec> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for e in already_selected {
        if let Some(category) = &e.instruction.object_category {
            *counts.entry(category.as_str()).or_default() += 1;
        }
    }
    let mut remaining: Vec<&EpisodeSpec> = candidates.to_vec();
    let mut picks = Vec::with_capacity(quota);
    for _ in 0..quota {
        let best = remaining
            .iter()
            .enumerate()
            .max_by(|(_, a), (_, b)| {
                let deficit = |e: &EpisodeSpec| -> i64 {
                    match &e.instruction.object_category {
                        Some(category) => {
                            let target = targets.get(category).copied().unwrap_or(0) as i64;
                            let have = counts.get(category.as_str()).copied().unwrap_or(0) as i64;
                            target - have
                        }
                        None => i64::MIN,
                    }
                };
                deficit(a)
                    .cmp(&deficit(b))
                    .then_with(|| b.episode_id.cmp(&a.episode_id))
            })
            .map(|(i, _)| i)
            .expect("quota bounded by candidate count");
        let episode = remaining.remove(best);
        if let Some(category) = &episode.instruction.object_category {
            *counts.entry(category.as_str()).or_default() += 1;
        }
        picks.push(episode);
    }
    picks
}

/// Reference characteristics of the upstream datasets behind each
/// granularity. These are metadata assertions for validating converted
/// splits against their sources, not runtime invariants — synthetic
/// fixtures are not expected to match them.
pub mod dataset_context {
    /// Fine-grained instructions average this many words.
    pub const FINE_AVG_INSTRUCTION_WORDS: usize = 32;
    /// Fine-grained ground-truth paths average this many steps.
    pub const FINE_AVG_GT_STEPS: usize = 7;
    /// Fine-grained ground-truth paths average this many meters.
    pub const FINE_AVG_GT_METERS: f64 = 10.0;
    /// Coarse-grained instructions average this many words.
    pub const COARSE_AVG_INSTRUCTION_WORDS: usize = 21;
    /// Coarse-grained paths range over this many steps.
    pub const COARSE_GT_STEP_RANGE: (usize, usize) = (4, 7);
    /// Zero-grained navigation uses this many goal categories.
    pub const ZERO_GOAL_CATEGORIES: usize = 21;
}

/// Width of the instruction-length histogram buckets, in words.
pub const INSTRUCTION_WORD_BIN: usize = 8;

/// Distribution summary of a benchmark for comparison plots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSummary {
    pub total: usize,
    pub per_scan: BTreeMap<String, usize>,
    /// Count per plan length bin, in bin order.
    pub length_histogram: Vec<usize>,
    /// Episodes whose length falls in no bin.
    pub length_unbinned: usize,
    /// Word-count bucket lower bound → episode count.
    pub instruction_word_histogram: BTreeMap<usize, usize>,
    pub granularity_counts: BTreeMap<String, usize>,
    pub mean_gt_length_m: Real,
    pub mean_gt_steps: Real,
    pub mean_instruction_words: Real,
}

/// Summarizes a set of episodes against a set of length bins.
pub fn describe_benchmark(episodes: &[EpisodeSpec], bins: &[LengthBin]) -> BenchmarkSummary {
    let mut per_scan = BTreeMap::new();
    let mut length_histogram = vec![0usize; bins.len()];
    let mut length_unbinned = 0usize;
    let mut words_hist = BTreeMap::new();
    let mut granularity_counts = BTreeMap::new();
    let mut length_sum = 0.0;
    let mut steps_sum = 0.0;
    let mut words_sum = 0.0;
    for e in episodes {
        *per_scan.entry(e.scan_id.clone()).or_default() += 1;
        match bins.iter().position(|b| b.contains(e.gt_length_m)) {
            Some(i) => length_histogram[i] += 1,
            None => length_unbinned += 1,
        }
        let words = e.instruction.text.split_whitespace().count();
        *words_hist
            .entry((words / INSTRUCTION_WORD_BIN) * INSTRUCTION_WORD_BIN)
            .or_default() += 1;
        *granularity_counts
            .entry(e.instruction.granularity.dir_name().to_string())
            .or_default() += 1;
        length_sum += e.gt_length_m;
        steps_sum += e.gt_path.len().saturating_sub(1) as Real;
        words_sum += words as Real;
    }
    let n = episodes.len().max(1) as Real;
    BenchmarkSummary {
        total: episodes.len(),
        per_scan,
        length_histogram,
        length_unbinned,
        instruction_word_histogram: words_hist,
        granularity_counts,
        mean_gt_length_m: length_sum / n,
        mean_gt_steps: steps_sum / n,
        mean_instruction_words: words_sum / n,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bins() -> Vec<LengthBin> {
        vec![
            LengthBin {
                min_m: 0.0,
                max_m: Some(8.0),
                proportion: 0.5,
            },
            LengthBin {
                min_m: 8.0,
                max_m: Some(15.0),
                proportion: 0.3,
            },
            LengthBin {
                min_m: 15.0,
                max_m: None,
                proportion: 0.2,
            },
        ]
    }

    fn pool_episode(id: &str, scan: &str, length: Real) -> EpisodeSpec {
        EpisodeSpec {
            episode_id: id.to_string(),
            scan_id: scan.to_string(),
            start: Pose::new("A", 0.0, 0.0),
            instruction: Instruction {
                text: format!("walk {id}"),
                granularity: Granularity::Fine,
                object_category: None,
            },
            instruction_variants: vec![format!("head {id}"), format!("proceed {id}")],
            goals: vec!["B".to_string()],
            gt_path: vec!["A".to_string(), "B".to_string()],
            gt_length_m: length,
        }
    }

    fn pool() -> Vec<EpisodeSpec> {
        let mut pool = Vec::new();
        for i in 0..40 {
            let length = match i % 4 {
                0 => 3.0,
                1 => 6.0,
                2 => 10.0,
                _ => 20.0,
            };
            pool.push(pool_episode(&format!("ep{i:03}"), "scanA", length));
        }
        pool
    }

    #[test]
    fn largest_remainder_exact_case() {
        assert_eq!(largest_remainder(20, &[0.5, 0.3, 0.2]), vec![10, 6, 4]);
    }

    #[test]
    fn largest_remainder_fractional_case() {
        // 7 * [0.5, 0.3, 0.2] = [3.5, 2.1, 1.4] → floors [3, 2, 1], one
        // leftover goes to the 0.5 remainder.
        assert_eq!(largest_remainder(7, &[0.5, 0.3, 0.2]), vec![4, 2, 1]);
        assert_eq!(largest_remainder(0, &[0.5, 0.5]), vec![0, 0]);
        let counts = largest_remainder(13, &[0.25f64; 4]);
        assert_eq!(counts.iter().sum::<usize>(), 13);
    }

    #[test]
    fn sample_counts_match_apportionment() {
        let plan = SamplingPlan {
            strata: [("scanA".to_string(), 20)].into_iter().collect(),
            length_bins: bins(),
            category_balance: None,
        };
        let sampled = stratified_sample(&pool(), &plan, 7).unwrap();
        assert_eq!(sampled.len(), 20);
        let hist: Vec<usize> = {
            let mut h = vec![0usize; 3];
            for e in &sampled {
                h[plan.bin_of(e.gt_length_m).unwrap()] += 1;
            }
            h
        };
        assert_eq!(hist, vec![10, 6, 4]);
        // No duplicates, all drawn from the pool.
        let mut ids: Vec<&str> = sampled.iter().map(|e| e.episode_id.as_str()).collect();
        ids.sort_unstable();
        ids.dedup();
        assert_eq!(ids.len(), 20);
    }

    #[test]
    fn sampling_is_deterministic_and_keeps_one_instruction() {
        let plan = SamplingPlan {
            strata: [("scanA".to_string(), 12)].into_iter().collect(),
            length_bins: bins(),
            category_balance: None,
        };
        let a = stratified_sample(&pool(), &plan, 99).unwrap();
        let b = stratified_sample(&pool(), &plan, 99).unwrap();
        assert_eq!(a, b);
        for e in &a {
            assert!(e.instruction_variants.is_empty());
        }
        // A different seed may choose different phrasings.
        let c = stratified_sample(&pool(), &plan, 100).unwrap();
        assert_eq!(c.len(), a.len());
    }

    #[test]
    fn insufficient_pool_names_the_bin() {
        let plan = SamplingPlan {
            strata: [("scanA".to_string(), 39)].into_iter().collect(),
            length_bins: bins(),
            category_balance: None,
        };
        let err = stratified_sample(&pool(), &plan, 1).unwrap_err();
        match err {
            TaskError::InsufficientPool { scan, .. } => assert_eq!(scan, "scanA"),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn plan_validation_rejects_bad_proportions_and_overlap() {
        let mut plan = SamplingPlan {
            strata: BTreeMap::new(),
            length_bins: bins(),
            category_balance: None,
        };
        plan.length_bins[0].proportion = 0.6;
        assert!(matches!(plan.validate(), Err(TaskError::PlanInvalid(_))));

        let mut overlapping = SamplingPlan {
            strata: BTreeMap::new(),
            length_bins: bins(),
            category_balance: None,
        };
        overlapping.length_bins[1].min_m = 5.0;
        assert!(matches!(
            overlapping.validate(),
            Err(TaskError::PlanInvalid(_))
        ));
    }

    #[test]
    fn load_split_rejects_invalid_episodes_with_reasons() {
        let dir = tempfile::tempdir().unwrap();
        let spec = crate::fixtures::SynthSpec {
            seed: 14,
            episode_count: 3,
            ..Default::default()
        };
        let world = crate::fixtures::gen_world(&spec).unwrap();
        let mut episodes = crate::fixtures::gen_split(&world, &spec).unwrap();
        // Corrupt one episode: make its ground truth skip a non-edge.
        let ids: Vec<ViewpointId> = world.nodes().keys().cloned().collect();
        let far = ids
            .iter()
            .find(|v| {
                world.edge_weight(&episodes[0].gt_path[0], v).is_none()
                    && **v != episodes[0].gt_path[0]
            })
            .unwrap()
            .clone();
        episodes[0].gt_path.insert(1, far);
        crate::fixtures::materialize(
            &world,
            &episodes,
            "dev",
            &dir.path().join("assets"),
            &dir.path().join("data"),
            false,
        )
        .unwrap();

        let load = load_split(
            Granularity::Fine,
            "dev",
            &dir.path().join("data"),
            &dir.path().join("assets"),
        )
        .unwrap();
        assert_eq!(load.episodes.len(), 2);
        assert_eq!(load.rejected.len(), 1);
        assert!(load.rejected[0].reason.contains("missing edge"));
    }

    #[test]
    fn synthetic_200_episode_split_all_validate() {
        let dir = tempfile::tempdir().unwrap();
        let spec = crate::fixtures::SynthSpec {
            seed: 15,
            node_count: 26,
            episode_count: 200,
            ..Default::default()
        };
        let world = crate::fixtures::gen_world(&spec).unwrap();
        let episodes = crate::fixtures::gen_split(&world, &spec).unwrap();
        crate::fixtures::materialize(
            &world,
            &episodes,
            "dev",
            &dir.path().join("assets"),
            &dir.path().join("data"),
            false,
        )
        .unwrap();
        let load = load_split(
            Granularity::Fine,
            "dev",
            &dir.path().join("data"),
            &dir.path().join("assets"),
        )
        .unwrap();
        assert_eq!(load.episodes.len(), 200);
        assert!(load.rejected.is_empty());
    }

    #[test]
    fn zero_category_count_matches_dataset_context() {
        assert_eq!(
            crate::fixtures::ZERO_CATEGORIES.len(),
            dataset_context::ZERO_GOAL_CATEGORIES
        );
    }

    #[test]
    fn describe_empty_and_small() {
        let summary = describe_benchmark(&[], &bins());
        assert_eq!(summary.total, 0);
        assert_eq!(summary.length_histogram, vec![0, 0, 0]);

        let episodes = vec![
            pool_episode("a", "s", 5.0),
            pool_episode("b", "s", 10.0),
            pool_episode("c", "s", 15.0),
        ];
        let summary = describe_benchmark(&episodes, &bins());
        assert_eq!(summary.length_histogram, vec![1, 1, 1]);
        assert_eq!(summary.per_scan["s"], 3);
    }
}
