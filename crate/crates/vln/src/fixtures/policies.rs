//! Scripted navigation policies behind the model interface.
//!
//! Each policy reads the rendered prompt text the way a real model would:
//! the options block, the instruction line, the history, and (for the
//! guidable policy) the injected guidance. Synthetic captions ("a synthetic
//! room 7") let world-aware policies localize the agent from text alone.
//! All policies are pure functions of the request, so concurrent episodes
//! stay deterministic.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::{Arc, LazyLock};

use regex::Regex;

use super::{category_instances, room_id, room_number};
use crate::models::{ModelBackend, ModelError, ModelRequest, ModelResponse, UsageCounters};
use crate::registry::Registry;
use crate::tasks::{load_split, EpisodeSpec, Granularity};
use crate::world::{load_world, WorldGraph};
use crate::{Real, ViewpointId};

static OPTION_LINE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?m)^- (?:Front|Right|Back|Left): \[(\d+)\] (.*?) \([0-9.]+ m\)$")
        .expect("static regex")
});
static ROOM: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"a synthetic room (\d+)").expect("static regex"));
static GUIDANCE_LINE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?m)^Assistant guidance: (.*)$").expect("static regex"));

/// A parsed option: marker plus the synthetic room it leads to.
#[derive(Debug, Clone)]
struct ParsedOption {
    marker: u32,
    target: ViewpointId,
}

fn parse_options(task_text: &str) -> Vec<ParsedOption> {
    OPTION_LINE
        .captures_iter(task_text)
        .filter_map(|c| {
            let marker: u32 = c[1].parse().ok()?;
            let room: usize = ROOM.captures(&c[2]).and_then(|m| m[1].parse().ok())?;
            Some(ParsedOption {
                marker,
                target: room_id(room),
            })
        })
        .collect()
}

/// The live instruction line (the last one, so failure exemplars quoting
/// instructions do not confuse the scan).
fn live_instruction(task_text: &str) -> Option<&str> {
    task_text
        .lines()
        .rev()
        .find_map(|line| line.strip_prefix("Instruction: "))
}

fn respond(backend_id: &str, text: String) -> Result<ModelResponse, ModelError> {
    Ok(ModelResponse {
        text: text.trim_end().to_string(),
        latency_s: 0.0,
        usage: UsageCounters::default(),
        backend_id: backend_id.to_string(),
    })
}

/// Loads every scan directory under an asset root.
fn load_all_worlds(asset_root: &Path) -> Result<BTreeMap<String, Arc<WorldGraph>>, String> {
    let mut worlds = BTreeMap::new();
    let entries = std::fs::read_dir(asset_root)
        .map_err(|e| format!("cannot read asset root {}: {e}", asset_root.display()))?;
    for entry in entries.flatten() {
        let path = entry.path();
        if path.is_dir() && path.join("graph.json").is_file() {
            let scan = entry.file_name().to_string_lossy().to_string();
            let world = load_world(asset_root, &scan).map_err(|e| e.to_string())?;
            worlds.insert(scan, Arc::new(world));
        }
    }
    if worlds.is_empty() {
        return Err(format!(
            "no scans with graph.json under {}",
            asset_root.display()
        ));
    }
    Ok(worlds)
}

/// Locates the node (and world) whose neighbor set equals the offered
/// option targets.
fn locate<'w>(
    worlds: &'w BTreeMap<String, Arc<WorldGraph>>,
    options: &[ParsedOption],
) -> Option<(&'w Arc<WorldGraph>, ViewpointId)> {
    let targets: BTreeSet<&str> = options.iter().map(|o| o.target.as_str()).collect();
    if targets.is_empty() {
        return None;
    }
    for world in worlds.values() {
        for id in world.nodes().keys() {
            let neighbors: BTreeSet<&str> = world
                .neighbors(id)
                .ok()?
                .into_iter()
                .map(|(n, _)| n.as_str())
                .collect();
            if neighbors == targets {
                return Some((world, id.clone()));
            }
        }
    }
    None
}

/// Follows the shortest path implied by the instruction and stops on a
/// goal. On synthetic splits this scores SR = 1 and SPL = 1: each step
/// follows a shortest path to the (nearest) goal, so the walked length
/// equals the geodesic length exactly.
pub struct OptimalFollower {
    worlds: BTreeMap<String, Arc<WorldGraph>>,
}

impl OptimalFollower {
    pub fn new(worlds: BTreeMap<String, Arc<WorldGraph>>) -> Self {
        OptimalFollower { worlds }
    }

    pub fn from_asset_root(asset_root: &Path) -> Result<Self, String> {
        Ok(OptimalFollower {
            worlds: load_all_worlds(asset_root)?,
        })
    }

    /// Goal set implied by the instruction: the last mentioned room, or all
    /// instances of a category for zero-granularity text.
    fn goals(world: &WorldGraph, instruction: &str) -> Vec<ViewpointId> {
        let rooms: Vec<usize> = ROOM
            .captures_iter(instruction)
            .filter_map(|c| c[1].parse().ok())
            .collect();
        match rooms.last() {
            Some(&n) => vec![room_id(n)],
            None => category_instances(world, instruction.trim()),
        }
    }
}

impl ModelBackend for OptimalFollower {
    fn id(&self) -> &str {
        "scripted-optimal"
    }

    fn generate(&self, req: &ModelRequest) -> Result<ModelResponse, ModelError> {
        let options = parse_options(&req.task_text);
        let Some((world, current)) = locate(&self.worlds, &options) else {
            return respond(self.id(), "Action: Stop".to_string());
        };
        let Some(instruction) = live_instruction(&req.task_text) else {
            return respond(self.id(), "Action: Stop".to_string());
        };
        let goals = Self::goals(world, instruction);
        if goals.iter().any(|g| g == &current) {
            return respond(self.id(), "Action: Stop".to_string());
        }
        // Nearest goal, ties by id, then the first hop of its shortest path.
        let mut best: Option<(Real, &ViewpointId)> = None;
        for goal in &goals {
            let d = world
                .geodesic_distance(&current, goal)
                .unwrap_or(Real::INFINITY);
            if !d.is_finite() {
                continue;
            }
            let better = match best {
                None => true,
                Some((bd, _)) => d < bd,
            };
            if better {
                best = Some((d, goal));
            }
        }
        let Some((_, goal)) = best else {
            return respond(self.id(), "Action: Stop".to_string());
        };
        let path = world
            .shortest_path(&current, goal)
            .map_err(|e| ModelError::Misconfigured(e.to_string()))?;
        let next = &path[1];
        match options.iter().find(|o| &o.target == next) {
            Some(option) => respond(self.id(), format!("Action: {}", option.marker)),
            None => respond(self.id(), "Action: Stop".to_string()),
        }
    }
}

/// Bounces between low-numbered rooms forever: at every step it moves to
/// the option with the smallest room number and never stops. The room
/// numbers along the walk are non-increasing every other step, so the walk
/// settles into a two-cycle and trips the loop detector.
#[derive(Debug, Default)]
pub struct Looper;

fn min_room_option(options: &[ParsedOption]) -> Option<&ParsedOption> {
    options
        .iter()
        .min_by_key(|o| (room_number(&o.target).unwrap_or(usize::MAX), o.marker))
}

impl ModelBackend for Looper {
    fn id(&self) -> &str {
        "scripted-looper"
    }

    fn generate(&self, req: &ModelRequest) -> Result<ModelResponse, ModelError> {
        let options = parse_options(&req.task_text);
        match min_room_option(&options) {
            Some(option) => respond(self.id(), format!("Action: {}", option.marker)),
            None => respond(self.id(), "Action: Stop".to_string()),
        }
    }
}

/// Never produces a parseable action; exercises the retry and
/// generation-error contracts.
#[derive(Debug, Default)]
pub struct GarbageEmitter;

impl ModelBackend for GarbageEmitter {
    fn id(&self) -> &str {
        "scripted-garbage"
    }

    fn generate(&self, _req: &ModelRequest) -> Result<ModelResponse, ModelError> {
        respond(
            self.id(),
            "I wander aimlessly, unsure of every direction.".to_string(),
        )
    }
}

/// Picks a pseudo-random valid option (or stop) from a hash of the prompt;
/// deterministic for identical prompts, independent of call order.
#[derive(Debug)]
pub struct RandomWalker {
    seed: u64,
    stop_weight: usize,
}

impl RandomWalker {
    pub fn new(seed: u64) -> Self {
        RandomWalker {
            seed,
            stop_weight: 1,
        }
    }
}

fn fnv1a64(bytes: &[u8], seed: u64) -> u64 {
    let mut hash = 0xcbf29ce484222325u64 ^ seed;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

impl ModelBackend for RandomWalker {
    fn id(&self) -> &str {
        "scripted-random"
    }

    fn generate(&self, req: &ModelRequest) -> Result<ModelResponse, ModelError> {
        let options = parse_options(&req.task_text);
        if options.is_empty() {
            return respond(self.id(), "Action: Stop".to_string());
        }
        let pick = fnv1a64(req.task_text.as_bytes(), self.seed) as usize
            % (options.len() + self.stop_weight);
        match options.get(pick) {
            Some(option) => respond(self.id(), format!("Action: {}", option.marker)),
            None => respond(self.id(), "Action: Stop".to_string()),
        }
    }
}

/// Declares `Revise` on its first proposal each step, then keeps the
/// replanned one: exercises the one-replanning-round contract end to end.
#[derive(Debug, Default)]
pub struct ReviseOnce;

impl ModelBackend for ReviseOnce {
    fn id(&self) -> &str {
        "scripted-revise-once"
    }

    fn generate(&self, req: &ModelRequest) -> Result<ModelResponse, ModelError> {
        let options = parse_options(&req.task_text);
        if req.task_text.contains("Replan now") {
            let text = match options.last() {
                Some(option) => format!(
                    "Action: {}\n<Reflection>Replanned toward a better option.</Reflection>\nFinal Decision: Keep",
                    option.marker
                ),
                None => "Action: Stop\n<Reflection>Nothing else to do.</Reflection>\nFinal Decision: Keep"
                    .to_string(),
            };
            respond(self.id(), text)
        } else {
            let text = match options.first() {
                Some(option) => format!(
                    "Action: {}\n<Reflection>This may be premature.</Reflection>\nFinal Decision: Revise",
                    option.marker
                ),
                None => "Action: Stop\n<Reflection>No options offered.</Reflection>\nFinal Decision: Keep"
                    .to_string(),
            };
            respond(self.id(), text)
        }
    }
}

/// A loop-prone navigator that obeys injected guidance: with none it
/// behaves like [`Looper`]; with an "Assistant guidance" line it follows
/// the suggested room or stops on request.
#[derive(Debug, Default)]
pub struct GuidableLooper;

impl ModelBackend for GuidableLooper {
    fn id(&self) -> &str {
        "scripted-guidable"
    }

    fn generate(&self, req: &ModelRequest) -> Result<ModelResponse, ModelError> {
        let options = parse_options(&req.task_text);
        if let Some(guidance) = GUIDANCE_LINE
            .captures(&req.task_text)
            .map(|c| c[1].to_string())
        {
            if guidance.contains("Stop here") {
                return respond(self.id(), "Action: Stop".to_string());
            }
            if let Some(room) = ROOM
                .captures(&guidance)
                .and_then(|c| c[1].parse::<usize>().ok())
            {
                let target = room_id(room);
                if let Some(option) = options.iter().find(|o| o.target == target) {
                    return respond(self.id(), format!("Action: {}", option.marker));
                }
            }
        }
        match min_room_option(&options) {
            Some(option) => respond(self.id(), format!("Action: {}", option.marker)),
            None => respond(self.id(), "Action: Stop".to_string()),
        }
    }
}

/// Shortest-path-aware oracle for closed-loop assist tests. Reads the
/// episode id and current viewpoint from the oracle request, computes the
/// next hop toward the nearest goal on the real graph, and answers with a
/// suggestion the guidable navigator can follow.
pub struct GuidanceOracle {
    worlds: BTreeMap<String, Arc<WorldGraph>>,
    episodes: BTreeMap<String, EpisodeSpec>,
}

impl GuidanceOracle {
    pub fn new(
        worlds: BTreeMap<String, Arc<WorldGraph>>,
        episodes: impl IntoIterator<Item = EpisodeSpec>,
    ) -> Self {
        GuidanceOracle {
            worlds,
            episodes: episodes
                .into_iter()
                .map(|e| (e.episode_id.clone(), e))
                .collect(),
        }
    }

    /// Builds the oracle from run configuration, loading the split and the
    /// referenced scans.
    pub fn from_config(cfg: &crate::runner::RunConfig) -> Result<Self, String> {
        let granularity: Granularity = cfg.task.parse()?;
        let split = load_split(granularity, &cfg.split, &cfg.data_root, &cfg.asset_root)
            .map_err(|e| e.to_string())?;
        let worlds = load_all_worlds(&cfg.asset_root)?;
        Ok(Self::new(worlds, split.episodes))
    }

    fn line_value<'t>(text: &'t str, prefix: &str) -> Option<&'t str> {
        text.lines().find_map(|l| l.strip_prefix(prefix))
    }
}

impl ModelBackend for GuidanceOracle {
    fn id(&self) -> &str {
        "scripted-guide-oracle"
    }

    fn generate(&self, req: &ModelRequest) -> Result<ModelResponse, ModelError> {
        let fallback = "Keep exploring carefully.".to_string();
        let Some(episode_id) = Self::line_value(&req.task_text, "Episode: ") else {
            return respond(self.id(), fallback);
        };
        let Some(current) = Self::line_value(&req.task_text, "Current viewpoint: ") else {
            return respond(self.id(), fallback);
        };
        let Some(episode) = self.episodes.get(episode_id) else {
            return respond(self.id(), fallback);
        };
        let Some(world) = self.worlds.get(&episode.scan_id) else {
            return respond(self.id(), fallback);
        };
        if episode.goals.iter().any(|g| g == current) {
            return respond(self.id(), "Stop here now.".to_string());
        }
        let mut best: Option<(Real, &ViewpointId)> = None;
        for goal in &episode.goals {
            let d = world
                .geodesic_distance(current, goal)
                .unwrap_or(Real::INFINITY);
            if !d.is_finite() {
                continue;
            }
            let better = match best {
                None => true,
                Some((bd, _)) => d < bd,
            };
            if better {
                best = Some((d, goal));
            }
        }
        let Some((_, goal)) = best else {
            return respond(self.id(), fallback);
        };
        let path = world
            .shortest_path(current, goal)
            .map_err(|e| ModelError::Misconfigured(e.to_string()))?;
        let next_room = room_number(&path[1]).unwrap_or(0);
        respond(
            self.id(),
            format!("Move to the option described as 'a synthetic room {next_room}'."),
        )
    }
}

/// Registers the scripted policies under their stock ids.
pub fn register_scripted_models(
    registry: &mut Registry,
) -> Result<(), crate::registry::RegistryError> {
    registry.register_model("scripted-optimal", |cfg| {
        OptimalFollower::from_asset_root(&cfg.asset_root).map(|m| Arc::new(m) as _)
    })?;
    registry.register_model("scripted-looper", |_| Ok(Arc::new(Looper)))?;
    registry.register_model("scripted-garbage", |_| Ok(Arc::new(GarbageEmitter)))?;
    registry.register_model("scripted-random", |cfg| {
        Ok(Arc::new(RandomWalker::new(cfg.seed)))
    })?;
    registry.register_model("scripted-revise-once", |_| Ok(Arc::new(ReviseOnce)))?;
    registry.register_model("scripted-guidable", |_| Ok(Arc::new(GuidableLooper)))?;
    registry.register_model("scripted-guide-oracle", |cfg| {
        GuidanceOracle::from_config(cfg).map(|m| Arc::new(m) as _)
    })?;
    Ok(())
}
