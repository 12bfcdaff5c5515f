//! Episode lifecycle orchestration: configuration, preflight, the closed
//! observation-decision loop, crash-safe logging, and run summaries.
//!
//! One trajectory record is appended per episode to a line-delimited log,
//! flushed at episode end. Re-running with the same run id skips episodes
//! already logged, so an interrupted run resumes where it stopped. Episodes
//! are the unit of parallelism; an episode is strictly sequential
//! internally. Wall-clock fields are segregated into `timing` sub-records
//! so determinism checks can strip them mechanically.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{
    decide, oracle_assist, pose_after_move, AgentConfig, AgentDecision, AgentError, AgentMemory,
    Attempt, DecisionOutcome, ExemplarSet, OracleTrigger, PromptExtras, TemplateSet, TriggerReason,
};
use crate::metrics::{aggregate, score_episode, MetricsError, MetricsReport, RunSummary};
use crate::models::{GenerationParams, ModelBackend, ModelSettings};
use crate::observation::{compose_observation, ObservationError, ObservationFormat};
use crate::parser::ExecutableAction;
use crate::registry::{ComponentKind, Registry, RegistryError};
use crate::tasks::{EpisodeSpec, TaskError};
use crate::world::{load_world, Pose, WorldError, WorldGraph};
use crate::{Real, ViewpointId};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("config invalid: {0}")]
    ConfigInvalid(String),
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error(transparent)]
    Observation(#[from] ObservationError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn default_max_steps() -> usize {
    20
}
fn default_retries() -> usize {
    3
}
fn default_concurrency() -> usize {
    4
}
fn default_format() -> ObservationFormat {
    ObservationFormat::FourView
}

/// Full configuration of one evaluation run, mirrored by the config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub run_id: String,
    /// Task id in the registry (`fine`, `coarse`, `zero`, or custom).
    pub task: String,
    /// Split name under `<data_root>/<task>/`.
    pub split: String,
    /// Agent id in the registry.
    pub agent: String,
    /// Model id in the registry.
    pub model: String,
    #[serde(default = "default_format")]
    pub observation_format: ObservationFormat,
    /// Drop image references from prompts; tolerate missing assets.
    #[serde(default)]
    pub text_only: bool,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    /// Decision retries per step after the first attempt.
    #[serde(default = "default_retries")]
    pub retries: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_concurrency")]
    pub concurrency: usize,
    pub output_dir: PathBuf,
    /// Falls back to `VLN_ASSET_ROOT` when omitted.
    #[serde(default)]
    pub asset_root: PathBuf,
    pub data_root: PathBuf,
    #[serde(default)]
    pub model_settings: ModelSettings,
    #[serde(default)]
    pub generation: GenerationParams,
    /// Diagnostic modes merged into the agent configuration.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<crate::agents::Diagnostics>,
    /// Directory overriding the built-in prompt templates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub template_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = fs::read_to_string(path).map_err(|e| RunError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        serde_json::from_str(&text)
            .map_err(|e| RunError::ConfigInvalid(format!("{}: {e}", path.display())))
    }

    /// Directory holding this run's log, summary, and reports.
    pub fn run_dir(&self) -> PathBuf {
        self.output_dir.join("runs").join(&self.run_id)
    }
}

/// How an episode ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    /// The agent chose the stop action.
    Stopped,
    /// The step cap was reached.
    StepLimit,
    /// The retry budget was exhausted without a parseable, valid action.
    GenerationError,
}

/// Compact observation digest stored per step (the rendered prompt already
/// carries the textual form).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationDigest {
    pub viewpoint: ViewpointId,
    pub front_cardinal: u16,
    pub candidates: Vec<CandidateDigest>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateDigest {
    pub marker: u32,
    pub target: ViewpointId,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepTiming {
    pub wall_ms: Real,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecordTiming {
    pub total_wall_ms: Real,
}

/// One step of the interaction log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// 1-based step number.
    pub step: usize,
    pub pose_before: Pose,
    pub observation: ObservationDigest,
    /// System text of this step's prompt (identical across attempts).
    pub system_text: String,
    /// Every model call of the step, verbatim, including retries and
    /// replanning.
    pub attempts: Vec<Attempt>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decision: Option<AgentDecision>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub executed_action: Option<ExecutableAction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub guidance: Option<String>,
    pub pose_after: Pose,
    pub timing: StepTiming,
}

/// Full per-episode interaction log entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub episode_id: String,
    pub scan_id: String,
    pub steps: Vec<StepRecord>,
    /// Viewpoint sequence actually walked, starting at the episode start.
    pub executed: Vec<ViewpointId>,
    pub termination: Termination,
    pub metrics: MetricsReport,
    pub timing: RecordTiming,
}

/// Result of a completed run.
#[derive(Debug)]
pub struct RunOutcome {
    pub summary: RunSummary,
    pub records: Vec<TrajectoryRecord>,
    pub log_path: PathBuf,
    pub summary_path: PathBuf,
    /// Episodes skipped because the log already contained them.
    pub resumed: usize,
}

/// Validated, constructed components of a run.
struct Prepared {
    episodes: Vec<EpisodeSpec>,
    worlds: BTreeMap<String, Arc<WorldGraph>>,
    agent: AgentConfig,
    model: Arc<dyn ModelBackend>,
    oracle: Option<Arc<dyn ModelBackend>>,
    templates: Arc<TemplateSet>,
    exemplar_blocks: String,
}

/// Config sanity plus id resolution. No component is constructed here.
fn preflight(registry: &Registry, cfg: &mut RunConfig) -> Result<(), RunError> {
    if cfg.run_id.is_empty() {
        return Err(RunError::ConfigInvalid("run_id is empty".to_string()));
    }
    if cfg.asset_root.as_os_str().is_empty() {
        match crate::world::default_asset_root() {
            Some(root) => cfg.asset_root = root,
            None => {
                return Err(RunError::ConfigInvalid(format!(
                    "asset_root is empty and {} is not set",
                    crate::ASSET_ROOT_ENV
                )))
            }
        }
    }
    if cfg.max_steps == 0 {
        return Err(RunError::ConfigInvalid(
            "max_steps must be >= 1".to_string(),
        ));
    }
    if matches!(
        cfg.observation_format,
        ObservationFormat::Dense24 | ObservationFormat::Dense36
    ) {
        return Err(RunError::ConfigInvalid(
            "dense observation formats are unsupported by the asset scheme".to_string(),
        ));
    }
    for (kind, id) in [
        (ComponentKind::Task, &cfg.task),
        (ComponentKind::Agent, &cfg.agent),
        (ComponentKind::Model, &cfg.model),
    ] {
        if !registry.has(kind, id) {
            return Err(RunError::ConfigInvalid(format!("unknown {kind} id {id:?}")));
        }
    }
    if let Some(diag) = &cfg.diagnostics {
        if let Some(oracle) = &diag.oracle_assist {
            if !registry.has(ComponentKind::Model, &oracle.model) {
                return Err(RunError::ConfigInvalid(format!(
                    "unknown oracle model id {:?}",
                    oracle.model
                )));
            }
        }
        if let Some(icl) = &diag.failure_icl {
            if icl.n == 0 {
                return Err(RunError::ConfigInvalid(
                    "failure_icl.n must be >= 1".to_string(),
                ));
            }
        }
    }
    Ok(())
}

fn prepare(registry: &Registry, cfg: &mut RunConfig) -> Result<Prepared, RunError> {
    preflight(registry, cfg)?;

    let split = registry.build_task(&cfg.task, cfg)?;
    for rejected in &split.rejected {
        log::warn!(
            "episode {} rejected: {}",
            rejected.episode_id,
            rejected.reason
        );
    }
    let mut episodes = split.episodes;
    episodes.sort_by(|a, b| a.episode_id.cmp(&b.episode_id));

    let mut worlds = BTreeMap::new();
    for episode in &episodes {
        if !worlds.contains_key(&episode.scan_id) {
            let world = load_world(&cfg.asset_root, &episode.scan_id)?;
            worlds.insert(episode.scan_id.clone(), Arc::new(world));
        }
    }

    let agent = registry.build_agent(&cfg.agent, cfg)?;
    let model = registry.build_model(&cfg.model, cfg)?;
    let oracle = match &agent.diagnostics.oracle_assist {
        Some(oracle_cfg) => Some(registry.build_model(&oracle_cfg.model, cfg)?),
        None => None,
    };
    let templates = Arc::new(match &cfg.template_dir {
        Some(dir) => TemplateSet::load_dir(dir)?,
        None => TemplateSet::builtin(),
    });
    let exemplar_blocks = match &agent.diagnostics.failure_icl {
        Some(icl) => {
            let set = if icl.exemplar_set == "default" {
                ExemplarSet::builtin_default()
            } else {
                ExemplarSet::load(Path::new(&icl.exemplar_set))?
            };
            set.blocks(icl.n)?
        }
        None => String::new(),
    };

    Ok(Prepared {
        episodes,
        worlds,
        agent,
        model,
        oracle,
        templates,
        exemplar_blocks,
    })
}

/// Minimum over goals of the geodesic distance from `from`.
fn goal_distance(
    world: &WorldGraph,
    episode: &EpisodeSpec,
    from: &str,
) -> Result<Real, WorldError> {
    let mut best = Real::INFINITY;
    for goal in &episode.goals {
        best = best.min(world.geodesic_distance(from, goal)?);
    }
    Ok(best)
}

/// Executes one episode's closed loop. Strictly sequential.
#[allow(clippy::too_many_arguments)]
pub fn run_episode(
    world: &WorldGraph,
    episode: &EpisodeSpec,
    agent: &AgentConfig,
    templates: &TemplateSet,
    exemplar_blocks: &str,
    model: &dyn ModelBackend,
    oracle: Option<&dyn ModelBackend>,
    cfg: &RunConfig,
) -> Result<TrajectoryRecord, RunError> {
    let episode_started = Instant::now();
    let mut pose = episode.start.clone();
    let mut executed: Vec<ViewpointId> = vec![pose.viewpoint.clone()];
    let mut memory = AgentMemory::new(agent.memory, world, &pose)?;
    let mut trigger = agent
        .diagnostics
        .oracle_assist
        .as_ref()
        .map(|o| OracleTrigger::new(o.regress_steps));
    let mut pending_trigger: Option<TriggerReason> = None;
    let mut steps = Vec::new();
    let mut termination = Termination::StepLimit;

    for step_number in 1..=cfg.max_steps {
        let step_started = Instant::now();
        let obs = compose_observation(world, &pose, cfg.observation_format, cfg.text_only)?;

        // Guidance requested by a trigger on the previous move is injected
        // into this step's prompt; at most one query per trigger event.
        let guidance = match (pending_trigger.take(), oracle) {
            (Some(reason), Some(oracle_model)) => {
                oracle_assist(episode, &obs, &executed, reason, oracle_model)
            }
            _ => None,
        };

        let extras = PromptExtras {
            guidance: guidance.clone(),
            exemplar_blocks: exemplar_blocks.to_string(),
            params: cfg.generation.clone(),
        };
        let step_decision = decide(
            agent,
            templates,
            episode,
            &obs,
            &memory,
            &extras,
            model,
            cfg.retries,
        );

        let digest = ObservationDigest {
            viewpoint: pose.viewpoint.clone(),
            front_cardinal: obs.front_cardinal,
            candidates: obs
                .candidates
                .iter()
                .map(|c| CandidateDigest {
                    marker: c.marker,
                    target: c.target.clone(),
                })
                .collect(),
        };
        let system_text = step_decision
            .attempts
            .first()
            .map(|a| a.request.system_text.clone())
            .unwrap_or_default();

        let mut record_step = StepRecord {
            step: step_number,
            pose_before: pose.clone(),
            observation: digest,
            system_text,
            attempts: step_decision.attempts,
            decision: None,
            executed_action: None,
            guidance,
            pose_after: pose.clone(),
            timing: StepTiming { wall_ms: 0.0 },
        };

        match step_decision.outcome {
            DecisionOutcome::GenerationError => {
                record_step.timing.wall_ms = step_started.elapsed().as_secs_f64() * 1e3;
                steps.push(record_step);
                termination = Termination::GenerationError;
                break;
            }
            DecisionOutcome::Decided { decision, action } => {
                record_step.decision = Some(decision);
                record_step.executed_action = Some(action.clone());
                match action {
                    ExecutableAction::Stop => {
                        record_step.timing.wall_ms = step_started.elapsed().as_secs_f64() * 1e3;
                        steps.push(record_step);
                        termination = Termination::Stopped;
                        break;
                    }
                    ExecutableAction::MoveTo { marker, .. } => {
                        let taken = obs
                            .candidate(marker)
                            .expect("validated marker exists")
                            .clone();
                        memory.record_move(world, &pose, &taken)?;
                        pose = pose_after_move(&pose, &taken);
                        executed.push(pose.viewpoint.clone());
                        record_step.pose_after = pose.clone();
                        record_step.timing.wall_ms = step_started.elapsed().as_secs_f64() * 1e3;
                        steps.push(record_step);

                        if let Some(trigger) = trigger.as_mut() {
                            let dist = goal_distance(world, episode, &pose.viewpoint)?;
                            if let Some(reason) = trigger.observe(&executed, dist) {
                                pending_trigger = Some(reason);
                            }
                        }
                    }
                }
            }
        }
    }

    let metrics = score_episode(world, episode, &executed)?;
    Ok(TrajectoryRecord {
        episode_id: episode.episode_id.clone(),
        scan_id: episode.scan_id.clone(),
        steps,
        executed,
        termination,
        metrics,
        timing: RecordTiming {
            total_wall_ms: episode_started.elapsed().as_secs_f64() * 1e3,
        },
    })
}

/// Reads an existing log for resumption. Unparseable lines (for instance a
/// partial trailing line after a crash) are skipped.
pub fn read_log(path: &Path) -> Vec<TrajectoryRecord> {
    let Ok(text) = fs::read_to_string(path) else {
        return Vec::new();
    };
    text.lines()
        .filter_map(|line| serde_json::from_str::<TrajectoryRecord>(line).ok())
        .collect()
}

/// Runs every episode of the configured split, appending one record per
/// episode to `runs/<run_id>/trajectories.jsonl` and writing `summary.json`
/// once at the end.
pub fn run(registry: &Registry, cfg: &RunConfig) -> Result<RunOutcome, RunError> {
    let mut cfg = cfg.clone();
    let prepared = prepare(registry, &mut cfg)?;
    let cfg = &cfg;

    let run_dir = cfg.run_dir();
    fs::create_dir_all(&run_dir).map_err(|e| RunError::Io {
        path: run_dir.clone(),
        source: e,
    })?;
    let log_path = run_dir.join("trajectories.jsonl");
    let summary_path = run_dir.join("summary.json");

    let existing = read_log(&log_path);
    let done: BTreeSet<&str> = existing.iter().map(|r| r.episode_id.as_str()).collect();
    let todo: Vec<&EpisodeSpec> = prepared
        .episodes
        .iter()
        .filter(|e| !done.contains(e.episode_id.as_str()))
        .collect();
    let resumed = prepared.episodes.len() - todo.len();

    let file = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&log_path)
        .map_err(|e| RunError::Io {
            path: log_path.clone(),
            source: e,
        })?;
    let writer = Mutex::new(BufWriter::new(file));

    let queue = Mutex::new(todo.into_iter().collect::<VecDeque<_>>());
    let failures: Mutex<Vec<RunError>> = Mutex::new(Vec::new());
    let new_records: Mutex<Vec<TrajectoryRecord>> = Mutex::new(Vec::new());
    let workers = cfg.concurrency.max(1);

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let episode = {
                    let mut q = queue.lock().expect("queue poisoned");
                    match q.pop_front() {
                        Some(e) => e,
                        None => break,
                    }
                };
                let world = &prepared.worlds[&episode.scan_id];
                let result = run_episode(
                    world,
                    episode,
                    &prepared.agent,
                    &prepared.templates,
                    &prepared.exemplar_blocks,
                    prepared.model.as_ref(),
                    prepared.oracle.as_deref(),
                    cfg,
                );
                match result {
                    Ok(record) => {
                        let line =
                            serde_json::to_string(&record).expect("trajectory record serializes");
                        {
                            let mut w = writer.lock().expect("writer poisoned");
                            writeln!(w, "{line}").expect("log write");
                            w.flush().expect("log flush");
                        }
                        new_records.lock().expect("records poisoned").push(record);
                    }
                    Err(e) => {
                        failures.lock().expect("failures poisoned").push(e);
                        break;
                    }
                }
            });
        }
    });

    if let Some(first) = failures
        .into_inner()
        .expect("failures poisoned")
        .into_iter()
        .next()
    {
        return Err(first);
    }

    let mut records = existing;
    records.extend(new_records.into_inner().expect("records poisoned"));
    records.sort_by(|a, b| a.episode_id.cmp(&b.episode_id));

    let reports: Vec<MetricsReport> = records.iter().map(|r| r.metrics.clone()).collect();
    let summary = aggregate(&reports);
    let summary_text = serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n";
    fs::write(&summary_path, summary_text).map_err(|e| RunError::Io {
        path: summary_path.clone(),
        source: e,
    })?;
    let config_path = run_dir.join("config.json");
    let config_text = serde_json::to_string_pretty(cfg).expect("config serializes") + "\n";
    fs::write(&config_path, config_text).map_err(|e| RunError::Io {
        path: config_path,
        source: e,
    })?;

    Ok(RunOutcome {
        summary,
        records,
        log_path,
        summary_path,
        resumed,
    })
}
