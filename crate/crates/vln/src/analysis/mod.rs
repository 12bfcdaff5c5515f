//! Post-hoc trajectory forensics: loop detection, deviation localization,
//! failure taxonomy, latency measurement, and static replay reports.
//!
//! Everything here is read-only over logs; re-running analysis never
//! mutates them.

mod replay;

pub use replay::replay_episode;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::observation::{compose_observation, ObservationError, ObservationFormat};
use crate::runner::{Termination, TrajectoryRecord};
use crate::tasks::EpisodeSpec;
use crate::world::{Pose, WorldGraph};
use crate::{Real, ViewpointId, SUCCESS_RADIUS_M};

/// A viewpoint visited this many times flags a loop.
pub const LOOP_VISIT_THRESHOLD: usize = 3;
/// An identical (viewpoint, move) pair repeated this many times flags a
/// loop. Two visits alone can be a legitimate backtrack; repeating the same
/// decision cannot.
pub const LOOP_PAIR_THRESHOLD: usize = 2;

/// A maximal stretch of the executed walk exhibiting looping.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoopSegment {
    /// First index into the executed viewpoint list.
    pub start: usize,
    /// Last index (inclusive).
    pub end: usize,
    pub viewpoints: BTreeSet<ViewpointId>,
}

/// Flags maximal segments where a viewpoint's visit count reaches
/// [`LOOP_VISIT_THRESHOLD`] or an identical (viewpoint, move) pair repeats.
/// Simple paths yield an empty list.
pub fn detect_loops(executed: &[ViewpointId]) -> Vec<LoopSegment> {
    let mut ranges: Vec<(usize, usize)> = Vec::new();

    let mut visits: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, v) in executed.iter().enumerate() {
        visits.entry(v.as_str()).or_default().push(i);
    }
    for positions in visits.values() {
        if positions.len() >= LOOP_VISIT_THRESHOLD {
            ranges.push((positions[0], *positions.last().expect("non-empty")));
        }
    }

    let mut pairs: BTreeMap<(&str, &str), Vec<usize>> = BTreeMap::new();
    for (i, pair) in executed.windows(2).enumerate() {
        pairs
            .entry((pair[0].as_str(), pair[1].as_str()))
            .or_default()
            .push(i);
    }
    for positions in pairs.values() {
        if positions.len() >= LOOP_PAIR_THRESHOLD {
            ranges.push((positions[0], positions.last().expect("non-empty") + 1));
        }
    }

    if ranges.is_empty() {
        return Vec::new();
    }
    ranges.sort_unstable();
    let mut merged: Vec<(usize, usize)> = vec![ranges[0]];
    for (start, end) in ranges.into_iter().skip(1) {
        let last = merged.last_mut().expect("non-empty");
        if start <= last.1 {
            last.1 = last.1.max(end);
        } else {
            merged.push((start, end));
        }
    }
    merged
        .into_iter()
        .map(|(start, end)| LoopSegment {
            start,
            end,
            viewpoints: executed[start..=end].iter().cloned().collect(),
        })
        .collect()
}

/// Failure-taxonomy outcome of one episode. Exhaustive and exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Success,
    IncorrectNavigation,
    GenerationError,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingStats {
    pub total_wall_ms: Real,
    pub mean_step_ms: Real,
}

/// Post-hoc diagnosis of one trajectory record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeDiagnosis {
    pub episode_id: String,
    pub outcome: Outcome,
    pub looping: bool,
    pub loop_segments: Vec<LoopSegment>,
    /// First executed index whose viewpoint differs from the ground-truth
    /// path at that index; absent iff the walk is a prefix of (or equals)
    /// the ground truth.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deviation_step: Option<usize>,
    /// Success achieved despite revisits within the success radius of a
    /// goal.
    pub near_goal_loop: bool,
    /// Success with the executed walk exactly equal to the ground truth.
    pub perfect: bool,
    pub timing: TimingStats,
    /// Free-text failure cause for manual annotation; fine-grained causes
    /// (region recognition, vertical movement, object detection) require
    /// human judgment and are never auto-filled.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cause: Option<String>,
}

fn deviation_step(executed: &[ViewpointId], gt: &[ViewpointId]) -> Option<usize> {
    for (i, v) in executed.iter().enumerate() {
        if i >= gt.len() || v != &gt[i] {
            return Some(i);
        }
    }
    None
}

/// Diagnoses one record against its episode and world. Pure.
pub fn diagnose(
    record: &TrajectoryRecord,
    episode: &EpisodeSpec,
    graph: &WorldGraph,
) -> EpisodeDiagnosis {
    let outcome = match record.termination {
        Termination::GenerationError => Outcome::GenerationError,
        _ if record.metrics.sr => Outcome::Success,
        _ => Outcome::IncorrectNavigation,
    };
    let loop_segments = detect_loops(&record.executed);
    let looping = !loop_segments.is_empty();

    let near_goal_loop = outcome == Outcome::Success
        && loop_segments.iter().any(|segment| {
            segment.viewpoints.iter().all(|v| {
                episode.goals.iter().any(|goal| {
                    graph
                        .geodesic_distance(v, goal)
                        .map(|d| d <= SUCCESS_RADIUS_M)
                        .unwrap_or(false)
                })
            })
        });

    let total_wall_ms: Real = record.steps.iter().map(|s| s.timing.wall_ms).sum();
    let mean_step_ms = if record.steps.is_empty() {
        0.0
    } else {
        total_wall_ms / record.steps.len() as Real
    };

    EpisodeDiagnosis {
        episode_id: record.episode_id.clone(),
        outcome,
        looping,
        deviation_step: deviation_step(&record.executed, &episode.gt_path),
        near_goal_loop,
        perfect: outcome == Outcome::Success && record.executed == episode.gt_path,
        loop_segments,
        timing: TimingStats {
            total_wall_ms,
            mean_step_ms,
        },
        cause: None,
    }
}

/// Aggregate breakdown over a run's diagnoses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaxonomyReport {
    pub total: usize,
    pub successes: usize,
    pub perfect_successes: usize,
    pub near_goal_loop_successes: usize,
    pub looping_successes: usize,
    pub failures: usize,
    pub incorrect_navigation: usize,
    pub looping_failures: usize,
    pub generation_errors: usize,
    /// Share of looping among incorrect-navigation failures, percent.
    pub looping_share_of_failures_pct: Real,
}

pub fn taxonomy_report(diagnoses: &[EpisodeDiagnosis]) -> TaxonomyReport {
    let mut report = TaxonomyReport {
        total: diagnoses.len(),
        successes: 0,
        perfect_successes: 0,
        near_goal_loop_successes: 0,
        looping_successes: 0,
        failures: 0,
        incorrect_navigation: 0,
        looping_failures: 0,
        generation_errors: 0,
        looping_share_of_failures_pct: 0.0,
    };
    for d in diagnoses {
        match d.outcome {
            Outcome::Success => {
                report.successes += 1;
                if d.perfect {
                    report.perfect_successes += 1;
                }
                if d.near_goal_loop {
                    report.near_goal_loop_successes += 1;
                }
                if d.looping {
                    report.looping_successes += 1;
                }
            }
            Outcome::IncorrectNavigation => {
                report.failures += 1;
                report.incorrect_navigation += 1;
                if d.looping {
                    report.looping_failures += 1;
                }
            }
            Outcome::GenerationError => {
                report.failures += 1;
                report.generation_errors += 1;
            }
        }
    }
    if report.incorrect_navigation > 0 {
        report.looping_share_of_failures_pct =
            100.0 * report.looping_failures as Real / report.incorrect_navigation as Real;
    }
    report
}

impl TaxonomyReport {
    /// Plain-text table for terminals and logs.
    pub fn render_text(&self) -> String {
        format!(
            "episodes                {:>6}\n\
             successes               {:>6}\n\
               perfect               {:>6}\n\
               with near-goal loop   {:>6}\n\
               with any loop         {:>6}\n\
             failures                {:>6}\n\
               incorrect navigation  {:>6}\n\
                 of which looping    {:>6} ({:.1}%)\n\
               generation errors     {:>6}",
            self.total,
            self.successes,
            self.perfect_successes,
            self.near_goal_loop_successes,
            self.looping_successes,
            self.failures,
            self.incorrect_navigation,
            self.looping_failures,
            self.looping_share_of_failures_pct,
            self.generation_errors,
        )
    }
}

/// Latency statistics over observation composition plus asset resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub samples: usize,
    pub median_ms: Real,
    pub p95_ms: Real,
    pub mean_ms: Real,
    pub max_ms: Real,
}

/// Measures observation-access latency: compose the observation at a random
/// pose and stat every referenced image under the scan directory.
pub fn measure_access_latency(
    graph: &WorldGraph,
    asset_root: Option<&Path>,
    samples: usize,
    seed: u64,
) -> Result<LatencyStats, ObservationError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let navigable: Vec<&ViewpointId> = graph
        .nodes()
        .iter()
        .filter(|(_, n)| n.navigable)
        .map(|(id, _)| id)
        .collect();
    let scan_dir = asset_root.map(|root| root.join(graph.scan_id()));
    let mut timings_ms = Vec::with_capacity(samples);
    for _ in 0..samples {
        let viewpoint = navigable[rng.random_range(0..navigable.len())].clone();
        let heading = rng.random_range(0.0..360.0);
        let pose = Pose::new(viewpoint, heading, 0.0);
        let started = Instant::now();
        let obs = compose_observation(
            graph,
            &pose,
            ObservationFormat::FourView,
            scan_dir.is_none(),
        )?;
        if let Some(dir) = &scan_dir {
            for view in &obs.views {
                if let Some(reference) = &view.image {
                    // Touch the file metadata: the cost of locating the
                    // cached render on disk.
                    let _ = std::fs::metadata(dir.join(reference));
                }
            }
        }
        timings_ms.push(started.elapsed().as_secs_f64() * 1e3);
    }
    timings_ms.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let pick = |q: f64| -> Real {
        if timings_ms.is_empty() {
            return 0.0;
        }
        let idx = ((timings_ms.len() as f64 - 1.0) * q).round() as usize;
        timings_ms[idx]
    };
    Ok(LatencyStats {
        samples: timings_ms.len(),
        median_ms: pick(0.5),
        p95_ms: pick(0.95),
        mean_ms: timings_ms.iter().sum::<Real>() / timings_ms.len().max(1) as Real,
        max_ms: timings_ms.last().copied().unwrap_or(0.0),
    })
}
