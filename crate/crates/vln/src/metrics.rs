//! Trajectory metrics: TL, NE, SR, OSR, SPL, nDTW, SDTW, CLS.
//!
//! All distances are geodesic over the weighted connectivity graph — the
//! harness has no mesh, so graph geodesics stand in for the simulator's
//! geodesic distance. Success uses the 3 m radius. DTW runs unconstrained;
//! episode paths are short enough that the quadratic table is negligible.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;
use crate::tasks::EpisodeSpec;
use crate::world::{WorldError, WorldGraph};
use crate::{Real, ViewpointId, SUCCESS_RADIUS_M};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("executed path is not contiguous: {0}")]
    NonContiguousPath(String),
    #[error(transparent)]
    World(#[from] WorldError),
}

/// Dynamic-time-warping cost between two sequences of lengths `n` and `m`,
/// with `cost(i, j)` giving the pairwise cost. Standard recurrence: match
/// cost plus the minimum of the insert/delete/match predecessors.
pub fn dtw_cost<S: Scalar>(n: usize, m: usize, cost: impl Fn(usize, usize) -> S) -> S {
    if n == 0 || m == 0 {
        return if n == m { S::zero() } else { S::infinity() };
    }
    let mut prev = vec![S::infinity(); m + 1];
    let mut row = vec![S::infinity(); m + 1];
    prev[0] = S::zero();
    for i in 1..=n {
        row[0] = S::infinity();
        for j in 1..=m {
            let step = cost(i - 1, j - 1);
            let best = prev[j - 1].min(prev[j]).min(row[j - 1]);
            row[j] = step + best;
        }
        std::mem::swap(&mut prev, &mut row);
    }
    prev[m]
}

/// Per-episode metric values. Rates are 0/1 per episode and averaged to
/// percentages at aggregation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Trajectory length in meters.
    pub tl: Real,
    /// Geodesic distance from the final position to the nearest goal.
    #[serde(with = "maybe_unreachable")]
    pub ne: Real,
    pub sr: bool,
    pub osr: bool,
    pub spl: Real,
    pub ndtw: Real,
    pub sdtw: Real,
    pub cls: Real,
}

impl MetricsReport {
    pub fn sr_value(&self) -> Real {
        if self.sr {
            1.0
        } else {
            0.0
        }
    }

    pub fn osr_value(&self) -> Real {
        if self.osr {
            1.0
        } else {
            0.0
        }
    }
}

/// Scores one executed trajectory against its episode.
///
/// `executed` must start at the episode start viewpoint and every
/// consecutive pair must be a graph edge (stops and revisits are fine).
pub fn score_episode(
    graph: &WorldGraph,
    episode: &EpisodeSpec,
    executed: &[ViewpointId],
) -> Result<MetricsReport, MetricsError> {
    if executed.is_empty() {
        return Err(MetricsError::NonContiguousPath("empty path".to_string()));
    }
    if executed[0] != episode.start.viewpoint {
        return Err(MetricsError::NonContiguousPath(format!(
            "path starts at {} but episode starts at {}",
            executed[0], episode.start.viewpoint
        )));
    }
    let mut tl = 0.0;
    for pair in executed.windows(2) {
        match graph.edge_weight(&pair[0], &pair[1]) {
            Some(w) => tl += w,
            None => {
                return Err(MetricsError::NonContiguousPath(format!(
                    "{} -> {} is not an edge",
                    pair[0], pair[1]
                )))
            }
        }
    }

    let d_th = SUCCESS_RADIUS_M;
    let gt = &episode.gt_path;

    // NE and the shortest-goal length sum edge weights in forward order
    // (from the agent's side), so a perfect replay reproduces TL bit for
    // bit; goal-side tables cover OSR.
    let mut goal_indices = Vec::with_capacity(episode.goals.len());
    for goal in &episode.goals {
        goal_indices.push(graph.node_index(goal)?);
    }
    let from_last = graph.distances_from(executed.last().expect("non-empty"))?;
    let ne = goal_indices
        .iter()
        .map(|&g| from_last[g])
        .fold(Real::INFINITY, Real::min);
    let from_start = graph.distances_from(&executed[0])?;
    let shortest_goal = goal_indices
        .iter()
        .map(|&g| from_start[g])
        .fold(Real::INFINITY, Real::min);
    let mut osr = false;
    for goal in &episode.goals {
        let dist = graph.distances_from(goal)?;
        for v in executed {
            if dist[graph.node_index(v)?] <= d_th {
                osr = true;
                break;
            }
        }
        if osr {
            break;
        }
    }
    let sr = ne <= d_th;

    let spl = if shortest_goal == 0.0 {
        if sr {
            1.0
        } else {
            0.0
        }
    } else if sr {
        shortest_goal / tl.max(shortest_goal)
    } else {
        0.0
    };

    // One Dijkstra per ground-truth node covers both the DTW cost matrix and
    // the CLS coverage term.
    let mut gt_dist = Vec::with_capacity(gt.len());
    for r in gt {
        gt_dist.push(graph.distances_from(r)?);
    }
    let mut executed_index = Vec::with_capacity(executed.len());
    for v in executed {
        executed_index.push(graph.node_index(v)?);
    }

    let dtw = dtw_cost(executed.len(), gt.len(), |i, j| {
        gt_dist[j][executed_index[i]]
    });
    let ndtw = (-dtw / (gt.len() as Real * d_th)).exp();
    let sdtw = if sr { ndtw } else { 0.0 };

    let coverage: Real = gt_dist
        .iter()
        .map(|dist| {
            let nearest = executed_index
                .iter()
                .map(|&i| dist[i])
                .fold(Real::INFINITY, Real::min);
            (-nearest / d_th).exp()
        })
        .sum::<Real>()
        / gt.len() as Real;
    let gt_length = graph.path_length(gt).unwrap_or(0.0);
    let expected_length = coverage * gt_length;
    let length_score = if expected_length == 0.0 && tl == 0.0 {
        1.0
    } else {
        expected_length / (expected_length + (expected_length - tl).abs())
    };
    let cls = coverage * length_score;

    Ok(MetricsReport {
        tl,
        ne,
        sr,
        osr,
        spl,
        ndtw,
        sdtw,
        cls,
    })
}

/// Run-level aggregation: means for TL/NE, percentages for the rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub episodes: usize,
    pub tl_mean: Real,
    #[serde(with = "maybe_unreachable")]
    pub ne_mean: Real,
    pub sr_pct: Real,
    pub osr_pct: Real,
    pub spl_pct: Real,
    pub ndtw_pct: Real,
    pub sdtw_pct: Real,
    pub cls_pct: Real,
}

impl RunSummary {
    /// One-line table in the usual benchmark formatting (two decimals).
    pub fn render_table(&self) -> String {
        format!(
            "episodes {}\nTL {:.2}  NE {:.2}  SR {:.2}  OSR {:.2}  SPL {:.2}  nDTW {:.2}  SDTW {:.2}  CLS {:.2}",
            self.episodes,
            self.tl_mean,
            self.ne_mean,
            self.sr_pct,
            self.osr_pct,
            self.spl_pct,
            self.ndtw_pct,
            self.sdtw_pct,
            self.cls_pct,
        )
    }
}

/// Aggregates per-episode reports into the run summary.
pub fn aggregate(reports: &[MetricsReport]) -> RunSummary {
    let n = reports.len();
    if n == 0 {
        return RunSummary {
            episodes: 0,
            tl_mean: 0.0,
            ne_mean: 0.0,
            sr_pct: 0.0,
            osr_pct: 0.0,
            spl_pct: 0.0,
            ndtw_pct: 0.0,
            sdtw_pct: 0.0,
            cls_pct: 0.0,
        };
    }
    let count = n as Real;
    let mean = |f: &dyn Fn(&MetricsReport) -> Real| reports.iter().map(f).sum::<Real>() / count;
    RunSummary {
        episodes: n,
        tl_mean: mean(&|r| r.tl),
        ne_mean: mean(&|r| r.ne),
        sr_pct: 100.0 * mean(&|r| r.sr_value()),
        osr_pct: 100.0 * mean(&|r| r.osr_value()),
        spl_pct: 100.0 * mean(&|r| r.spl),
        ndtw_pct: 100.0 * mean(&|r| r.ndtw),
        sdtw_pct: 100.0 * mean(&|r| r.sdtw),
        cls_pct: 100.0 * mean(&|r| r.cls),
    }
}

/// Serde shim for distances that may be `+∞` (unreachable goals): JSON has
/// no infinity literal, so non-finite values round-trip as the string
/// `"unreachable"`.
pub mod maybe_unreachable {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::Real;

    pub fn serialize<S: Serializer>(value: &Real, ser: S) -> Result<S::Ok, S::Error> {
        if value.is_finite() {
            ser.serialize_f64(*value)
        } else {
            ser.serialize_str("unreachable")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Real, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Number(Real),
            Text(serde::de::IgnoredAny),
            Null,
        }
        Ok(match Repr::deserialize(de)? {
            Repr::Number(v) => v,
            Repr::Text(_) | Repr::Null => Real::INFINITY,
        })
    }
}
