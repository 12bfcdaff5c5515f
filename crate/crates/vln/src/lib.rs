//! Simulator-free evaluation harness for vision-and-language navigation.
//!
//! The harness replays discrete connectivity-graph environments from
//! pre-cached assets, drives language-model backends through modular agent
//! designs, and scores executed trajectories with the standard navigation
//! metric suite (TL, NE, SR, OSR, SPL, nDTW, SDTW, CLS), including automated
//! failure analysis.
//!
//! The crate is organised around the lifecycle of an evaluation run:
//!
//! - [`world`] loads viewpoint graphs with cached view assets and provides
//!   geodesic geometry queries.
//! - [`observation`] turns a pose into the agent-centric composite panorama
//!   and the ordered, marker-indexed candidate set.
//! - [`tasks`] defines episodes across the three instruction granularities
//!   and performs stratified benchmark sampling.
//! - [`models`] is the uniform interface to chat backends and deterministic
//!   scripted stand-ins.
//! - [`agents`] builds prompts, maintains text-summary or text-map memory,
//!   and drives the decide/parse/retry loop.
//! - [`parser`] extracts validated actions from raw model text.
//! - [`metrics`] scores executed trajectories.
//! - [`registry`] and [`runner`] wire components together behind string ids
//!   and orchestrate episode execution with crash-safe logging.
//! - [`analysis`] performs post-hoc forensics and renders static replay
//!   reports.
//! - [`fixtures`] generates deterministic synthetic worlds, splits, and
//!   scripted policies for full-pipeline testing without real scenes.

#![forbid(unsafe_code)]

pub mod agents;
pub mod analysis;
pub mod fixtures;
pub mod geometry;
pub mod metrics;
pub mod models;
pub mod observation;
pub mod parser;
pub mod registry;
pub mod runner;
pub mod scalar;
pub mod tasks;
pub mod world;

/// Scalar type used by the concrete domain layer.
///
/// The numeric kernels in [`geometry`], [`metrics`], and [`tasks`] are
/// generic over [`scalar::Scalar`]; everything that touches serialized data
/// or the metric contracts is pinned to this alias.
pub type Real = f64;

/// Viewpoint identifier within a scan's connectivity graph.
pub type ViewpointId = String;

/// Success radius in meters: an episode succeeds when the agent stops within
/// this geodesic distance of a goal viewpoint.
pub const SUCCESS_RADIUS_M: Real = 3.0;

/// Environment variable naming the default asset root.
pub const ASSET_ROOT_ENV: &str = "VLN_ASSET_ROOT";
