//! Closed-loop scenario runs: planning episodes, reference tracking, IDM
//! traffic and the measures of effectiveness computed from the result.

mod config;
mod log;
mod moe;
mod run;
mod world;

pub use config::{
    CaccConfig, Controller, FrontHvConfig, MoeConfig, PlannerConfig, PlatoonConfig, RoadConfig, SafetyConfig, ScenarioConfig,
    StreamConfig, VehicleConfig,
};
pub use log::{
    read_rows, write_rows, CavWaypoints, CollisionRecord, ControlRow, EpisodeRecord, Frame, GridSummary, Role,
    SimLog, TrackingRow, TrajectoryRow, Trigger, VehicleMeta,
};
pub use moe::{compute_moes, default_segment, Comparison, FollowingStats, GapStats, MoeReport, PlatoonMoe, UpstreamHv};
pub use run::{initial_problem, run_mode, run_scenario, PlanningProblem};
pub use world::{cacc_accel, guard_accel, collisions, nearest_lane, path_leader, step_agent, Agent, Command, Footprint};

use std::path::Path;

use thiserror::Error;

use crate::grid::GridError;
use crate::planner::PlannerError;
use crate::tracker::TrackerError;
use crate::traffic::TrafficError;
use crate::trajgen::TrajError;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("planning at t={t:.2} s failed: {source}")]
    Planner {
        t: f64,
        #[source]
        source: PlannerError,
    },
    #[error(transparent)]
    Traffic(#[from] TrafficError),
    #[error(transparent)]
    Traj(#[from] TrajError),
    #[error(transparent)]
    Tracker(#[from] TrackerError),
    #[error("vehicles {a} and {b} collided at t={t:.2} s")]
    Collision { t: f64, a: usize, b: usize, log: Box<SimLog> },
}

impl SimError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
