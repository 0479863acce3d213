//! Cooperative overtaking for CAV swarms.
//!
//! The pipeline: lay a moving cell grid over the road ([`grid`]), plan each
//! CAV's cell sequence with an exact 0-1 program ([`planner`]), turn cells into
//! waypoints and smooth reference paths ([`trajgen`]), track them with LQR
//! solved by backward dynamic programming ([`tracker`]), and close the loop
//! against IDM-driven traffic ([`traffic`], [`sim`]).

// Parameter checks are written `!(x > 0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod grid;
pub mod planner;
pub mod scalar;
pub mod sim;
pub mod traffic;
pub mod tracker;
pub mod trajgen;

pub use scalar::{Real, Weight};

pub type MovingGrid = grid::MovingGrid<f64>;
pub type MovingGridF32 = grid::MovingGrid<f32>;
pub type GriddingInputs = grid::GriddingInputs<f64>;
pub type PlannerWeights = planner::PlannerWeights<f64>;
pub type BinaryProgram = planner::BinaryProgram<f64>;
pub type OccupancyPlan = planner::OccupancyPlan<f64>;
pub type ReferencePath = trajgen::ReferencePath<f64>;
pub type TrackerParams = tracker::TrackerParams<f64>;
pub type IdmParams = traffic::IdmParams<f64>;
