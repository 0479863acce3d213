use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SimError;
use crate::planner::SolveLimits;
use crate::tracker::TrackerParams;
use crate::traffic::IdmParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Controller {
    /// Grid planning with blocking and cut-through.
    Swarming,
    /// Lane-keeping gap regulation behind whatever is ahead.
    BaselineCacc,
    /// No CAVs at all; the reference for upstream impact.
    HvOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RoadConfig {
    pub lane_count: usize,
    pub lane_width: f64,
}

impl Default for RoadConfig {
    fn default() -> Self {
        Self { lane_count: 3, lane_width: 3.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VehicleConfig {
    pub length: f64,
    /// Footprint width used for collision checks and leader detection.
    pub width: f64,
}

impl Default for VehicleConfig {
    fn default() -> Self {
        Self { length: 5.0, width: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlatoonConfig {
    pub count: usize,
    /// 1-based lane.
    pub lane: usize,
    /// Centre position of the lead CAV at t = 0.
    pub lead_s: f64,
    /// Centre-to-centre spacing of consecutive CAVs at t = 0.
    pub spacing: f64,
    pub speed: f64,
    /// Minimum safety distance between CAVs (bumper to bumper).
    pub min_gap: f64,
    /// Desired safety distance between CAVs, centre to centre like the
    /// cells; cruise control adds its time headway on top.
    pub desired_gap: f64,
}

impl Default for PlatoonConfig {
    fn default() -> Self {
        Self {
            count: 6,
            lane: 2,
            lead_s: 50.0,
            spacing: 10.0,
            speed: 20.0,
            min_gap: 5.0,
            desired_gap: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FrontHvConfig {
    /// `false` leaves the platoon lane empty ahead.
    pub enabled: bool,
    /// Centre-to-centre distance ahead of the lead CAV at t = 0.
    pub gap: f64,
    pub speed: f64,
}

impl Default for FrontHvConfig {
    fn default() -> Self {
        Self { enabled: true, gap: 20.0, speed: 17.5 }
    }
}

/// A column of HVs in one lane, listed front to back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamConfig {
    pub lane: usize,
    pub count: usize,
    /// Centre position of the first HV at t = 0.
    pub lead_s: f64,
    /// Centre-to-centre spacing.
    pub spacing: f64,
    pub speed: f64,
    /// IDM desired speed of every HV behind the first; the IDM `v0`
    /// otherwise.
    #[serde(default)]
    pub follower_desired_speed: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlannerConfig {
    pub w_tar: f64,
    pub w_lon: f64,
    pub w_lat: f64,
    pub l_index: usize,
    /// Steps per planning episode.
    pub horizon: usize,
    /// Behavior step length in seconds.
    pub dt_b: f64,
    /// Forces the cell length instead of vehicle length plus minimum gap.
    pub cell_length: Option<f64>,
    pub max_nodes: u64,
    pub max_refinements: usize,
    /// How far ahead of the lead CAV a slower HV counts as impeding.
    pub detect_range: f64,
    /// Treat trailing steps in which no CAV changes cell as already executed.
    pub truncate_idle_tail: bool,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            w_tar: 20.0,
            w_lon: 1.0,
            w_lat: 10.0,
            l_index: 2,
            horizon: 15,
            dt_b: 3.0,
            cell_length: None,
            max_nodes: SolveLimits::default().max_nodes,
            max_refinements: 4,
            detect_range: 120.0,
            truncate_idle_tail: true,
        }
    }
}

/// Constant-time-gap following:
/// `a = ka a_lead + kp (gap - gap_des) + kd (v_lead - v)` with
/// `gap_des = desired_gap + headway v` and `a_lead` known only for CAV
/// leaders, or `a = kv (v_cruise - v)` on a
/// free road. With a leader in range the follower may exceed the cruise
/// speed by `catch_up` to close a gap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CaccConfig {
    pub ka: f64,
    pub kp: f64,
    pub kd: f64,
    pub kv: f64,
    pub headway: f64,
    pub catch_up: f64,
    /// Leaders farther than this (bumper gap) are ignored.
    pub range: f64,
}

impl Default for CaccConfig {
    fn default() -> Self {
        Self {
            ka: 1.0,
            kp: 0.45,
            kd: 0.25,
            kv: 0.5,
            headway: 0.6,
            catch_up: 2.0,
            range: 100.0,
        }
    }
}

/// Braking guard layered under reference tracking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SafetyConfig {
    /// Extra lateral clearance beyond the footprint width for a vehicle to
    /// count as in the path.
    pub lateral_margin: f64,
    /// Bumper gap the guard brakes to hold.
    pub stop_gap: f64,
    /// How far ahead, in seconds of travel, a planned CAV looks along its
    /// path for a lane change. While the target lane has a vehicle within
    /// `length + stop_gap` of it, the CAV keeps its current lane.
    pub lane_hold_lookahead: f64,
}

impl Default for SafetyConfig {
    fn default() -> Self {
        Self { lateral_margin: 0.3, stop_gap: 2.5, lane_hold_lookahead: 1.0 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MoeConfig {
    /// Road interval for travel times; defaults to the span the first
    /// planning grid covers.
    pub segment: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub seed: u64,
    /// Uniform jitter (metres) applied to stream HV start positions.
    pub jitter: f64,
    pub duration: f64,
    pub controller: Controller,
    /// Swarm cruising speed.
    pub cruise_speed: f64,
    pub road: RoadConfig,
    pub vehicle: VehicleConfig,
    pub platoon: PlatoonConfig,
    pub front_hv: FrontHvConfig,
    pub streams: Vec<StreamConfig>,
    pub planner: PlannerConfig,
    pub tracker: TrackerParams<f64>,
    pub idm: IdmParams<f64>,
    pub cacc: CaccConfig,
    pub safety: SafetyConfig,
    pub moe: MoeConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let stream = |lane| StreamConfig {
            lane,
            count: 5,
            lead_s: 30.0,
            spacing: 25.0,
            speed: 17.5,
            follower_desired_speed: None,
        };
        Self {
            seed: 0,
            jitter: 0.0,
            duration: 60.0,
            controller: Controller::Swarming,
            cruise_speed: 20.0,
            road: RoadConfig::default(),
            vehicle: VehicleConfig::default(),
            platoon: PlatoonConfig::default(),
            front_hv: FrontHvConfig::default(),
            streams: vec![stream(1), stream(3)],
            planner: PlannerConfig::default(),
            tracker: TrackerParams::default(),
            idm: IdmParams::default(),
            cacc: CaccConfig::default(),
            safety: SafetyConfig::default(),
            moe: MoeConfig::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, SimError> {
        let cfg: Self = toml::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Ticks per behavior step.
    pub fn ticks_per_step(&self) -> usize {
        (self.planner.dt_b / self.tracker.dt).round() as usize
    }

    pub fn tick_count(&self) -> usize {
        (self.duration / self.tracker.dt).round() as usize
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Config(m));
        let p = &self.planner;
        let tr = &self.tracker;
        let positive = [
            ("road.lane_width", self.road.lane_width),
            ("vehicle.length", self.vehicle.length),
            ("vehicle.width", self.vehicle.width),
            ("planner.dt_b", p.dt_b),
            ("tracker.dt", tr.dt),
            ("tracker.ds", tr.ds),
            ("tracker.wheelbase", tr.wheelbase),
            ("tracker.r_lon", tr.r_lon),
            ("tracker.r_lat", tr.r_lat),
            ("cruise_speed", self.cruise_speed),
            ("platoon.min_gap", self.platoon.min_gap),
            ("duration", self.duration),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if self.road.lane_count == 0 {
            return bad("road.lane_count must be at least 1".into());
        }
        let lanes = 1..=self.road.lane_count;
        if !lanes.contains(&self.platoon.lane) {
            return bad(format!("platoon.lane {} is not a lane", self.platoon.lane));
        }
        if !lanes.contains(&p.l_index) {
            return bad(format!("planner.l_index {} is not a lane", p.l_index));
        }
        if let Some(s) = self.streams.iter().find(|s| !lanes.contains(&s.lane)) {
            return bad(format!("stream lane {} is not a lane", s.lane));
        }
        if p.horizon < 2 {
            return bad("planner.horizon must be at least 2".into());
        }
        if self.duration < p.horizon as f64 * p.dt_b {
            return bad(format!(
                "duration {} s is shorter than one planning horizon ({} steps of {} s)",
                self.duration, p.horizon, p.dt_b
            ));
        }
        let ratio = p.dt_b / tr.dt;
        if (ratio - ratio.round()).abs() > 1e-6 || ratio.round() < 1.0 {
            return bad("planner.dt_b must be a whole number of tracker ticks".into());
        }
        if p.w_tar < 0.0 || p.w_lon < 0.0 || p.w_lat < 0.0 {
            return bad("planner weights must be non-negative".into());
        }
        if tr.lon_horizon == 0 || tr.lat_horizon == 0 {
            return bad("tracker horizons must be positive".into());
        }
        if !(tr.a_min < tr.a_max) || !(tr.steer_min < tr.steer_max) || !(tr.v_min < tr.v_max) {
            return bad("tracker bounds must be ordered".into());
        }
        self.idm.validate().map_err(|e| SimError::Config(e.to_string()))?;
        if self.jitter < 0.0 {
            return bad("jitter must be non-negative".into());
        }
        Ok(())
    }
}
