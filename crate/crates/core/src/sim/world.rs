use serde::{Deserialize, Serialize};

use super::config::CaccConfig;
use crate::traffic::{VehicleKind, VehicleState};

/// A simulated vehicle: the shared kinematic state plus a heading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Agent {
    pub state: VehicleState<f64>,
    pub psi: f64,
    /// IDM desired speed; unused for CAVs.
    pub desired_speed: f64,
}

impl Agent {
    pub fn new(id: usize, kind: VehicleKind, s: f64, y: f64, v: f64, lane: usize) -> Self {
        Self {
            state: VehicleState { id, kind, s, y, v, a: 0.0, lane },
            psi: 0.0,
            desired_speed: v,
        }
    }

    pub fn with_desired_speed(self, desired_speed: f64) -> Self {
        Self { desired_speed, ..self }
    }

    pub fn is_cav(&self) -> bool {
        self.state.kind == VehicleKind::Cav
    }
}

/// Acceleration and front wheel angle applied for one tick.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Command {
    pub accel: f64,
    pub steer: f64,
}

/// 1-based index of the lane centre nearest to `y`.
pub fn nearest_lane(lanes: &[f64], y: f64) -> usize {
    lanes
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - y).abs().total_cmp(&(b.1 - y).abs()))
        .map_or(1, |(i, _)| i + 1)
}

/// Kinematic bicycle step with trapezoidal speed, as for lane-keeping
/// vehicles. Speed never goes negative.
pub fn step_agent(agent: &Agent, cmd: Command, wheelbase: f64, dt: f64, lanes: &[f64]) -> Agent {
    let st = &agent.state;
    let v = (st.v + cmd.accel * dt).max(0.0);
    let vm = 0.5 * (st.v + v);
    let s = st.s + vm * agent.psi.cos() * dt;
    let y = st.y + vm * agent.psi.sin() * dt;
    let psi = agent.psi + vm * cmd.steer.tan() / wheelbase * dt;
    Agent {
        state: VehicleState {
            s,
            y,
            v,
            a: (v - st.v) / dt,
            lane: nearest_lane(lanes, y),
            ..*st
        },
        psi,
        desired_speed: agent.desired_speed,
    }
}

/// Footprint geometry for overlap tests.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Footprint {
    pub length: f64,
    pub width: f64,
}

impl Footprint {
    pub fn overlaps(&self, a: &VehicleState<f64>, b: &VehicleState<f64>) -> bool {
        (a.s - b.s).abs() < self.length && (a.y - b.y).abs() < self.width
    }

    /// Whether `other` is in `ego`'s path: ahead and laterally overlapping.
    pub fn in_path(&self, ego: &VehicleState<f64>, other: &VehicleState<f64>) -> bool {
        other.id != ego.id && other.s > ego.s && (other.y - ego.y).abs() < self.width
    }
}

/// All overlapping pairs, as ordered id pairs.
pub fn collisions(agents: &[Agent], fp: Footprint) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (i, a) in agents.iter().enumerate() {
        for b in &agents[i + 1..] {
            if fp.overlaps(&a.state, &b.state) {
                let (x, y) = (a.state.id.min(b.state.id), a.state.id.max(b.state.id));
                out.push((x, y));
            }
        }
    }
    out
}

/// Nearest vehicle whose footprint lies in `ego`'s path.
pub fn path_leader<'a>(ego: &VehicleState<f64>, agents: &'a [Agent], fp: Footprint) -> Option<&'a VehicleState<f64>> {
    agents
        .iter()
        .map(|a| &a.state)
        .filter(|o| fp.in_path(ego, o))
        .min_by(|a, b| a.s.total_cmp(&b.s))
}

/// Largest acceleration over the next `dt` that still lets `ego` stop at
/// `stop_gap` (bumper to bumper) behind `leader` when braking at `a_min`
/// and the leader holds its speed. Never below `a_min`.
pub fn guard_accel(ego: &VehicleState<f64>, leader: &VehicleState<f64>, length: f64, stop_gap: f64, a_min: f64, dt: f64) -> f64 {
    let room = (leader.s - ego.s - length - stop_gap).max(0.0);
    let v_safe = leader.v + (2.0 * -a_min * room).sqrt();
    ((v_safe - ego.v) / dt).max(a_min)
}

/// Gap-regulating acceleration, capped by speed regulation towards `cruise`.
pub fn cacc_accel(
    ego: &VehicleState<f64>,
    leader: Option<&VehicleState<f64>>,
    cfg: &CaccConfig,
    desired_gap: f64,
    length: f64,
    cruise: f64,
) -> f64 {
    let free = cfg.kv * (cruise - ego.v);
    match leader {
        Some(l) if l.s - ego.s - length <= cfg.range => {
            let gap = l.s - ego.s - length;
            // Only CAVs share their acceleration.
            let ff = if l.kind == VehicleKind::Cav { cfg.ka * l.a } else { 0.0 };
            let follow = ff + cfg.kp * (gap - desired_gap - cfg.headway * ego.v) + cfg.kd * (l.v - ego.v);
            follow.min(cfg.kv * (cruise + cfg.catch_up - ego.v))
        }
        _ => free,
    }
}
