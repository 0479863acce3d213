use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{Controller, PlannerConfig, ScenarioConfig};
use super::log::{
    CavWaypoints, CollisionRecord, ControlRow, EpisodeRecord, Frame, GridSummary, Role, SimLog, TrackingRow, Trigger,
    VehicleMeta,
};
use super::world::{cacc_accel, guard_accel, collisions, nearest_lane, path_leader, step_agent, Agent, Command, Footprint};
use super::SimError;
use crate::grid::{build_grid, centered_lanes, CellIndex, GridMode, GriddingInputs, MovingGrid};
use crate::planner::{plan_episode, should_replan, EpisodePlan, HvForecast, PlanDocument, PlannerWeights, SolveLimits};
use crate::tracker::{
    build_lat_problem, build_lat_problem_from_curvature, build_lon_problem, clamp_control, lqr_solve, LatState,
    LonState, LqrProblem, StageGain,
};
use crate::traffic::{forecast_cells, idm_accel, step_hv, DetectionRule, IdmParams, Kinematics, VehicleKind};
use crate::trajgen::{build_reference_path, generate_waypoints, ReferencePath};

/// One planning episode's inputs: the grid laid at `t0`, the HV forecast and
/// the CAVs' starting cells, in plan order (front CAV first).
#[derive(Debug, Clone)]
pub struct PlanningProblem {
    pub t0: f64,
    pub s0: f64,
    pub cav_ids: Vec<usize>,
    agents: Vec<usize>,
    pub grid: MovingGrid<f64>,
    pub forecast: HvForecast,
    pub init: Vec<CellIndex>,
    pub weights: PlannerWeights<f64>,
    pub horizon: usize,
}

impl PlanningProblem {
    pub fn solve(&self, pc: &PlannerConfig) -> Result<EpisodePlan<f64>, SimError> {
        let limits = SolveLimits { max_nodes: pc.max_nodes, time_limit: None, ..SolveLimits::default() };
        plan_episode(&self.grid, &self.init, &self.forecast, &self.weights, self.horizon, limits, pc.max_refinements)
            .map_err(|source| SimError::Planner { t: self.t0, source })
    }
}

/// The first planning episode of a swarming run, as the platoon sees it at
/// t = 0. `horizon` overrides the configured step count.
pub fn initial_problem(cfg: &ScenarioConfig, horizon: Option<usize>) -> Result<PlanningProblem, SimError> {
    cfg.validate()?;
    let mut r = Runner::new(cfg, Controller::Swarming)?;
    r.front_hv = r.detect_front_hv();
    r.problem(0.0, horizon.unwrap_or(cfg.planner.horizon))
}

/// Runs the scenario under its configured controller.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<SimLog, SimError> {
    run_mode(cfg, cfg.controller)
}

/// Runs the scenario under `controller`, whatever the file says.
pub fn run_mode(cfg: &ScenarioConfig, controller: Controller) -> Result<SimLog, SimError> {
    cfg.validate()?;
    let mut r = Runner::new(cfg, controller)?;
    let n = cfg.tick_count();
    let dt = cfg.tracker.dt;
    for tick in 0..=n {
        let t = tick as f64 * dt;
        r.log.frames.push(Frame {
            t,
            states: r.agents.iter().map(|a| a.state).collect(),
        });
        if tick == n {
            break;
        }
        r.manage(tick, t)?;
        let cmds = r.commands(tick, t);
        r.step(&cmds, t)?;
    }
    Ok(r.log)
}

struct CavTracker {
    path: ReferencePath<f64>,
    lon: LqrProblem<f64>,
    lon_gains: Vec<StageGain<f64>>,
    lon_tick0: usize,
    lat_gains: Vec<StageGain<f64>>,
    lat_x0: f64,
}

struct Episode {
    record: usize,
    grid: MovingGrid<f64>,
    known_hvs: BTreeSet<usize>,
    start_tick: usize,
    scheduled: usize,
    /// Agent index of each planned CAV, in plan order.
    agents: Vec<usize>,
    trackers: Vec<CavTracker>,
}

enum Phase {
    Cruise,
    Planned(Box<Episode>),
}

struct Runner<'a> {
    cfg: &'a ScenarioConfig,
    controller: Controller,
    lanes: Vec<f64>,
    fp: Footprint,
    kin: Kinematics<f64>,
    agents: Vec<Agent>,
    front_hv: Option<usize>,
    lane_keep: StageGain<f64>,
    phase: Phase,
    log: SimLog,
}

/// Vehicles at t = 0. CAV ids come first and are reserved even when the run
/// has no CAVs, so ids match across controllers.
fn initial_agents(cfg: &ScenarioConfig, controller: Controller, lanes: &[f64]) -> (Vec<Agent>, Vec<VehicleMeta>) {
    let mut agents = Vec::new();
    let mut meta = Vec::new();
    let p = &cfg.platoon;
    let y = lanes[p.lane - 1];
    for i in 0..p.count {
        if controller != Controller::HvOnly {
            agents.push(Agent::new(i, VehicleKind::Cav, p.lead_s - i as f64 * p.spacing, y, p.speed, p.lane));
            meta.push(VehicleMeta { id: i, kind: VehicleKind::Cav, role: Role::Cav { index: i } });
        }
    }
    let mut id = p.count;
    if cfg.front_hv.enabled {
        let f = &cfg.front_hv;
        agents.push(Agent::new(id, VehicleKind::Hv, p.lead_s + f.gap, y, f.speed, p.lane).with_desired_speed(cfg.idm.v0));
        meta.push(VehicleMeta { id, kind: VehicleKind::Hv, role: Role::FrontHv });
        id += 1;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for st in &cfg.streams {
        for j in 0..st.count {
            let jitter = if cfg.jitter > 0.0 { rng.gen_range(-cfg.jitter..=cfg.jitter) } else { 0.0 };
            let s = st.lead_s - j as f64 * st.spacing + jitter;
            let v0 = st.follower_desired_speed.filter(|_| j > 0).unwrap_or(cfg.idm.v0);
            agents.push(Agent::new(id, VehicleKind::Hv, s, lanes[st.lane - 1], st.speed, st.lane).with_desired_speed(v0));
            meta.push(VehicleMeta { id, kind: VehicleKind::Hv, role: Role::Stream { lane: st.lane, index: j } });
            id += 1;
        }
    }
    (agents, meta)
}

impl<'a> Runner<'a> {
    fn new(cfg: &'a ScenarioConfig, controller: Controller) -> Result<Self, SimError> {
        let lanes = centered_lanes(cfg.road.lane_count, cfg.road.lane_width);
        let (agents, vehicles) = initial_agents(cfg, controller, &lanes);
        let straight = vec![0.0; cfg.tracker.lat_horizon];
        let keep = build_lat_problem_from_curvature(LatState { l: 0.0, phi: 0.0 }, &straight, &cfg.tracker)?;
        let lane_keep = lqr_solve(&keep)?.gains[0];
        Ok(Self {
            cfg,
            controller,
            lanes,
            fp: Footprint { length: cfg.vehicle.length, width: cfg.vehicle.width },
            kin: Kinematics { length: cfg.vehicle.length, ..Kinematics::default() },
            agents,
            front_hv: None,
            lane_keep,
            phase: Phase::Cruise,
            log: SimLog {
                controller,
                dt: cfg.tracker.dt,
                vehicles,
                frames: Vec::new(),
                controls: Vec::new(),
                tracking: Vec::new(),
                episodes: Vec::new(),
                collisions: Vec::new(),
                overtake_done_at: None,
            },
        })
    }

    fn cav_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.agents.iter().enumerate().filter(|(_, a)| a.is_cav()).map(|(i, _)| i)
    }

    fn agent_by_id(&self, id: usize) -> Option<&Agent> {
        self.agents.iter().find(|a| a.state.id == id)
    }

    /// The nearest HV ahead of the lead CAV, in its path and within range,
    /// that is slower than the swarm wants to go.
    fn detect_front_hv(&self) -> Option<usize> {
        let lead = self
            .cav_indices()
            .map(|i| &self.agents[i].state)
            .max_by(|a, b| a.s.total_cmp(&b.s))?;
        self.agents
            .iter()
            .map(|a| &a.state)
            .filter(|o| {
                o.kind == VehicleKind::Hv
                    && self.fp.in_path(lead, o)
                    && o.s - lead.s <= self.cfg.planner.detect_range
                    && o.v < self.cfg.cruise_speed
            })
            .min_by(|a, b| a.s.total_cmp(&b.s))
            .map(|o| o.id)
    }

    fn overtake_done(&self) -> bool {
        let target = self.cfg.planner.l_index;
        let y = self.lanes[target - 1];
        let front = self.front_hv.and_then(|id| self.agent_by_id(id));
        self.cav_indices().map(|i| &self.agents[i].state).all(|c| {
            let passed = front.is_none_or(|f| c.s > f.state.s + self.cfg.vehicle.length);
            passed && nearest_lane(&self.lanes, c.y) == target && (c.y - y).abs() < 0.5
        })
    }

    fn manage(&mut self, tick: usize, t: f64) -> Result<(), SimError> {
        if self.controller != Controller::Swarming {
            return Ok(());
        }
        let tps = self.cfg.ticks_per_step();
        match &self.phase {
            Phase::Cruise => {
                if tick.is_multiple_of(tps) && self.log.overtake_done_at.is_none() {
                    if let Some(id) = self.detect_front_hv() {
                        self.front_hv = Some(id);
                        self.start_episode(tick, t, Trigger::Impeded)?;
                    }
                }
            }
            Phase::Planned(ep) => {
                let since = tick - ep.start_tick;
                if since == 0 || !since.is_multiple_of(tps) {
                    return Ok(());
                }
                let executed = since / tps;
                self.log.episodes[ep.record].executed_steps = executed;
                let entered = self.new_hv_entered(ep, t);
                if should_replan(executed, ep.scheduled, entered) {
                    if entered {
                        self.start_episode(tick, t, Trigger::NewHv)?;
                    } else if self.overtake_done() {
                        log::info!("overtake finished at t={t:.2} s; cruising");
                        self.log.overtake_done_at = Some(t);
                        self.phase = Phase::Cruise;
                    } else {
                        self.start_episode(tick, t, Trigger::PlanExecuted)?;
                    }
                } else {
                    self.resolve_trackers(tick, t)?;
                }
            }
        }
        Ok(())
    }

    fn new_hv_entered(&self, ep: &Episode, t: f64) -> bool {
        self.agents.iter().any(|a| {
            a.state.kind == VehicleKind::Hv
                && !ep.known_hvs.contains(&a.state.id)
                && ep.grid.world_to_cell(t, a.state.s, a.state.y).is_ok()
        })
    }

    /// The planning problem seen from the CAVs' positions at time `t`.
    fn problem(&self, t: f64, horizon: usize) -> Result<PlanningProblem, SimError> {
        let cfg = self.cfg;
        let pc = &cfg.planner;
        let mut order: Vec<usize> = self.cav_indices().collect();
        order.sort_by(|&a, &b| self.agents[b].state.s.total_cmp(&self.agents[a].state.s));
        let l_cell = pc.cell_length.unwrap_or(cfg.vehicle.length + cfg.platoon.min_gap);
        let tail = order.iter().map(|&i| self.agents[i].state.s).fold(f64::INFINITY, f64::min);
        let s0 = tail - l_cell / 2.0;
        let front = self.front_hv.and_then(|id| self.agent_by_id(id)).map(|a| a.state);
        let overtaking = front.is_some_and(|f| f.s > s0) && !self.overtake_done();
        let f = front.filter(|_| overtaking);
        let inputs = GriddingInputs {
            t0: t,
            tail_cav_s: s0,
            lane_count: cfg.road.lane_count,
            lane_width: cfg.road.lane_width,
            cav_count: order.len(),
            front_hv_s: f.map_or(s0, |f| f.s),
            front_hv_v: f.map_or(cfg.cruise_speed, |f| f.v),
            cav_length: cfg.vehicle.length,
            safe_distance: cfg.platoon.min_gap,
            mode: if overtaking { GridMode::Overtaking } else { GridMode::Cruising },
            cruise_speed: cfg.cruise_speed,
            cell_length_override: pc.cell_length,
        };
        let mut grid = build_grid(&inputs)?;
        let needed = order
            .iter()
            .map(|&i| ((self.agents[i].state.s - s0) / l_cell).floor() as usize + 1)
            .max()
            .unwrap_or(1);
        if needed > grid.n_rows {
            grid = MovingGrid::new(t, s0, grid.v_cell, needed, l_cell, grid.w_cell, grid.lane_y.clone())?;
        }

        let hvs: Vec<_> = self.agents.iter().filter(|a| !a.is_cav()).map(|a| a.state).collect();
        let rule = DetectionRule {
            platoon_col: cfg.platoon.lane,
            front_hv_id: f.map(|f| f.id),
            enabled: overtaking,
        };
        let forecast = forecast_cells(&hvs, &grid, horizon, pc.dt_b, rule)?;
        let init = self.initial_cells(&order, &grid, t, forecast.occupied_at(1).map(|(_, c)| c).collect());
        let weights = PlannerWeights {
            w_tar: pc.w_tar,
            w_lon: pc.w_lon,
            w_lat: pc.w_lat,
            l_index: pc.l_index,
            delta: overtaking,
        };
        Ok(PlanningProblem {
            t0: t,
            s0,
            cav_ids: order.iter().map(|&i| self.agents[i].state.id).collect(),
            agents: order,
            grid,
            forecast,
            init,
            weights,
            horizon,
        })
    }

    fn start_episode(&mut self, tick: usize, t: f64, trigger: Trigger) -> Result<(), SimError> {
        let cfg = self.cfg;
        let pc = &cfg.planner;
        let prob = self.problem(t, pc.horizon)?;
        let ep = prob.solve(pc)?;
        let PlanningProblem { s0, grid, forecast, agents: order, .. } = prob;
        log::info!(
            "episode {} at t={t:.2} s ({trigger:?}): {} rows, objective {}, {} nodes",
            self.log.episodes.len(),
            grid.n_rows,
            ep.plan.objective,
            ep.stats.nodes
        );
        let cells = &ep.plan.cells;
        let last_move = (1..pc.horizon)
            .filter(|&k0| cells.iter().any(|c| c[k0] != c[k0 - 1]))
            .max()
            .unwrap_or(0);
        let scheduled = if pc.truncate_idle_tail { last_move.max(1) } else { pc.horizon - 1 };

        let mut waypoints = Vec::with_capacity(order.len());
        let mut paths = Vec::with_capacity(order.len());
        for (seq, &ai) in cells.iter().zip(&order) {
            let wps = generate_waypoints(seq, &grid, pc.dt_b)?;
            paths.push(build_reference_path(&wps, cfg.tracker.ds)?);
            waypoints.push(CavWaypoints { cav_id: self.agents[ai].state.id, waypoints: wps });
        }
        let record = self.log.episodes.len();
        self.log.episodes.push(EpisodeRecord {
            index: record,
            t0: t,
            trigger,
            grid: GridSummary {
                t0: t,
                s0,
                v_cell: grid.v_cell,
                n_rows: grid.n_rows,
                n_cols: grid.n_cols,
                l_cell: grid.l_cell,
            },
            cav_ids: order.iter().map(|&i| self.agents[i].state.id).collect(),
            plan: PlanDocument::from(&ep.plan),
            delta_by_step: ep.delta_by_step.clone(),
            lane_events: forecast.detected_lane_events.clone(),
            refinements: ep.refinements,
            nodes: ep.stats.nodes,
            scheduled_steps: scheduled,
            executed_steps: 0,
            waypoints,
        });
        let trackers = paths
            .into_iter()
            .zip(&order)
            .map(|(path, &ai)| self.tracker_for(path, ai, tick, t))
            .collect::<Result<_, _>>()?;
        self.phase = Phase::Planned(Box::new(Episode {
            record,
            known_hvs: forecast.hvs.iter().map(|h| h.id).collect(),
            grid,
            start_tick: tick,
            scheduled,
            agents: order,
            trackers,
        }));
        Ok(())
    }

    /// Cells of the CAVs at the grid epoch. A CAV whose cell is already taken
    /// (tracking slack can put two CAVs in one cell) moves to the nearest free
    /// row in its lane.
    fn initial_cells(&self, order: &[usize], grid: &MovingGrid<f64>, t: f64, hv: BTreeSet<CellIndex>) -> Vec<CellIndex> {
        let mut taken = hv;
        let origin = grid.origin_at(t);
        order
            .iter()
            .map(|&i| {
                let st = &self.agents[i].state;
                let raw = (((st.s - origin) / grid.l_cell).floor() as isize + 1).clamp(1, grid.n_rows as isize);
                let col = nearest_lane(&grid.lane_y, st.y);
                let cell = (0..grid.n_rows as isize)
                    .flat_map(|d| [raw - d, raw + d])
                    .filter(|&r| r >= 1 && r <= grid.n_rows as isize)
                    .map(|r| CellIndex::new(r as usize, col))
                    .find(|c| !taken.contains(c))
                    .unwrap_or(CellIndex::new(raw as usize, col));
                taken.insert(cell);
                cell
            })
            .collect()
    }

    fn tracker_for(&self, path: ReferencePath<f64>, ai: usize, tick: usize, t: f64) -> Result<CavTracker, SimError> {
        let p = &self.cfg.tracker;
        let a = &self.agents[ai];
        let lon = build_lon_problem(LonState { s: a.state.s, v: a.state.v }, &path, t, p, p.lon_horizon)?;
        let lon_gains = lqr_solve(&lon)?.gains;
        let lat_state = lateral_error(&path, a);
        let lat = build_lat_problem(lat_state, &path, a.state.s, p, p.lat_horizon)?;
        let lat_gains = lqr_solve(&lat)?.gains;
        Ok(CavTracker {
            path,
            lon,
            lon_gains,
            lon_tick0: tick,
            lat_gains,
            lat_x0: a.state.s,
        })
    }

    fn resolve_trackers(&mut self, tick: usize, t: f64) -> Result<(), SimError> {
        let Phase::Planned(mut ep) = std::mem::replace(&mut self.phase, Phase::Cruise) else {
            return Ok(());
        };
        let old = std::mem::take(&mut ep.trackers);
        ep.trackers = old
            .into_iter()
            .zip(&ep.agents)
            .map(|(tr, &ai)| self.tracker_for(tr.path, ai, tick, t))
            .collect::<Result<_, _>>()?;
        self.phase = Phase::Planned(ep);
        Ok(())
    }

    /// True when the path turns into a lane that has a vehicle alongside.
    fn lane_blocked(&self, agent: &Agent, path: &ReferencePath<f64>) -> bool {
        let cfg = self.cfg;
        let st = &agent.state;
        let here = nearest_lane(&self.lanes, st.y);
        let ahead = path.at(st.s + st.v * cfg.safety.lane_hold_lookahead).y;
        let target = nearest_lane(&self.lanes, ahead);
        let reach = cfg.vehicle.length + cfg.safety.stop_gap;
        target != here
            && self.agents.iter().any(|o| {
                o.state.id != st.id
                    && nearest_lane(&self.lanes, o.state.y) == target
                    && (o.state.s - st.s).abs() < reach
            })
    }

    fn commands(&mut self, tick: usize, t: f64) -> Vec<Command> {
        let cfg = self.cfg;
        let p = &cfg.tracker;
        let mut cmds = vec![Command::default(); self.agents.len()];
        for (i, agent) in self.agents.iter().enumerate() {
            let st = &agent.state;
            if !agent.is_cav() {
                let leader = path_leader(st, &self.agents, self.fp);
                let idm = IdmParams { v0: agent.desired_speed, ..cfg.idm };
                cmds[i].accel = idm_accel(st, leader, &idm, &self.kin);
                continue;
            }
            let planned = match &self.phase {
                Phase::Planned(ep) => ep.agents.iter().position(|&a| a == i).map(|k| &ep.trackers[k]),
                Phase::Cruise => None,
            };
            let (cmd, row) = match planned {
                Some(tr) => {
                    let j = (tick - tr.lon_tick0).min(tr.lon_gains.len() - 1);
                    let x = [st.s, st.v];
                    let mut accel = clamp_control(&tr.lon, j, &x, tr.lon_gains[j].control(&x));
                    let wide = Footprint { width: self.fp.width + cfg.safety.lateral_margin, ..self.fp };
                    if let Some(l) = path_leader(st, &self.agents, wide) {
                        accel = accel.min(guard_accel(st, l, cfg.vehicle.length, cfg.safety.stop_gap, p.a_min, p.dt));
                    }
                    let lat = lateral_error(&tr.path, agent);
                    let js = (((st.s - tr.lat_x0) / p.ds).floor().max(0.0) as usize).min(tr.lat_gains.len() - 1);
                    let steer = if self.lane_blocked(agent, &tr.path) {
                        let lane_y = self.lanes[nearest_lane(&self.lanes, st.y) - 1];
                        self.lane_keep.control(&[st.y - lane_y, agent.psi])
                    } else {
                        tr.lat_gains[js].control(&[lat.l, lat.phi])
                    }
                    .clamp(p.steer_min, p.steer_max);
                    let (s_des, v_des) = tr.path.desired(t);
                    (Command { accel, steer }, (lat, Some(s_des), Some(v_des)))
                }
                None => {
                    let leader = path_leader(st, &self.agents, self.fp);
                    let accel = cacc_accel(
                        st,
                        leader,
                        &cfg.cacc,
                        cfg.platoon.desired_gap - cfg.vehicle.length,
                        cfg.vehicle.length,
                        cfg.cruise_speed,
                    )
                    .clamp(p.a_min, p.a_max);
                    let lane_y = self.lanes[nearest_lane(&self.lanes, st.y) - 1];
                    let lat = LatState { l: st.y - lane_y, phi: agent.psi };
                    let steer = self.lane_keep.control(&[lat.l, lat.phi]).clamp(p.steer_min, p.steer_max);
                    (Command { accel, steer }, (lat, None, None))
                }
            };
            cmds[i] = cmd;
            self.log.controls.push(ControlRow { cav_id: st.id, t, a_cmd: cmd.accel, delta_cmd: cmd.steer });
            let (lat, s_des, v_des) = row;
            self.log.tracking.push(TrackingRow {
                cav_id: st.id,
                t,
                s: st.s,
                y: st.y,
                v: st.v,
                phi: lat.phi,
                l: lat.l,
                s_des,
                v_des,
            });
        }
        cmds
    }

    fn step(&mut self, cmds: &[Command], t: f64) -> Result<(), SimError> {
        let p = &self.cfg.tracker;
        let next: Vec<Agent> = self
            .agents
            .iter()
            .zip(cmds)
            .map(|(a, &c)| {
                if a.is_cav() {
                    Ok(step_agent(a, c, p.wheelbase, p.dt, &self.lanes))
                } else {
                    step_hv(&a.state, c.accel, p.dt).map(|state| Agent { state, ..*a })
                }
            })
            .collect::<Result<_, _>>()?;
        self.agents = next;
        let hits = collisions(&self.agents, self.fp);
        if let Some(&(a, b)) = hits.first() {
            let t = t + p.dt;
            for &(a, b) in &hits {
                self.log.collisions.push(CollisionRecord { t, a, b });
            }
            self.log.frames.push(Frame { t, states: self.agents.iter().map(|a| a.state).collect() });
            log::error!("collision between {a} and {b} at t={t:.2} s");
            return Err(SimError::Collision { t, a, b, log: Box::new(self.log.clone()) });
        }
        Ok(())
    }
}

/// Offset and heading error of `agent` relative to the path at its station.
fn lateral_error(path: &ReferencePath<f64>, agent: &Agent) -> LatState<f64> {
    let pt = path.at(agent.state.s);
    LatState {
        l: (agent.state.y - pt.y) * pt.heading.cos(),
        phi: agent.psi - pt.heading,
    }
}
