use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::Controller;
use super::SimError;
use crate::planner::{LaneEvent, PlanDocument};
use crate::traffic::{VehicleKind, VehicleState};
use crate::trajgen::Waypoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "role", rename_all = "snake_case")]
pub enum Role {
    /// Position in the initial platoon, 0 at the front.
    Cav { index: usize },
    FrontHv,
    /// Position within a configured stream, 0 at the front.
    Stream { lane: usize, index: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VehicleMeta {
    pub id: usize,
    pub kind: VehicleKind,
    #[serde(flatten)]
    pub role: Role,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub t: f64,
    pub states: Vec<VehicleState<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlRow {
    pub cav_id: usize,
    pub t: f64,
    pub a_cmd: f64,
    pub delta_cmd: f64,
}

/// Reference-following detail for one CAV tick. Desired values are absent
/// while the CAV is cruising.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackingRow {
    pub cav_id: usize,
    pub t: f64,
    pub s: f64,
    pub y: f64,
    pub v: f64,
    pub phi: f64,
    pub l: f64,
    pub s_des: Option<f64>,
    pub v_des: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trigger {
    /// A slower HV was detected ahead of the platoon.
    Impeded,
    /// An HV outside the forecast moved into the grid.
    NewHv,
    /// The plan ran out before the overtake finished.
    PlanExecuted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    pub t0: f64,
    pub s0: f64,
    pub v_cell: f64,
    pub n_rows: usize,
    pub n_cols: usize,
    pub l_cell: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CavWaypoints {
    pub cav_id: usize,
    pub waypoints: Vec<Waypoint<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub index: usize,
    pub t0: f64,
    pub trigger: Trigger,
    pub grid: GridSummary,
    /// CAV ids in plan order.
    pub cav_ids: Vec<usize>,
    pub plan: PlanDocument,
    pub delta_by_step: Vec<bool>,
    pub lane_events: Vec<LaneEvent>,
    pub refinements: usize,
    pub nodes: u64,
    /// Behavior steps the plan was scheduled to run for.
    pub scheduled_steps: usize,
    /// Behavior steps actually run before the next trigger or the switch to
    /// cruising.
    pub executed_steps: usize,
    pub waypoints: Vec<CavWaypoints>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollisionRecord {
    pub t: f64,
    pub a: usize,
    pub b: usize,
}

/// Everything a run produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimLog {
    pub controller: Controller,
    pub dt: f64,
    pub vehicles: Vec<VehicleMeta>,
    pub frames: Vec<Frame>,
    pub controls: Vec<ControlRow>,
    pub tracking: Vec<TrackingRow>,
    pub episodes: Vec<EpisodeRecord>,
    pub collisions: Vec<CollisionRecord>,
    /// Time the overtake finished and cruising began, if it did.
    pub overtake_done_at: Option<f64>,
}

/// One row of `trajectories.csv`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub vehicle_id: usize,
    pub kind: VehicleKind,
    pub t: f64,
    pub s: f64,
    pub y: f64,
    pub v: f64,
    pub a: f64,
}

fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out)
}

fn create(path: &Path) -> Result<BufWriter<File>, SimError> {
    File::create(path).map(BufWriter::new).map_err(|e| SimError::io(path, e))
}

pub fn write_rows<W: Write, R: Serialize>(rows: impl IntoIterator<Item = R>, out: W) -> Result<(), SimError> {
    let mut w = csv_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| SimError::Io { path: "<csv>".into(), source: e })?;
    Ok(())
}

pub fn read_rows<R: Read, T: for<'de> Deserialize<'de>>(input: R) -> Result<Vec<T>, SimError> {
    csv::Reader::from_reader(input).deserialize().map(|r| r.map_err(SimError::from)).collect()
}

impl SimLog {
    pub fn trajectory_rows(&self) -> impl Iterator<Item = TrajectoryRow> + '_ {
        self.frames.iter().flat_map(|f| {
            f.states.iter().map(move |s| TrajectoryRow {
                vehicle_id: s.id,
                kind: s.kind,
                t: f.t,
                s: s.s,
                y: s.y,
                v: s.v,
                a: s.a,
            })
        })
    }

    pub fn meta(&self, id: usize) -> Option<&VehicleMeta> {
        self.vehicles.iter().find(|m| m.id == id)
    }

    pub fn cav_ids(&self) -> Vec<usize> {
        self.vehicles.iter().filter(|m| m.kind == VehicleKind::Cav).map(|m| m.id).collect()
    }

    /// Writes trajectories.csv, controls.csv, tracking.csv and episodes.json
    /// into `dir`, creating it if needed.
    pub fn write_dir(&self, dir: &Path) -> Result<(), SimError> {
        std::fs::create_dir_all(dir).map_err(|e| SimError::io(dir, e))?;
        write_rows(self.trajectory_rows(), create(&dir.join("trajectories.csv"))?)?;
        write_rows(&self.controls, create(&dir.join("controls.csv"))?)?;
        write_rows(&self.tracking, create(&dir.join("tracking.csv"))?)?;
        let path = dir.join("episodes.json");
        let mut f = create(&path)?;
        serde_json::to_writer_pretty(&mut f, &self.episodes)?;
        f.write_all(b"\n").and_then(|_| f.flush()).map_err(|e| SimError::io(&path, e))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trajectory_csv_round_trips() {
        let st = |id, kind, s: f64| VehicleState { id, kind, s, y: -3.0, v: 17.25, a: -0.125, lane: 1 };
        let log = SimLog {
            controller: Controller::Swarming,
            dt: 0.03,
            vehicles: vec![],
            frames: vec![
                Frame { t: 0.0, states: vec![st(0, VehicleKind::Cav, 1.0 / 3.0), st(7, VehicleKind::Hv, 20.0)] },
                Frame { t: 0.03, states: vec![st(0, VehicleKind::Cav, 0.9), st(7, VehicleKind::Hv, 20.5)] },
            ],
            controls: vec![ControlRow { cav_id: 0, t: 0.0, a_cmd: 0.1, delta_cmd: -1e-7 }],
            tracking: vec![],
            episodes: vec![],
            collisions: vec![],
            overtake_done_at: None,
        };
        let mut buf = Vec::new();
        write_rows(log.trajectory_rows(), &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("vehicle_id,kind,t,s,y,v,a\n0,cav,0.0,"));
        let back: Vec<TrajectoryRow> = read_rows(buf.as_slice()).unwrap();
        assert_eq!(back, log.trajectory_rows().collect::<Vec<_>>());

        let mut buf = Vec::new();
        write_rows(&log.controls, &mut buf).unwrap();
        let back: Vec<ControlRow> = read_rows(buf.as_slice()).unwrap();
        assert_eq!(back, log.controls);
    }
}
