//! Human-driven traffic: IDM car following, Euler stepping and
//! constant-velocity cell forecasts for the planner.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::MovingGrid;
use crate::planner::{HvForecast, HvTrack, LaneEvent};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrafficError {
    #[error("time step must be positive, got {0}")]
    NonPositiveStep(f64),
    #[error("vehicle {id} at y = {y} is not in any lane")]
    OffLane { id: usize, y: f64 },
    #[error("invalid IDM parameter: {0}")]
    BadParams(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VehicleKind {
    Cav,
    Hv,
}

impl VehicleKind {
    pub fn as_str(self) -> &'static str {
        match self {
            VehicleKind::Cav => "cav",
            VehicleKind::Hv => "hv",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState<T> {
    pub id: usize,
    pub kind: VehicleKind,
    pub s: T,
    pub y: T,
    pub v: T,
    pub a: T,
    /// 1-based lane (grid column).
    pub lane: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdmParams<T> {
    pub v0: T,
    #[serde(rename = "time_headway")]
    pub t: T,
    pub a_max: T,
    pub b: T,
    pub s0_jam: T,
    pub delta_exp: T,
}

impl<T: Real> Default for IdmParams<T> {
    fn default() -> Self {
        Self {
            v0: T::lit(17.5),
            t: T::lit(1.2),
            a_max: T::lit(1.4),
            b: T::lit(2.0),
            s0_jam: T::lit(2.0),
            delta_exp: T::lit(4.0),
        }
    }
}

impl<T: Real> IdmParams<T> {
    pub fn validate(&self) -> Result<(), TrafficError> {
        let pos = |x: T| x > T::zero();
        if !pos(self.v0) || !pos(self.t) || !pos(self.a_max) || !pos(self.b) || !pos(self.s0_jam) {
            return Err(TrafficError::BadParams("v0, T, a_max, b and s0_jam must be positive"));
        }
        if !(self.delta_exp >= T::one()) {
            return Err(TrafficError::BadParams("acceleration exponent must be at least 1"));
        }
        Ok(())
    }

    /// Desired dynamic gap `s*` for speed `v` closing at `dv` on the leader.
    pub fn desired_gap(&self, v: T, dv: T) -> T {
        let two = T::lit(2.0);
        let dynamic = v * self.t + v * dv / (two * (self.a_max * self.b).sqrt());
        self.s0_jam + dynamic.max(T::zero())
    }

    /// Bumper gap at which a vehicle at speed `v` behind an equally fast
    /// leader neither accelerates nor brakes.
    pub fn equilibrium_gap(&self, v: T) -> T {
        let free = T::one() - (v / self.v0).powf(self.delta_exp);
        self.desired_gap(v, T::zero()) / free.sqrt()
    }
}

/// Vehicle length and the simulation's acceleration range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kinematics<T> {
    pub length: T,
    pub a_min: T,
    pub a_max: T,
}

impl<T: Real> Default for Kinematics<T> {
    fn default() -> Self {
        Self {
            length: T::lit(5.0),
            a_min: T::lit(-4.0),
            a_max: T::lit(3.0),
        }
    }
}

/// IDM acceleration of `ego` behind an optional `leader` in the same lane.
///
/// A non-positive bumper gap returns the braking bound.
pub fn idm_accel<T: Real>(
    ego: &VehicleState<T>,
    leader: Option<&VehicleState<T>>,
    p: &IdmParams<T>,
    kin: &Kinematics<T>,
) -> T {
    let free = p.a_max * (T::one() - (ego.v.max(T::zero()) / p.v0).powf(p.delta_exp));
    let a = match leader {
        None => free,
        Some(l) => {
            let gap = l.s - ego.s - kin.length;
            if !(gap > T::zero()) {
                return kin.a_min;
            }
            let ratio = p.desired_gap(ego.v, ego.v - l.v) / gap;
            free - p.a_max * ratio * ratio
        }
    };
    a.max(kin.a_min).min(kin.a_max)
}

/// Advances a lane-keeping vehicle by `dt` under acceleration `accel`.
///
/// Speed never drops below zero; position uses the mean of the old and new
/// speed, so a vehicle that stops inside the step travels only until it stops
/// in the linear-speed sense.
pub fn step_hv<T: Real>(state: &VehicleState<T>, accel: T, dt: T) -> Result<VehicleState<T>, TrafficError> {
    if !(dt > T::zero()) {
        return Err(TrafficError::NonPositiveStep(dt.to_f64_lossy()));
    }
    let v = (state.v + accel * dt).max(T::zero());
    let s = state.s + (state.v + v) / T::lit(2.0) * dt;
    Ok(VehicleState {
        s,
        v,
        a: (v - state.v) / dt,
        ..*state
    })
}

/// Nearest vehicle strictly ahead of `ego` in its lane.
pub fn leader_of<'a, T: Real>(ego: &VehicleState<T>, all: &'a [VehicleState<T>]) -> Option<&'a VehicleState<T>> {
    all.iter()
        .filter(|o| o.id != ego.id && o.lane == ego.lane && o.s > ego.s)
        .min_by(|a, b| a.s.partial_cmp(&b.s).unwrap_or(std::cmp::Ordering::Equal))
}

/// How detections are reported while building a forecast.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DetectionRule {
    /// Column the platoon travels in; HVs elsewhere are candidates.
    pub platoon_col: usize,
    /// Id of the HV being overtaken, if any.
    pub front_hv_id: Option<usize>,
    /// Detections are only reported while overtaking.
    pub enabled: bool,
}

/// Constant-velocity HV forecast over `n_steps` behavior steps.
///
/// Step `k` is evaluated at `grid.t0 + (k - 1) dt_b`, with each HV's state
/// taken at `grid.t0`. An HV yields a lane event at the first step it is in
/// the grid, provided it is then the foremost HV of a non-platoon lane.
pub fn forecast_cells<T: Real>(
    hvs: &[VehicleState<T>],
    grid: &MovingGrid<T>,
    n_steps: usize,
    dt_b: T,
    rule: DetectionRule,
) -> Result<HvForecast, TrafficError> {
    let mut forecast = HvForecast::empty(n_steps);
    for hv in hvs.iter().filter(|h| h.kind == VehicleKind::Hv) {
        let col = grid.lane_of(hv.y).ok_or(TrafficError::OffLane {
            id: hv.id,
            y: hv.y.to_f64_lossy(),
        })?;
        let cells: Vec<_> = (1..=n_steps)
            .map(|k| {
                let dt = T::from_usize_lossy(k - 1) * dt_b;
                let s = hv.s + hv.v * dt;
                grid.world_to_cell(grid.t0 + dt, s, hv.y).ok().inspect(|c| debug_assert_eq!(c.col, col))
            })
            .collect();
        if cells.iter().all(Option::is_none) {
            continue;
        }
        if Some(hv.id) == rule.front_hv_id {
            forecast.front_hv = Some(forecast.hvs.len());
        }
        forecast.hvs.push(HvTrack { id: hv.id, cells });
    }

    if rule.enabled {
        for (j, track) in forecast.hvs.iter().enumerate() {
            let Some((k0, cell)) = track.cells.iter().enumerate().find_map(|(k0, c)| c.map(|c| (k0, c))) else {
                continue;
            };
            if cell.col == rule.platoon_col || Some(j) == forecast.front_hv {
                continue;
            }
            let foremost = forecast.hvs.iter().all(|o| match o.cells[k0] {
                Some(oc) if oc.col == cell.col => oc.row <= cell.row,
                _ => true,
            });
            if foremost {
                forecast.detected_lane_events.push(LaneEvent {
                    k: k0 + 1,
                    hv: j,
                    col: cell.col,
                    row: cell.row,
                });
            }
        }
    }
    Ok(forecast)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{centered_lanes, CellIndex};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn hv(id: usize, s: f64, v: f64, lane: usize) -> VehicleState<f64> {
        VehicleState { id, kind: VehicleKind::Hv, s, y: centered_lanes(3, 3.0)[lane - 1], v, a: 0.0, lane }
    }

    #[test]
    fn free_road_limits() {
        let p = IdmParams::default();
        let k = Kinematics::default();
        assert_abs_diff_eq!(idm_accel(&hv(0, 0.0, 17.5, 2), None, &p, &k), 0.0);
        assert_abs_diff_eq!(idm_accel(&hv(0, 0.0, 0.0, 2), None, &p, &k), p.a_max);
    }

    #[test]
    fn equilibrium_gap_is_stationary() {
        // Solve a(gap) = 0 by bisection, independently of the closed form.
        let p = IdmParams { v0: 30.0, ..IdmParams::default() };
        let k = Kinematics::default();
        let v = 17.5;
        let accel = |gap: f64| idm_accel(&hv(0, 0.0, v, 2), Some(&hv(1, gap + k.length, v, 2)), &p, &k);
        let (mut lo, mut hi) = (1.0, 500.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if accel(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let gap = 0.5 * (lo + hi);
        assert_abs_diff_eq!(gap, p.equilibrium_gap(v), epsilon = 1e-9);
        assert_abs_diff_eq!(accel(p.equilibrium_gap(v)), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn overlapping_leader_brakes_hard() {
        let k = Kinematics::default();
        let a = idm_accel(&hv(0, 0.0, 10.0, 2), Some(&hv(1, 4.0, 10.0, 2)), &IdmParams::default(), &k);
        assert_eq!(a, k.a_min);
    }

    #[test]
    fn stepping() {
        let s = hv(0, 10.0, 15.0, 2);
        let n = step_hv(&s, 0.0, 2.0).unwrap();
        assert_abs_diff_eq!(n.s, 40.0);
        assert_abs_diff_eq!(n.v, 15.0);

        let n = step_hv(&hv(0, 0.0, 1.0, 1), -4.0, 0.5).unwrap();
        assert_eq!(n.v, 0.0);
        assert_abs_diff_eq!(n.s, 0.25);
        assert_eq!((n.lane, n.y), (1, -3.0));

        assert!(matches!(step_hv(&s, 0.0, 0.0), Err(TrafficError::NonPositiveStep(_))));
    }

    fn grid() -> MovingGrid<f64> {
        MovingGrid::new(0.0, 0.0, 17.5, 14, 10.0, 3.0, centered_lanes(3, 3.0)).unwrap()
    }

    fn rule() -> DetectionRule {
        DetectionRule { platoon_col: 2, front_hv_id: Some(0), enabled: true }
    }

    #[test]
    fn co_moving_hv_keeps_its_cell() {
        let f = forecast_cells(&[hv(0, 85.0, 17.5, 2)], &grid(), 6, 3.0, rule()).unwrap();
        assert!(f.hvs[0].cells.iter().all(|c| *c == Some(CellIndex::new(9, 2))));
        assert_eq!(f.front_hv, Some(0));
        assert!(f.detected_lane_events.is_empty());
    }

    #[test]
    fn slower_hv_drifts_back() {
        // 7.5 m per step against 10 m cells.
        let f = forecast_cells(&[hv(3, 99.0, 15.0, 1)], &grid(), 5, 3.0, rule()).unwrap();
        let rows: Vec<_> = f.hvs[0].cells.iter().map(|c| c.unwrap().row).collect();
        assert_eq!(rows, vec![10, 10, 9, 8, 7]);
        assert_eq!(f.detected_lane_events, vec![LaneEvent { k: 1, hv: 0, col: 1, row: 10 }]);
    }

    #[test]
    fn only_the_foremost_side_hv_is_detected() {
        let hvs = [hv(0, 85.0, 17.5, 2), hv(1, 60.0, 17.5, 1), hv(2, 35.0, 17.5, 1), hv(3, 50.0, 17.5, 3)];
        let f = forecast_cells(&hvs, &grid(), 3, 3.0, rule()).unwrap();
        let ids: Vec<_> = f.detected_lane_events.iter().map(|e| f.hvs[e.hv].id).collect();
        assert_eq!(ids, vec![1, 3]);
        let off = DetectionRule { enabled: false, ..rule() };
        assert!(forecast_cells(&hvs, &grid(), 3, 3.0, off).unwrap().detected_lane_events.is_empty());
    }

    #[test]
    fn off_lane_hv_is_an_error() {
        let mut h = hv(4, 10.0, 17.5, 1);
        h.y = 20.0;
        assert!(matches!(forecast_cells(&[h], &grid(), 2, 3.0, rule()), Err(TrafficError::OffLane { id: 4, .. })));
    }

    #[test]
    fn no_collisions_in_a_seeded_stream() {
        let p = IdmParams::default();
        let k = Kinematics::default();
        let mut cars: Vec<_> = (0..6).map(|i| hv(i, 200.0 - 25.0 * i as f64, 17.5, 1)).collect();
        cars[0].v = 12.0;
        let dt = 0.03;
        for _ in 0..4000 {
            let acc: Vec<_> = cars.iter().map(|c| idm_accel(c, leader_of(c, &cars), &p, &k)).collect();
            cars = cars.iter().zip(&acc).map(|(c, &a)| step_hv(c, a, dt).unwrap()).collect();
            for w in cars.windows(2) {
                assert!(w[0].s - w[1].s > k.length);
            }
        }
    }

    proptest! {
        #[test]
        fn forecast_at_one_step_is_current_cell(s in 0.5f64..139.5, lane in 1usize..=3, v in 0.0f64..30.0) {
            let f = forecast_cells(&[hv(0, s, v, lane)], &grid(), 1, 3.0, rule()).unwrap();
            prop_assert_eq!(f.hvs[0].cells[0], Some(grid().world_to_cell(0.0, s, centered_lanes(3, 3.0)[lane - 1]).unwrap()));
        }

        #[test]
        fn idm_monotone(v in 0.0f64..30.0, gap in 3.0f64..150.0, dv in -3.0f64..5.0, dvv in 0.01f64..3.0, dg in 0.01f64..10.0) {
            let p = IdmParams::default();
            let k = Kinematics { a_min: -1e9, a_max: 1e9, ..Kinematics::default() };
            let at = |v: f64, gap: f64| {
                idm_accel(&hv(0, 0.0, v, 2), Some(&hv(1, gap + k.length, v - dv, 2)), &p, &k)
            };
            prop_assert!(at(v + dvv, gap) <= at(v, gap) + 1e-12);
            prop_assert!(at(v, gap + dg) >= at(v, gap) - 1e-12);
        }
    }
}
