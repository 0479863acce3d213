//! Moving cell lattice laid over the road segment.
//!
//! Rows are numbered 1-based from the rear (row 1 starts at the tail CAV) to
//! the front (row `n_rows`); columns are lanes, numbered 1-based in order of
//! increasing lateral position. The whole lattice translates at `v_cell`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid needs at least one lane")]
    NoLanes,
    #[error("grid needs at least one row")]
    NoRows,
    #[error("cell length must be positive, got {0}")]
    BadCellLength(f64),
    #[error("cell width must be positive, got {0}")]
    BadCellWidth(f64),
    #[error("grid speed must be non-negative, got {0}")]
    NegativeSpeed(f64),
    #[error("lane centers must have one entry per column and be strictly increasing")]
    BadLaneCenters,
    #[error("front HV at {front:.3} m is not ahead of the tail CAV at {tail:.3} m")]
    FrontBehindTail { front: f64, tail: f64 },
    #[error("position s={s:.3} y={y:.3} at t={t:.3} lies outside the grid")]
    OutOfGrid { t: f64, s: f64, y: f64 },
    #[error("cell ({row}, {col}) outside a {n_rows}x{n_cols} grid")]
    CellOutOfBounds {
        row: usize,
        col: usize,
        n_rows: usize,
        n_cols: usize,
    },
}

/// A cell address. Both indices are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellIndex {
    pub row: usize,
    pub col: usize,
}

impl CellIndex {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }
}

impl std::fmt::Display for CellIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{})", self.row, self.col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridMode {
    Overtaking,
    Cruising,
}

/// Everything needed to lay a grid over the current scene.
#[derive(Debug, Clone, PartialEq)]
pub struct GriddingInputs<T> {
    pub t0: T,
    /// Rear edge of the tail CAV's cell.
    pub tail_cav_s: T,
    pub lane_count: usize,
    pub lane_width: T,
    pub cav_count: usize,
    pub front_hv_s: T,
    pub front_hv_v: T,
    pub cav_length: T,
    pub safe_distance: T,
    pub mode: GridMode,
    pub cruise_speed: T,
    /// Forces the cell length instead of `cav_length + safe_distance`.
    pub cell_length_override: Option<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MovingGrid<T> {
    pub t0: T,
    pub s0: T,
    pub v_cell: T,
    pub n_rows: usize,
    pub n_cols: usize,
    pub l_cell: T,
    pub w_cell: T,
    pub lane_y: Vec<T>,
}

/// Lane centerlines for `count` lanes of width `width`, centered on the middle lane.
pub fn centered_lanes<T: Real>(count: usize, width: T) -> Vec<T> {
    let mid = T::from_usize_lossy(count + 1) / T::lit(2.0);
    (1..=count)
        .map(|q| (T::from_usize_lossy(q) - mid) * width)
        .collect()
}

impl<T> MovingGrid<T> {
    pub fn contains(&self, cell: CellIndex) -> bool {
        (1..=self.n_rows).contains(&cell.row) && (1..=self.n_cols).contains(&cell.col)
    }

    pub fn check(&self, cell: CellIndex) -> Result<(), GridError> {
        if self.contains(cell) {
            Ok(())
        } else {
            Err(GridError::CellOutOfBounds {
                row: cell.row,
                col: cell.col,
                n_rows: self.n_rows,
                n_cols: self.n_cols,
            })
        }
    }
}

impl<T: Real> MovingGrid<T> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        t0: T,
        s0: T,
        v_cell: T,
        n_rows: usize,
        l_cell: T,
        w_cell: T,
        lane_y: Vec<T>,
    ) -> Result<Self, GridError> {
        if lane_y.is_empty() {
            return Err(GridError::NoLanes);
        }
        if n_rows == 0 {
            return Err(GridError::NoRows);
        }
        if !(l_cell > T::zero()) {
            return Err(GridError::BadCellLength(l_cell.to_f64_lossy()));
        }
        if !(w_cell > T::zero()) {
            return Err(GridError::BadCellWidth(w_cell.to_f64_lossy()));
        }
        if !(v_cell >= T::zero()) {
            return Err(GridError::NegativeSpeed(v_cell.to_f64_lossy()));
        }
        if lane_y.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(GridError::BadLaneCenters);
        }
        Ok(Self {
            t0,
            s0,
            v_cell,
            n_rows,
            n_cols: lane_y.len(),
            l_cell,
            w_cell,
            lane_y,
        })
    }

    /// Rear edge of row 1 at absolute time `t`.
    pub fn origin_at(&self, t: T) -> T {
        self.s0 + self.v_cell * (t - self.t0)
    }

    /// Column whose centerline is nearest to `y`, if `y` lies within half a
    /// cell width of it.
    pub fn lane_of(&self, y: T) -> Option<usize> {
        let half = self.w_cell / T::lit(2.0);
        let (idx, dist) = self
            .lane_y
            .iter()
            .enumerate()
            .map(|(i, &c)| (i, (y - c).abs()))
            .fold((0, T::infinity()), |best, cur| if cur.1 < best.1 { cur } else { best });
        (dist <= half).then_some(idx + 1)
    }

    pub fn world_to_cell(&self, t: T, s: T, y: T) -> Result<CellIndex, GridError> {
        let out = || GridError::OutOfGrid {
            t: t.to_f64_lossy(),
            s: s.to_f64_lossy(),
            y: y.to_f64_lossy(),
        };
        let rel = (s - self.origin_at(t)) / self.l_cell;
        if !(rel >= T::zero()) || rel >= T::from_usize_lossy(self.n_rows) {
            return Err(out());
        }
        let row = rel.floor().to_usize().ok_or_else(out)? + 1;
        let col = self.lane_of(y).ok_or_else(out)?;
        Ok(CellIndex { row, col })
    }

    /// World position of the center of `cell` after `k` behavior steps of length `dt_b`.
    pub fn cell_to_world(&self, k: usize, cell: CellIndex, dt_b: T) -> Result<(T, T, T), GridError> {
        self.check(cell)?;
        let elapsed = T::from_usize_lossy(k) * dt_b;
        let t = self.t0 + elapsed;
        let s = self.s0
            + self.v_cell * elapsed
            + self.l_cell / T::lit(2.0)
            + T::from_usize_lossy(cell.row - 1) * self.l_cell;
        Ok((t, s, self.lane_y[cell.col - 1]))
    }
}

/// Lays the grid over the scene: origin at the tail, cell length from vehicle
/// length plus safety distance, one column per lane, rows covering the platoon
/// and the space up to the front HV, speed from the front HV (overtaking) or
/// the cruise speed.
pub fn build_grid<T: Real>(inputs: &GriddingInputs<T>) -> Result<MovingGrid<T>, GridError> {
    if inputs.lane_count == 0 {
        return Err(GridError::NoLanes);
    }
    let l_cell = inputs
        .cell_length_override
        .unwrap_or(inputs.cav_length + inputs.safe_distance);
    if !(l_cell > T::zero()) {
        return Err(GridError::BadCellLength(l_cell.to_f64_lossy()));
    }
    let (n_rows, v_cell) = match inputs.mode {
        GridMode::Overtaking => {
            let span = inputs.front_hv_s - inputs.tail_cav_s;
            if !(span > T::zero()) {
                return Err(GridError::FrontBehindTail {
                    front: inputs.front_hv_s.to_f64_lossy(),
                    tail: inputs.tail_cav_s.to_f64_lossy(),
                });
            }
            let between = (span / l_cell).ceil().to_usize().unwrap_or(0);
            (inputs.cav_count + between, inputs.front_hv_v)
        }
        GridMode::Cruising => (inputs.cav_count, inputs.cruise_speed),
    };
    MovingGrid::new(
        inputs.t0,
        inputs.tail_cav_s,
        v_cell,
        n_rows,
        l_cell,
        inputs.lane_width,
        centered_lanes(inputs.lane_count, inputs.lane_width),
    )
}
