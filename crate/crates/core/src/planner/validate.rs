//! Direct re-check of a decoded plan against the movement, collision,
//! space-making and initial-condition rules, without going through the
//! linearized program.

use std::fmt;

use serde::Serialize;

use super::forecast::HvForecast;
use super::program::{block_assignments, Family};
use crate::grid::{CellIndex, MovingGrid};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub family: Family,
    pub cav: usize,
    /// The other CAV or HV involved, if any.
    pub other: Option<usize>,
    pub k: usize,
    pub cell: CellIndex,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: CAV {} at step {} in cell {}", self.family, self.cav + 1, self.k, self.cell)?;
        if let Some(o) = self.other {
            write!(f, " (with {})", o)?;
        }
        Ok(())
    }
}

pub fn validate_plan<T>(
    cells: &[Vec<CellIndex>],
    grid: &MovingGrid<T>,
    forecast: &HvForecast,
    init_cells: &[CellIndex],
) -> Vec<Violation> {
    let mut out = Vec::new();
    let n_steps = cells.iter().map(Vec::len).min().unwrap_or(0);
    let v = |family, cav, other, k, cell| Violation { family, cav, other, k, cell };

    if cells.len() != init_cells.len() || cells.iter().any(|s| s.len() != n_steps) {
        out.push(v(Family::OneRow, 0, None, 0, CellIndex::new(0, 0)));
        return out;
    }

    for (i, seq) in cells.iter().enumerate() {
        for (k0, &c) in seq.iter().enumerate() {
            if !(1..=grid.n_rows).contains(&c.row) {
                out.push(v(Family::OneRow, i, None, k0 + 1, c));
            }
            if !(1..=grid.n_cols).contains(&c.col) {
                out.push(v(Family::OneColumn, i, None, k0 + 1, c));
            }
        }
        if let (Some(&first), Some(&init)) = (seq.first(), init_cells.get(i)) {
            if first.row != init.row {
                out.push(v(Family::InitialRow, i, None, 1, first));
            }
            if first.col != init.col {
                out.push(v(Family::InitialColumn, i, None, 1, first));
            }
        }
        for (k0, w) in seq.windows(2).enumerate() {
            let (a, b) = (w[0], w[1]);
            let dr = a.row.abs_diff(b.row);
            let dc = a.col.abs_diff(b.col);
            if dr >= 2 {
                out.push(v(Family::RowJump, i, None, k0 + 2, b));
            }
            if dc >= 2 {
                out.push(v(Family::ColumnJump, i, None, k0 + 2, b));
            }
            if dr == 1 && dc == 1 {
                out.push(v(Family::Cornerwise, i, None, k0 + 2, b));
            }
        }
    }

    for k in 2..=n_steps {
        for i1 in 0..cells.len() {
            for i2 in (i1 + 1)..cells.len() {
                if cells[i1][k - 1] == cells[i2][k - 1] {
                    out.push(v(Family::CavCollision, i1, Some(i2), k, cells[i1][k - 1]));
                }
            }
            for (j, hv) in forecast.occupied_at(k) {
                if cells[i1][k - 1] == hv {
                    out.push(v(Family::HvExclusion, i1, Some(j), k, hv));
                }
            }
        }
    }

    if let Ok(assignments) = block_assignments(forecast, init_cells, n_steps) {
        for a in assignments {
            let next = a.k + 1;
            let here = cells[a.cav][a.k - 1];
            let there = cells[a.cav][next - 1];
            if there.col != a.target_col {
                out.push(v(Family::SpaceMakingLane, a.cav, Some(a.hv), next, there));
            }
            let (lo, hi) = (a.hv_row.min(here.row), a.hv_row.max(here.row));
            if !(lo..=hi).contains(&there.row) {
                out.push(v(Family::SpaceMakingBand, a.cav, Some(a.hv), next, there));
            }
        }
    }
    out
}
