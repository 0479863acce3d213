//! The linearized 0-1 maneuver program.
//!
//! Variables are the occupancy binaries `r[i][k][p]` (CAV `i` in row `p` at
//! step `k`) and `c[i][k][q]` (CAV `i` in column `q`), followed by one
//! auxiliary binary per consecutive-step difference. Every quadratic cost term
//! is rewritten linearly:
//!
//! * `r^2 = r` for a binary `r`;
//! * `(x' - x)^2 = |x' - x|` for binaries, carried by an auxiliary `d` with
//!   `d >= x' - x` and `d >= x - x'` and a non-negative objective weight;
//! * the regrouping penalty `(l_index - column)^2` with a one-hot column
//!   vector equals `sum_q (l_index - q)^2 c_q`.

use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use super::error::PlannerError;
use super::forecast::HvForecast;
use crate::grid::{CellIndex, MovingGrid};
use crate::scalar::Weight;

pub type VarId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// One row per CAV and step.
    OneRow,
    /// One column per CAV and step.
    OneColumn,
    /// No jump across non-adjacent rows.
    RowJump,
    /// No jump across non-adjacent columns.
    ColumnJump,
    /// No diagonal moves.
    Cornerwise,
    /// No two CAVs in one cell.
    CavCollision,
    /// No CAV in a forecast HV cell.
    HvExclusion,
    /// Blocking CAV moves into the detected HV's lane.
    SpaceMakingLane,
    /// Blocking CAV stays between the detected HV and its own row.
    SpaceMakingBand,
    InitialRow,
    InitialColumn,
    /// Links a difference auxiliary to its two occupancy variables.
    AbsDiff,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Family::OneRow => "one-row occupancy",
            Family::OneColumn => "one-column occupancy",
            Family::RowJump => "non-adjacent row move",
            Family::ColumnJump => "non-adjacent column move",
            Family::Cornerwise => "cornerwise move",
            Family::CavCollision => "CAV-CAV collision",
            Family::HvExclusion => "CAV-HV exclusion",
            Family::SpaceMakingLane => "space-making lane",
            Family::SpaceMakingBand => "space-making row band",
            Family::InitialRow => "initial row",
            Family::InitialColumn => "initial column",
            Family::AbsDiff => "difference linking",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Constraint {
    pub family: Family,
    pub terms: Vec<(VarId, i64)>,
    pub sense: Sense,
    pub rhs: i64,
}

impl Constraint {
    pub fn is_satisfied_by(&self, value: impl Fn(VarId) -> i64) -> bool {
        let lhs: i64 = self.terms.iter().map(|&(v, a)| a * value(v)).sum();
        match self.sense {
            Sense::Le => lhs <= self.rhs,
            Sense::Eq => lhs == self.rhs,
            Sense::Ge => lhs >= self.rhs,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarMeta {
    Row { cav: usize, k: usize, p: usize },
    Col { cav: usize, k: usize, q: usize },
    /// `|a - b|`, both occupancy variables.
    AbsDiff { a: VarId, b: VarId },
}

/// Index arithmetic for the occupancy block of the variable vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub n_cav: usize,
    pub n_steps: usize,
    pub n_rows: usize,
    pub n_cols: usize,
}

impl Layout {
    fn slot_width(&self) -> usize {
        self.n_rows + self.n_cols
    }

    /// Slots run step-major: all CAVs at step 1, then step 2, and so on.
    fn slot_base(&self, cav: usize, k: usize) -> usize {
        ((k - 1) * self.n_cav + cav) * self.slot_width()
    }

    pub fn row_var(&self, cav: usize, k: usize, p: usize) -> VarId {
        self.slot_base(cav, k) + (p - 1)
    }

    pub fn col_var(&self, cav: usize, k: usize, q: usize) -> VarId {
        self.slot_base(cav, k) + self.n_rows + (q - 1)
    }

    pub fn occupancy_vars(&self) -> usize {
        self.n_cav * self.n_steps * self.slot_width()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerWeights<W> {
    pub w_tar: W,
    pub w_lon: W,
    pub w_lat: W,
    /// Regrouping lane (1-based column).
    pub l_index: usize,
    /// True while some CAV is still impeded by the front HV.
    pub delta: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinaryProgram<W> {
    pub layout: Layout,
    pub vars: Vec<VarMeta>,
    pub objective: Vec<W>,
    pub rows: Vec<Constraint>,
}

/// A CAV chosen to block a detected HV.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockAssignment {
    pub k: usize,
    pub cav: usize,
    pub hv: usize,
    pub target_col: usize,
    pub hv_row: usize,
    /// Row of the CAV used as the other end of the band.
    pub cav_row: usize,
}

/// 1 iff some CAV sits in the front HV's column at or behind its row at the
/// start of the episode.
pub fn compute_delta(init_cells: &[CellIndex], forecast: &HvForecast) -> Result<bool, PlannerError> {
    let front = forecast.front_hv.ok_or(PlannerError::NoFrontHv)?;
    let hv = forecast.cell_at(front, 1).ok_or(PlannerError::NoFrontHv)?;
    Ok(init_cells
        .iter()
        .any(|c| c.col == hv.col && c.row <= hv.row))
}

/// Detection flag for step `k` and the blocking assignments it triggers.
///
/// Detected HVs are taken foremost first and each is paired with the
/// foremost CAV not yet assigned at this step; `cav_cells` gives the CAV
/// positions used for that ordering.
pub fn compute_epsilon(
    forecast: &HvForecast,
    k: usize,
    cav_cells: &[CellIndex],
) -> Result<(bool, Vec<BlockAssignment>), PlannerError> {
    if k == 0 || k > forecast.steps {
        return Err(PlannerError::StepOutOfHorizon {
            k,
            steps: forecast.steps,
        });
    }
    let mut events: Vec<_> = forecast.events_at(k).copied().collect();
    if events.is_empty() {
        return Ok((false, Vec::new()));
    }
    if events.len() > cav_cells.len() {
        return Err(PlannerError::TooManyDetections {
            k,
            hvs: events.len(),
            cavs: cav_cells.len(),
        });
    }
    events.sort_by(|a, b| b.row.cmp(&a.row).then(a.col.cmp(&b.col)).then(a.hv.cmp(&b.hv)));
    let mut cavs: Vec<usize> = (0..cav_cells.len()).collect();
    cavs.sort_by(|&a, &b| {
        cav_cells[b]
            .row
            .cmp(&cav_cells[a].row)
            .then(cav_cells[a].col.cmp(&cav_cells[b].col))
            .then(a.cmp(&b))
    });
    let assignments = events
        .iter()
        .zip(cavs)
        .map(|(e, cav)| BlockAssignment {
            k,
            cav,
            hv: e.hv,
            target_col: e.col,
            hv_row: e.row,
            cav_row: cav_cells[cav].row,
        })
        .collect();
    Ok((true, assignments))
}

/// Blocking assignments over the whole horizon, ordered by step.
pub fn block_assignments(
    forecast: &HvForecast,
    init_cells: &[CellIndex],
    n_steps: usize,
) -> Result<Vec<BlockAssignment>, PlannerError> {
    let mut out = Vec::new();
    for k in 1..n_steps {
        out.extend(compute_epsilon(forecast, k, init_cells)?.1);
    }
    Ok(out)
}

/// Squared column distance to the regrouping lane.
fn regroup_penalty<W: Weight>(l_index: usize, q: usize) -> W {
    let d = l_index.abs_diff(q);
    W::from_count(d * d)
}

pub fn build_program<W: Weight, T>(
    grid: &MovingGrid<T>,
    init_cells: &[CellIndex],
    forecast: &HvForecast,
    weights: &PlannerWeights<W>,
    n_steps: usize,
) -> Result<BinaryProgram<W>, PlannerError> {
    let profile = vec![weights.delta; n_steps];
    build_program_with_delta(grid, init_cells, forecast, weights, &profile, n_steps)
}

/// Like [`build_program`], with the impeded indicator given per step:
/// `delta_by_step[k - 1]` gates the lateral terms of step `k` (the move
/// `k -> k+1` and the regrouping penalty at `k`).
pub fn build_program_with_delta<W: Weight, T>(
    grid: &MovingGrid<T>,
    init_cells: &[CellIndex],
    forecast: &HvForecast,
    weights: &PlannerWeights<W>,
    delta_by_step: &[bool],
    n_steps: usize,
) -> Result<BinaryProgram<W>, PlannerError> {
    let n_rows = grid.n_rows;
    let n_cols = grid.n_cols;
    if n_steps < 2 {
        return Err(PlannerError::HorizonTooShort(n_steps));
    }
    if forecast.steps < n_steps {
        return Err(PlannerError::ForecastTooShort {
            got: forecast.steps,
            need: n_steps,
        });
    }
    if !(1..=n_cols).contains(&weights.l_index) {
        return Err(PlannerError::LaneIndexOutOfRange {
            l_index: weights.l_index,
            n_cols,
        });
    }
    if delta_by_step.len() != n_steps {
        return Err(PlannerError::DeltaProfileLength {
            got: delta_by_step.len(),
            need: n_steps,
        });
    }
    let zero = W::zero();
    if weights.w_tar < zero || weights.w_lon < zero || weights.w_lat < zero {
        return Err(PlannerError::NegativeWeight);
    }
    for (i, c) in init_cells.iter().enumerate() {
        if !grid.contains(*c) {
            return Err(PlannerError::InitialOutOfGrid { cav: i, cell: *c });
        }
        if let Some(j) = init_cells[..i].iter().position(|o| o == c) {
            return Err(PlannerError::InitialCollision { a: j, b: i, cell: *c });
        }
    }

    let layout = Layout {
        n_cav: init_cells.len(),
        n_steps,
        n_rows,
        n_cols,
    };
    let mut vars = Vec::with_capacity(layout.occupancy_vars());
    for k in 1..=n_steps {
        for cav in 0..layout.n_cav {
            vars.extend((1..=n_rows).map(|p| VarMeta::Row { cav, k, p }));
            vars.extend((1..=n_cols).map(|q| VarMeta::Col { cav, k, q }));
        }
    }
    let mut objective = vec![zero; vars.len()];
    let mut rows = Vec::new();
    let n_cav = layout.n_cav;
    let target_rows = n_rows.saturating_sub(n_cav);

    // Objective: forward target and regrouping terms on occupancy variables.
    for cav in 0..n_cav {
        for k in 1..=n_steps {
            for p in 1..=target_rows {
                objective[layout.row_var(cav, k, p)] = weights.w_tar;
            }
            if !delta_by_step[k - 1] {
                for q in 1..=n_cols {
                    objective[layout.col_var(cav, k, q)] =
                        weights.w_lat * regroup_penalty::<W>(weights.l_index, q);
                }
            }
        }
    }

    // Movement costs through difference auxiliaries.
    let add_diff = |vars: &mut Vec<VarMeta>, objective: &mut Vec<W>, rows: &mut Vec<Constraint>, a, b, w| {
        let d = vars.len();
        vars.push(VarMeta::AbsDiff { a, b });
        objective.push(w);
        rows.push(Constraint {
            family: Family::AbsDiff,
            terms: vec![(d, 1), (b, -1), (a, 1)],
            sense: Sense::Ge,
            rhs: 0,
        });
        rows.push(Constraint {
            family: Family::AbsDiff,
            terms: vec![(d, 1), (b, 1), (a, -1)],
            sense: Sense::Ge,
            rhs: 0,
        });
    };
    for cav in 0..n_cav {
        for k in 1..n_steps {
            for p in 1..=n_rows {
                let (a, b) = (layout.row_var(cav, k, p), layout.row_var(cav, k + 1, p));
                add_diff(&mut vars, &mut objective, &mut rows, a, b, weights.w_lon);
            }
            let w = if delta_by_step[k - 1] { weights.w_lat } else { zero };
            for q in 1..=n_cols {
                let (a, b) = (layout.col_var(cav, k, q), layout.col_var(cav, k + 1, q));
                add_diff(&mut vars, &mut objective, &mut rows, a, b, w);
            }
        }
    }

    // One cell per CAV and step.
    for cav in 0..n_cav {
        for k in 1..=n_steps {
            rows.push(Constraint {
                family: Family::OneRow,
                terms: (1..=n_rows).map(|p| (layout.row_var(cav, k, p), 1)).collect(),
                sense: Sense::Eq,
                rhs: 1,
            });
            rows.push(Constraint {
                family: Family::OneColumn,
                terms: (1..=n_cols).map(|q| (layout.col_var(cav, k, q), 1)).collect(),
                sense: Sense::Eq,
                rhs: 1,
            });
        }
    }

    // Moves: adjacent rows/columns only, never diagonal.
    for cav in 0..n_cav {
        for k in 1..n_steps {
            for p1 in 1..=n_rows {
                for p2 in 1..=n_rows {
                    if p1.abs_diff(p2) >= 2 {
                        rows.push(Constraint {
                            family: Family::RowJump,
                            terms: vec![(layout.row_var(cav, k, p1), 1), (layout.row_var(cav, k + 1, p2), 1)],
                            sense: Sense::Le,
                            rhs: 1,
                        });
                    }
                }
            }
            for q1 in 1..=n_cols {
                for q2 in 1..=n_cols {
                    if q1.abs_diff(q2) >= 2 {
                        rows.push(Constraint {
                            family: Family::ColumnJump,
                            terms: vec![(layout.col_var(cav, k, q1), 1), (layout.col_var(cav, k + 1, q2), 1)],
                            sense: Sense::Le,
                            rhs: 1,
                        });
                    }
                }
            }
            for p in 1..n_rows {
                for q in 1..n_cols {
                    let r = |kk, pp| layout.row_var(cav, kk, pp);
                    let c = |kk, qq| layout.col_var(cav, kk, qq);
                    let corners = [
                        [r(k, p), r(k + 1, p + 1), c(k, q), c(k + 1, q + 1)],
                        [r(k, p + 1), r(k + 1, p), c(k, q + 1), c(k + 1, q)],
                        [r(k, p + 1), r(k + 1, p), c(k, q), c(k + 1, q + 1)],
                        [r(k, p), r(k + 1, p + 1), c(k, q + 1), c(k + 1, q)],
                    ];
                    for vs in corners {
                        rows.push(Constraint {
                            family: Family::Cornerwise,
                            terms: vs.iter().map(|&v| (v, 1)).collect(),
                            sense: Sense::Le,
                            rhs: 3,
                        });
                    }
                }
            }
        }
    }

    // Collisions among CAVs and with forecast HVs.
    for k in 2..=n_steps {
        for i1 in 0..n_cav {
            for i2 in (i1 + 1)..n_cav {
                for p in 1..=n_rows {
                    for q in 1..=n_cols {
                        rows.push(Constraint {
                            family: Family::CavCollision,
                            terms: vec![
                                (layout.row_var(i1, k, p), 1),
                                (layout.row_var(i2, k, p), 1),
                                (layout.col_var(i1, k, q), 1),
                                (layout.col_var(i2, k, q), 1),
                            ],
                            sense: Sense::Le,
                            rhs: 3,
                        });
                    }
                }
            }
        }
        for (_, hv) in forecast.occupied_at(k) {
            if !grid.contains(hv) {
                continue;
            }
            for cav in 0..n_cav {
                rows.push(Constraint {
                    family: Family::HvExclusion,
                    terms: vec![(layout.row_var(cav, k, hv.row), 1), (layout.col_var(cav, k, hv.col), 1)],
                    sense: Sense::Le,
                    rhs: 1,
                });
            }
        }
    }

    // Space making, gated by detections known from the forecast.
    for a in block_assignments(forecast, init_cells, n_steps)? {
        let next = a.k + 1;
        if a.target_col > n_cols || a.hv_row > n_rows {
            continue;
        }
        rows.push(Constraint {
            family: Family::SpaceMakingLane,
            terms: vec![(layout.col_var(a.cav, next, a.target_col), 1)],
            sense: Sense::Eq,
            rhs: 1,
        });
        if a.k == 1 {
            let (lo, hi) = (a.hv_row.min(a.cav_row), a.hv_row.max(a.cav_row));
            rows.push(Constraint {
                family: Family::SpaceMakingBand,
                terms: (lo..=hi).map(|p| (layout.row_var(a.cav, next, p), 1)).collect(),
                sense: Sense::Eq,
                rhs: 1,
            });
        } else {
            // The CAV's row at step k is itself a decision: stay on the far
            // side of the HV row and do not move away from the HV.
            let ahead = a.cav_row >= a.hv_row;
            let beyond: Vec<_> = (1..=n_rows)
                .filter(|&p| if ahead { p < a.hv_row } else { p > a.hv_row })
                .map(|p| (layout.row_var(a.cav, next, p), 1))
                .collect();
            if !beyond.is_empty() {
                rows.push(Constraint {
                    family: Family::SpaceMakingBand,
                    terms: beyond,
                    sense: Sense::Eq,
                    rhs: 0,
                });
            }
            let sign = if ahead { 1 } else { -1 };
            let mut terms: Vec<_> = (1..=n_rows)
                .map(|p| (layout.row_var(a.cav, next, p), sign * p as i64))
                .collect();
            terms.extend((1..=n_rows).map(|p| (layout.row_var(a.cav, a.k, p), -sign * p as i64)));
            rows.push(Constraint {
                family: Family::SpaceMakingBand,
                terms,
                sense: Sense::Le,
                rhs: 0,
            });
        }
    }

    // Initial cells.
    for (cav, cell) in init_cells.iter().enumerate() {
        for p in 1..=n_rows {
            rows.push(Constraint {
                family: Family::InitialRow,
                terms: vec![(layout.row_var(cav, 1, p), 1)],
                sense: Sense::Eq,
                rhs: i64::from(p == cell.row),
            });
        }
        for q in 1..=n_cols {
            rows.push(Constraint {
                family: Family::InitialColumn,
                terms: vec![(layout.col_var(cav, 1, q), 1)],
                sense: Sense::Eq,
                rhs: i64::from(q == cell.col),
            });
        }
    }

    Ok(BinaryProgram {
        layout,
        vars,
        objective,
        rows,
    })
}

impl<W: Weight> BinaryProgram<W> {
    pub fn var_count(&self) -> usize {
        self.vars.len()
    }

    pub fn aux_count(&self) -> usize {
        self.vars.len() - self.layout.occupancy_vars()
    }

    pub fn rows_of(&self, family: Family) -> impl Iterator<Item = &Constraint> + '_ {
        self.rows.iter().filter(move |r| r.family == family)
    }

    /// Full 0-1 vector for a dense cell assignment, auxiliaries at their
    /// forced values.
    pub fn assignment_for(&self, cells: &[Vec<CellIndex>]) -> Vec<i64> {
        let l = &self.layout;
        let mut x = vec![0i64; self.vars.len()];
        for (cav, seq) in cells.iter().enumerate() {
            for (k0, c) in seq.iter().enumerate() {
                x[l.row_var(cav, k0 + 1, c.row)] = 1;
                x[l.col_var(cav, k0 + 1, c.col)] = 1;
            }
        }
        for (v, meta) in self.vars.iter().enumerate() {
            if let VarMeta::AbsDiff { a, b } = *meta {
                x[v] = (x[a] - x[b]).abs();
            }
        }
        x
    }

    pub fn evaluate(&self, x: &[i64]) -> W {
        self.objective
            .iter()
            .zip(x)
            .filter(|(_, &v)| v != 0)
            .fold(W::zero(), |acc, (&w, _)| acc + w)
    }

    pub fn violated_rows<'a>(&'a self, x: &'a [i64]) -> impl Iterator<Item = &'a Constraint> + 'a {
        self.rows.iter().filter(move |r| !r.is_satisfied_by(|v| x[v]))
    }

    fn var_name(&self, v: VarId) -> String {
        match self.vars[v] {
            VarMeta::Row { cav, k, p } => format!("r_{}_{}_{}", cav + 1, k, p),
            VarMeta::Col { cav, k, q } => format!("c_{}_{}_{}", cav + 1, k, q),
            VarMeta::AbsDiff { a, b } => format!("d_{}_{}", self.var_name(a), self.var_name(b)),
        }
    }

    /// Plain-text LP-style listing.
    pub fn to_lp_string(&self) -> String
    where
        W: fmt::Display,
    {
        let mut out = String::from("Minimize\n obj:");
        for (v, w) in self.objective.iter().enumerate() {
            if *w != W::zero() {
                let _ = write!(out, " + {} {}", w, self.var_name(v));
            }
        }
        out.push_str("\nSubject To\n");
        for (n, row) in self.rows.iter().enumerate() {
            let _ = write!(out, " c{} [{}]:", n, row.family);
            for &(v, a) in &row.terms {
                let _ = write!(out, " {} {} {}", if a < 0 { '-' } else { '+' }, a.abs(), self.var_name(v));
            }
            let sense = match row.sense {
                Sense::Le => "<=",
                Sense::Eq => "=",
                Sense::Ge => ">=",
            };
            let _ = writeln!(out, " {} {}", sense, row.rhs);
        }
        out.push_str("Binary\n");
        for v in 0..self.vars.len() {
            let _ = writeln!(out, " {}", self.var_name(v));
        }
        out.push_str("End\n");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::centered_lanes;
    use crate::planner::forecast::{HvTrack, LaneEvent};

    fn grid(rows: usize, cols: usize) -> MovingGrid<f64> {
        MovingGrid::new(0.0, 0.0, 17.5, rows, 10.0, 3.0, centered_lanes(cols, 3.0)).unwrap()
    }

    fn weights(delta: bool) -> PlannerWeights<f64> {
        PlannerWeights {
            w_tar: 10.0,
            w_lon: 1.0,
            w_lat: 2.0,
            l_index: 1,
            delta,
        }
    }

    #[test]
    fn variable_counts() {
        let p = build_program(
            &grid(2, 1),
            &[CellIndex::new(1, 1)],
            &HvForecast::empty(2),
            &weights(true),
            2,
        )
        .unwrap();
        assert_eq!(p.layout.occupancy_vars(), 6);
        assert_eq!(p.aux_count(), 3);
        assert_eq!(p.rows_of(Family::OneRow).count(), 2);
        assert_eq!(p.rows_of(Family::OneColumn).count(), 2);
    }

    #[test]
    fn shared_initial_cell_rejected() {
        let err = build_program(
            &grid(3, 2),
            &[CellIndex::new(1, 1), CellIndex::new(1, 1)],
            &HvForecast::empty(3),
            &weights(true),
            3,
        )
        .unwrap_err();
        assert!(matches!(err, PlannerError::InitialCollision { a: 0, b: 1, .. }));
    }

    #[test]
    fn precondition_errors() {
        let g = grid(3, 2);
        let init = [CellIndex::new(1, 1)];
        let w = weights(true);
        assert!(matches!(
            build_program(&g, &init, &HvForecast::empty(2), &w, 3),
            Err(PlannerError::ForecastTooShort { got: 2, need: 3 })
        ));
        assert!(matches!(
            build_program(&g, &init, &HvForecast::empty(3), &w, 1),
            Err(PlannerError::HorizonTooShort(1))
        ));
        let mut bad = w.clone();
        bad.l_index = 3;
        assert!(matches!(
            build_program(&g, &init, &HvForecast::empty(3), &bad, 3),
            Err(PlannerError::LaneIndexOutOfRange { .. })
        ));
        assert!(matches!(
            build_program(&g, &[CellIndex::new(4, 1)], &HvForecast::empty(3), &w, 3),
            Err(PlannerError::InitialOutOfGrid { .. })
        ));
    }

    #[test]
    fn no_hvs_means_no_hv_rows() {
        let p = build_program(
            &grid(4, 3),
            &[CellIndex::new(1, 2), CellIndex::new(2, 2)],
            &HvForecast::empty(4),
            &weights(true),
            4,
        )
        .unwrap();
        assert_eq!(p.rows_of(Family::HvExclusion).count(), 0);
        assert_eq!(p.rows_of(Family::SpaceMakingLane).count(), 0);
        assert_eq!(p.rows_of(Family::SpaceMakingBand).count(), 0);
    }

    fn forecast_with_front(front: CellIndex, steps: usize) -> HvForecast {
        HvForecast {
            steps,
            hvs: vec![HvTrack {
                id: 7,
                cells: vec![Some(front); steps],
            }],
            detected_lane_events: vec![],
            front_hv: Some(0),
        }
    }

    #[test]
    fn delta_rule() {
        let f = forecast_with_front(CellIndex::new(5, 2), 3);
        let behind_same = [CellIndex::new(1, 2), CellIndex::new(2, 2)];
        assert!(compute_delta(&behind_same, &f).unwrap());
        let ahead = [CellIndex::new(6, 2), CellIndex::new(7, 2)];
        assert!(!compute_delta(&ahead, &f).unwrap());
        let behind_other = [CellIndex::new(1, 1), CellIndex::new(2, 3)];
        assert!(!compute_delta(&behind_other, &f).unwrap());
        assert_eq!(compute_delta(&ahead, &HvForecast::empty(3)), Err(PlannerError::NoFrontHv));
    }

    #[test]
    fn epsilon_assignments() {
        let cavs = [CellIndex::new(1, 2), CellIndex::new(3, 2), CellIndex::new(2, 2)];
        let mut f = HvForecast::empty(4);
        assert_eq!(compute_epsilon(&f, 1, &cavs).unwrap(), (false, vec![]));
        f.hvs = vec![
            HvTrack { id: 1, cells: vec![Some(CellIndex::new(1, 1)); 4] },
            HvTrack { id: 2, cells: vec![Some(CellIndex::new(1, 3)); 4] },
        ];
        f.detected_lane_events = vec![
            LaneEvent { k: 1, hv: 0, col: 1, row: 1 },
            LaneEvent { k: 1, hv: 1, col: 3, row: 1 },
        ];
        let (eps, a) = compute_epsilon(&f, 1, &cavs).unwrap();
        assert!(eps);
        assert_eq!(a.len(), 2);
        let mut chosen: Vec<_> = a.iter().map(|x| x.cav).collect();
        chosen.sort();
        assert_eq!(chosen, vec![1, 2]);
        assert!(matches!(
            compute_epsilon(&f, 1, &cavs[..1]),
            Err(PlannerError::TooManyDetections { .. })
        ));
        f.detected_lane_events.truncate(1);
        let (_, a) = compute_epsilon(&f, 1, &cavs[..1]).unwrap();
        assert_eq!(a[0].cav, 0);
        assert!(compute_epsilon(&f, 9, &cavs).is_err());
    }

    #[test]
    fn lp_dump_mentions_every_family_present() {
        let p = build_program(
            &grid(3, 2),
            &[CellIndex::new(1, 1)],
            &HvForecast::empty(3),
            &weights(false),
            3,
        )
        .unwrap();
        let lp = p.to_lp_string();
        assert!(lp.starts_with("Minimize"));
        assert!(lp.contains("non-adjacent row move"));
        assert!(lp.contains("cornerwise move"));
        assert!(lp.trim_end().ends_with("End"));
    }
}
