//! Cooperative maneuver planning on the moving grid.

mod error;
mod forecast;
mod plan;
mod program;
mod solver;
mod validate;

pub use error::PlannerError;
pub use forecast::{HvForecast, HvTrack, LaneEvent};
pub use plan::{CavPlan, OccupancyPlan, PlanDocument, PlanStep};
pub use program::{
    block_assignments, build_program, build_program_with_delta, compute_delta, compute_epsilon,
    BinaryProgram, BlockAssignment, Constraint, Family, Layout, PlannerWeights, Sense, VarId, VarMeta,
};
pub use solver::{solve, SolveLimits, SolveStats};
pub use validate::{validate_plan, Violation};

use crate::grid::{CellIndex, MovingGrid};
use crate::scalar::Weight;

/// Replan when a new HV entered the grid or the current plan is used up.
pub fn should_replan(executed_steps: usize, plan_len: usize, new_hv_entered: bool) -> bool {
    new_hv_entered || executed_steps >= plan_len
}

/// The cost of a dense plan evaluated term by term in its quadratic form.
///
/// The regrouping term uses the column number of each CAV,
/// `(l_index - col)^2`, gated by `1 - delta_k`.
pub fn quadratic_objective<W: Weight>(
    cells: &[Vec<CellIndex>],
    n_rows: usize,
    weights: &PlannerWeights<W>,
    delta_by_step: &[bool],
) -> W {
    let n_cav = cells.len();
    let target_rows = n_rows.saturating_sub(n_cav);
    let sq = |d: usize| W::from_count(d * d);
    let mut total = W::zero();
    for seq in cells {
        for (k0, c) in seq.iter().enumerate() {
            if c.row <= target_rows {
                total = total + weights.w_tar;
            }
            if !delta_by_step[k0] {
                total = total + weights.w_lat * sq(weights.l_index.abs_diff(c.col));
            }
        }
        for (k0, w) in seq.windows(2).enumerate() {
            // A move between distinct rows flips two row indicators.
            if w[0].row != w[1].row {
                total = total + weights.w_lon * W::from_count(2);
            }
            if w[0].col != w[1].col && delta_by_step[k0] {
                total = total + weights.w_lat * W::from_count(2);
            }
        }
    }
    total
}

/// Per-step impeded indicator implied by a plan: 1 at step `k` while some
/// CAV has not yet moved past the front HV's row.
pub fn delta_profile_of(cells: &[Vec<CellIndex>], forecast: &HvForecast, n_steps: usize) -> Vec<bool> {
    let Some(front) = forecast.front_hv else {
        return vec![false; n_steps];
    };
    (1..=n_steps)
        .map(|k| match forecast.cell_at(front, k) {
            Some(hv) => cells.iter().any(|s| s[k - 1].row <= hv.row),
            None => false,
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct EpisodePlan<W> {
    pub plan: OccupancyPlan<W>,
    pub delta_by_step: Vec<bool>,
    pub assignments: Vec<BlockAssignment>,
    pub refinements: usize,
    pub stats: SolveStats,
}

/// Plans one episode.
///
/// The impeded indicator starts from [`compute_delta`] for every step; the
/// solved plan then yields a per-step profile (impeded until every CAV has
/// passed the front HV's row), and the program is re-solved with that profile
/// until it no longer changes, at most `max_refinements` times.
pub fn plan_episode<W: Weight, T>(
    grid: &MovingGrid<T>,
    init_cells: &[CellIndex],
    forecast: &HvForecast,
    weights: &PlannerWeights<W>,
    n_steps: usize,
    limits: SolveLimits,
    max_refinements: usize,
) -> Result<EpisodePlan<W>, PlannerError> {
    let start = match forecast.front_hv {
        Some(_) => compute_delta(init_cells, forecast)?,
        None => weights.delta,
    };
    let mut profile = vec![start; n_steps];
    let assignments = block_assignments(forecast, init_cells, n_steps)?;
    let mut refinements = 0;
    loop {
        let program = build_program_with_delta(grid, init_cells, forecast, weights, &profile, n_steps)?;
        let (plan, stats) = solve(&program, limits)?;
        let next = if forecast.front_hv.is_some() {
            delta_profile_of(&plan.cells, forecast, n_steps)
        } else {
            profile.clone()
        };
        if next == profile || refinements >= max_refinements {
            return Ok(EpisodePlan {
                plan,
                delta_by_step: profile,
                assignments,
                refinements,
                stats,
            });
        }
        profile = next;
        refinements += 1;
    }
}
