use thiserror::Error;

use super::program::Family;
use crate::grid::CellIndex;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlannerError {
    #[error("horizon must be at least 2 steps, got {0}")]
    HorizonTooShort(usize),
    #[error("CAVs {a} and {b} share initial cell {cell}")]
    InitialCollision { a: usize, b: usize, cell: CellIndex },
    #[error("initial cell {cell} of CAV {cav} lies outside the grid")]
    InitialOutOfGrid { cav: usize, cell: CellIndex },
    #[error("forecast covers {got} steps, horizon needs {need}")]
    ForecastTooShort { got: usize, need: usize },
    #[error("regrouping lane {l_index} outside 1..={n_cols}")]
    LaneIndexOutOfRange { l_index: usize, n_cols: usize },
    #[error("negative weight")]
    NegativeWeight,
    #[error("delta profile has {got} entries, horizon is {need}")]
    DeltaProfileLength { got: usize, need: usize },
    #[error("the front HV is missing from the forecast")]
    NoFrontHv,
    #[error("{hvs} HVs detected at step {k} but only {cavs} CAVs can be assigned")]
    TooManyDetections { k: usize, hvs: usize, cavs: usize },
    #[error("step {k} outside the forecast horizon of {steps}")]
    StepOutOfHorizon { k: usize, steps: usize },
    #[error("program has no feasible assignment (first violated family: {family})")]
    Infeasible { family: Family },
    #[error("search budget of {nodes} nodes exhausted before optimality was proven")]
    BudgetExhausted { nodes: u64 },
    #[error("program structure not supported by the solver: {0}")]
    Unsupported(String),
}
