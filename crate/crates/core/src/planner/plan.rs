use serde::{Deserialize, Serialize};

use crate::grid::CellIndex;

/// Solved cell sequence per CAV; `cells[i][k - 1]` is CAV `i` at step `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyPlan<W> {
    pub cells: Vec<Vec<CellIndex>>,
    pub horizon: usize,
    pub objective: W,
}

impl<W> OccupancyPlan<W> {
    pub fn cav_count(&self) -> usize {
        self.cells.len()
    }

    pub fn cell(&self, cav: usize, k: usize) -> CellIndex {
        self.cells[cav][k - 1]
    }

    /// Cells of all CAVs at the last step.
    pub fn final_cells(&self) -> Vec<CellIndex> {
        self.cells.iter().filter_map(|s| s.last().copied()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanStep {
    pub k: usize,
    pub row: usize,
    pub col: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CavPlan {
    pub cav_id: usize,
    pub steps: Vec<PlanStep>,
}

/// On-disk plan shape: per CAV an ordered list of `{k, row, col}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanDocument {
    pub horizon: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<f64>,
    pub cavs: Vec<CavPlan>,
}

impl PlanDocument {
    pub fn from_cells(cells: &[Vec<CellIndex>], objective: Option<f64>) -> Self {
        Self {
            horizon: cells.first().map_or(0, Vec::len),
            objective,
            cavs: cells
                .iter()
                .enumerate()
                .map(|(cav_id, seq)| CavPlan {
                    cav_id,
                    steps: seq
                        .iter()
                        .enumerate()
                        .map(|(k0, c)| PlanStep {
                            k: k0 + 1,
                            row: c.row,
                            col: c.col,
                        })
                        .collect(),
                })
                .collect(),
        }
    }

    pub fn to_cells(&self) -> Vec<Vec<CellIndex>> {
        let mut cavs = self.cavs.clone();
        cavs.sort_by_key(|c| c.cav_id);
        cavs.into_iter()
            .map(|c| {
                let mut steps = c.steps;
                steps.sort_by_key(|s| s.k);
                steps.into_iter().map(|s| CellIndex::new(s.row, s.col)).collect()
            })
            .collect()
    }

    /// One line per step, one column per CAV: the textual plan table.
    pub fn table(&self) -> String {
        let cells = self.to_cells();
        let mut out = String::from("step");
        for i in 0..cells.len() {
            out.push_str(&format!("  cav{:<5}", i + 1));
        }
        out.push('\n');
        for k in 0..self.horizon {
            out.push_str(&format!("{:>4}", k + 1));
            for seq in &cells {
                let c = seq[k];
                out.push_str(&format!("  {:<8}", format!("({},{})", c.row, c.col)));
            }
            out.push('\n');
        }
        out
    }
}

impl From<&OccupancyPlan<f64>> for PlanDocument {
    fn from(p: &OccupancyPlan<f64>) -> Self {
        PlanDocument::from_cells(&p.cells, Some(p.objective))
    }
}
