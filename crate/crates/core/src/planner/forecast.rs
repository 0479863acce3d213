use serde::{Deserialize, Serialize};

use crate::grid::CellIndex;

/// Predicted cells of one HV over the planning horizon; `None` while the HV
/// is outside the grid. `cells[k - 1]` holds step `k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HvTrack {
    pub id: usize,
    pub cells: Vec<Option<CellIndex>>,
}

/// An HV first seen in a lane other than the platoon lane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LaneEvent {
    /// Behavior step of the detection (1-based).
    pub k: usize,
    /// Index into [`HvForecast::hvs`].
    pub hv: usize,
    pub col: usize,
    pub row: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct HvForecast {
    pub steps: usize,
    pub hvs: Vec<HvTrack>,
    pub detected_lane_events: Vec<LaneEvent>,
    /// Index into `hvs` of the HV being overtaken, if any.
    pub front_hv: Option<usize>,
}

impl HvForecast {
    pub fn empty(steps: usize) -> Self {
        Self {
            steps,
            ..Self::default()
        }
    }

    pub fn cell_at(&self, hv: usize, k: usize) -> Option<CellIndex> {
        self.hvs.get(hv)?.cells.get(k.checked_sub(1)?).copied().flatten()
    }

    /// All HV cells occupied at step `k`.
    pub fn occupied_at(&self, k: usize) -> impl Iterator<Item = (usize, CellIndex)> + '_ {
        (0..self.hvs.len()).filter_map(move |j| self.cell_at(j, k).map(|c| (j, c)))
    }

    pub fn events_at(&self, k: usize) -> impl Iterator<Item = &LaneEvent> + '_ {
        self.detected_lane_events.iter().filter(move |e| e.k == k)
    }
}
