use serde::{Deserialize, Serialize};

use super::config::Controller;
use super::log::{Role, SimLog};
use super::world::Footprint;
use crate::traffic::{VehicleKind, VehicleState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FollowingStats {
    /// Mean centre-to-centre distance to the nearest CAV ahead in the same lane.
    pub mean: f64,
    pub min: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CavMoe {
    pub id: usize,
    pub mean_speed: f64,
    pub travel_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlatoonMoe {
    pub mean_speed: f64,
    pub min_speed: f64,
    pub max_speed: f64,
    pub speed_variance: f64,
    pub segment: Option<[f64; 2]>,
    /// Mean over the CAVs that crossed the whole segment.
    pub travel_time: Option<f64>,
    pub per_cav: Vec<CavMoe>,
    pub following: Option<FollowingStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpstreamHv {
    pub id: usize,
    pub lane: usize,
    pub index: usize,
    pub mean_speed: f64,
    pub reference_mean_speed: Option<f64>,
    /// Percentage drop of the mean speed against the HV-only run.
    pub reduction_pct: Option<f64>,
    /// Largest tick-wise speed drop against the HV-only run, in percent.
    pub peak_dip_pct: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapStats {
    /// Smallest centre-to-centre distance from a stream HV to the HV ahead
    /// of it.
    pub min_gap: f64,
    pub speed_at_min_gap: f64,
    pub headway_at_min_gap: f64,
    /// Smallest distance-over-speed over all moving stream HVs and ticks.
    pub min_headway: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoeReport {
    pub controller: Controller,
    pub duration: f64,
    pub episodes: usize,
    pub collisions: usize,
    pub platoon: Option<PlatoonMoe>,
    pub upstream: Vec<UpstreamHv>,
    /// Mean reduction across streams for each position in the stream.
    pub reduction_by_index: Vec<f64>,
    pub dip_by_index: Vec<f64>,
    pub upstream_gap: Option<GapStats>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub swarm_speed: f64,
    pub baseline_speed: f64,
    pub speed_uplift_pct: f64,
    pub swarm_travel_time: Option<f64>,
    pub baseline_travel_time: Option<f64>,
}

impl Comparison {
    pub fn new(swarm: &MoeReport, baseline: &MoeReport) -> Option<Self> {
        let (s, b) = (swarm.platoon.as_ref()?, baseline.platoon.as_ref()?);
        Some(Self {
            swarm_speed: s.mean_speed,
            baseline_speed: b.mean_speed,
            speed_uplift_pct: (s.mean_speed - b.mean_speed) / b.mean_speed * 100.0,
            swarm_travel_time: s.travel_time,
            baseline_travel_time: b.travel_time,
        })
    }
}

/// From the lead CAV's starting position to the front edge of the furthest
/// planned cell. `None` when the run had no planning episode.
pub fn default_segment(log: &SimLog) -> Option<[f64; 2]> {
    let start = log
        .frames
        .first()?
        .states
        .iter()
        .filter(|s| s.kind == VehicleKind::Cav)
        .map(|s| s.s)
        .max_by(f64::total_cmp)?;
    let end = log
        .episodes
        .iter()
        .flat_map(|e| {
            let half = e.grid.l_cell / 2.0;
            e.waypoints.iter().flat_map(move |w| w.waypoints.iter().map(move |p| p.s + half))
        })
        .max_by(f64::total_cmp)?;
    Some([start, end])
}

/// Time at which `s(t)` first reaches `x`, interpolated between frames.
fn crossing_time(track: &[(f64, f64)], x: f64) -> Option<f64> {
    if track.first()?.1 >= x {
        return Some(track[0].0);
    }
    track.windows(2).find(|w| w[0].1 < x && w[1].1 >= x).map(|w| {
        let (t0, s0) = w[0];
        let (t1, s1) = w[1];
        t0 + (x - s0) / (s1 - s0) * (t1 - t0)
    })
}

fn mean(xs: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (sum, n) = xs.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn track_of(log: &SimLog, id: usize) -> Vec<(f64, f64)> {
    log.frames
        .iter()
        .filter_map(|f| f.states.iter().find(|s| s.id == id).map(|s| (f.t, s.s)))
        .collect()
}

fn mean_speed_of(log: &SimLog, id: usize) -> Option<f64> {
    mean(log.frames.iter().filter_map(|f| f.states.iter().find(|s| s.id == id).map(|s| s.v)))
}

fn peak_dip(log: &SimLog, reference: &SimLog, id: usize) -> Option<f64> {
    log.frames
        .iter()
        .zip(&reference.frames)
        .filter_map(|(f, r)| {
            let v = f.states.iter().find(|s| s.id == id)?.v;
            let vr = r.states.iter().find(|s| s.id == id)?.v;
            (vr > 0.0).then(|| (vr - v) / vr * 100.0)
        })
        .max_by(f64::total_cmp)
}

fn platoon_moe(log: &SimLog, segment: Option<[f64; 2]>) -> Option<PlatoonMoe> {
    let ids = log.cav_ids();
    if ids.is_empty() {
        return None;
    }
    let speeds: Vec<f64> = log
        .frames
        .iter()
        .flat_map(|f| f.states.iter().filter(|s| s.kind == VehicleKind::Cav).map(|s| s.v))
        .collect();
    let mean_speed = mean(speeds.iter().copied())?;
    let speed_variance = mean(speeds.iter().map(|v| (v - mean_speed).powi(2)))?;
    let per_cav: Vec<CavMoe> = ids
        .iter()
        .map(|&id| {
            let track = track_of(log, id);
            let travel_time = segment.and_then(|[a, b]| Some(crossing_time(&track, b)? - crossing_time(&track, a)?));
            CavMoe {
                id,
                mean_speed: mean_speed_of(log, id).unwrap_or(0.0),
                travel_time,
            }
        })
        .collect();

    let mut spacings = Vec::new();
    for f in &log.frames {
        let cavs: Vec<&VehicleState<f64>> = f.states.iter().filter(|s| s.kind == VehicleKind::Cav).collect();
        for c in &cavs {
            let ahead = cavs
                .iter()
                .filter(|o| o.id != c.id && o.lane == c.lane && o.s >= c.s)
                .map(|o| o.s - c.s)
                .min_by(f64::total_cmp);
            spacings.extend(ahead);
        }
    }
    let following = mean(spacings.iter().copied()).map(|m| FollowingStats {
        mean: m,
        min: spacings.iter().copied().fold(f64::INFINITY, f64::min),
        samples: spacings.len(),
    });

    Some(PlatoonMoe {
        mean_speed,
        min_speed: speeds.iter().copied().fold(f64::INFINITY, f64::min),
        max_speed: speeds.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        speed_variance,
        segment,
        travel_time: mean(per_cav.iter().filter_map(|c| c.travel_time)),
        per_cav,
        following,
    })
}

fn upstream_gaps(log: &SimLog, fp: Footprint) -> Option<GapStats> {
    let stream: Vec<usize> = log
        .vehicles
        .iter()
        .filter(|m| matches!(m.role, Role::Stream { .. }))
        .map(|m| m.id)
        .collect();
    let mut best: Option<GapStats> = None;
    for f in &log.frames {
        for ego in f.states.iter().filter(|s| stream.contains(&s.id)) {
            let Some(gap) = f
                .states
                .iter()
                .filter(|o| o.kind == VehicleKind::Hv && fp.in_path(ego, o))
                .map(|o| o.s - ego.s)
                .min_by(f64::total_cmp)
            else {
                continue;
            };
            let headway = if ego.v > 0.0 { gap / ego.v } else { f64::INFINITY };
            let g = best.get_or_insert(GapStats {
                min_gap: gap,
                speed_at_min_gap: ego.v,
                headway_at_min_gap: headway,
                min_headway: headway,
            });
            if gap < g.min_gap {
                g.min_gap = gap;
                g.speed_at_min_gap = ego.v;
                g.headway_at_min_gap = headway;
            }
            g.min_headway = g.min_headway.min(headway);
        }
    }
    best
}

/// Measures of effectiveness of one run. `reference` is the HV-only run used
/// for upstream speed reductions; `segment` overrides the travel-time
/// interval.
pub fn compute_moes(log: &SimLog, reference: Option<&SimLog>, segment: Option<[f64; 2]>, fp: Footprint) -> MoeReport {
    let segment = segment.or_else(|| default_segment(log));
    let mut upstream: Vec<UpstreamHv> = log
        .vehicles
        .iter()
        .filter_map(|m| match m.role {
            Role::Stream { lane, index } => Some((m.id, lane, index)),
            _ => None,
        })
        .map(|(id, lane, index)| {
            let mean_speed = mean_speed_of(log, id).unwrap_or(0.0);
            let reference_mean_speed = reference.and_then(|r| mean_speed_of(r, id));
            UpstreamHv {
                id,
                lane,
                index,
                mean_speed,
                reference_mean_speed,
                reduction_pct: reference_mean_speed.map(|r| (r - mean_speed) / r * 100.0),
                peak_dip_pct: reference.and_then(|r| peak_dip(log, r, id)),
            }
        })
        .collect();
    upstream.sort_by_key(|u| (u.index, u.lane));
    let max_index = upstream.iter().map(|u| u.index + 1).max().unwrap_or(0);
    let by_index = |f: fn(&UpstreamHv) -> Option<f64>| -> Vec<f64> {
        (0..max_index)
            .filter_map(|i| mean(upstream.iter().filter(|u| u.index == i).filter_map(f)))
            .collect()
    };
    let reduction_by_index = by_index(|u| u.reduction_pct);
    let dip_by_index = by_index(|u| u.peak_dip_pct);
    MoeReport {
        controller: log.controller,
        duration: log.frames.last().map_or(0.0, |f| f.t),
        episodes: log.episodes.len(),
        collisions: log.collisions.len(),
        platoon: platoon_moe(log, segment),
        upstream,
        reduction_by_index,
        dip_by_index,
        upstream_gap: upstream_gaps(log, fp),
    }
}
