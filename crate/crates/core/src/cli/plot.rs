use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::svg::{Chart, Series};
use super::{CliError, RunMeta};
use crate::sim::{nearest_lane, write_rows, Role, TrajectoryRow};
use crate::traffic::VehicleKind;

/// One row of a chart's data file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub series: String,
    pub t: f64,
    pub value: f64,
}

/// Where the trajectories and the optional `meta.json` of a log live. `log`
/// may be a run directory or a trajectories file.
fn locate(log: &Path) -> (PathBuf, PathBuf) {
    if log.is_dir() {
        (log.join("trajectories.csv"), log.join("meta.json"))
    } else {
        let dir = log.parent().unwrap_or(Path::new("."));
        (log.to_path_buf(), dir.join("meta.json"))
    }
}

pub fn read_trajectories(path: &Path) -> Result<Vec<TrajectoryRow>, CliError> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut rdr = csv::Reader::from_reader(file);
    let mut rows = Vec::new();
    for r in rdr.deserialize() {
        rows.push(r.map_err(|e: csv::Error| CliError::MalformedLog {
            path: path.display().to_string(),
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?);
    }
    if rows.is_empty() {
        return Err(CliError::MalformedLog {
            path: path.display().to_string(),
            line: 1,
            message: "no trajectory rows".into(),
        });
    }
    Ok(rows)
}

/// Frames keyed by time in first-seen order.
fn frames(rows: &[TrajectoryRow]) -> Vec<(f64, Vec<&TrajectoryRow>)> {
    let mut out: Vec<(f64, Vec<&TrajectoryRow>)> = Vec::new();
    for r in rows {
        match out.last_mut() {
            Some((t, v)) if *t == r.t => v.push(r),
            _ => out.push((r.t, vec![r])),
        }
    }
    out
}

fn per_vehicle(rows: &[TrajectoryRow], keep: impl Fn(&TrajectoryRow) -> bool, f: impl Fn(&TrajectoryRow) -> f64, label: &str) -> Vec<Series> {
    let mut by: BTreeMap<usize, Vec<(f64, f64)>> = BTreeMap::new();
    for r in rows.iter().filter(|r| keep(r)) {
        by.entry(r.vehicle_id).or_default().push((r.t, f(r)));
    }
    by.into_iter()
        .map(|(id, points)| Series { name: format!("{label} {id}"), points })
        .collect()
}

/// Distance to the nearest vehicle ahead in the same lane that passes `lead`,
/// per vehicle passing `ego`, over time.
fn spacing(
    frames: &[(f64, Vec<&TrajectoryRow>)],
    same_lane: &dyn Fn(f64, f64) -> bool,
    ego: &dyn Fn(&TrajectoryRow) -> bool,
    lead: &dyn Fn(&TrajectoryRow) -> bool,
    label: &str,
) -> Vec<Series> {
    let mut by: BTreeMap<usize, Vec<(f64, f64)>> = BTreeMap::new();
    for (t, states) in frames {
        for e in states.iter().filter(|r| ego(r)) {
            let gap = states
                .iter()
                .filter(|o| o.vehicle_id != e.vehicle_id && lead(o) && o.s >= e.s && same_lane(e.y, o.y))
                .map(|o| o.s - e.s)
                .min_by(f64::total_cmp);
            if let Some(g) = gap {
                by.entry(e.vehicle_id).or_default().push((*t, g));
            }
        }
    }
    by.into_iter()
        .map(|(id, points)| Series { name: format!("{label} {id}"), points })
        .collect()
}

fn charts(rows: &[TrajectoryRow], meta: Option<&RunMeta>) -> Vec<(&'static str, Chart)> {
    let is_cav = |r: &TrajectoryRow| r.kind == VehicleKind::Cav;
    let upstream: Option<Vec<usize>> = meta.map(|m| {
        m.vehicles
            .iter()
            .filter(|v| matches!(v.role, Role::Stream { .. }))
            .map(|v| v.id)
            .collect()
    });
    let is_upstream = |r: &TrajectoryRow| match &upstream {
        Some(ids) => ids.contains(&r.vehicle_id),
        None => r.kind == VehicleKind::Hv,
    };
    let lanes = meta.map(|m| m.lanes.clone()).filter(|l| !l.is_empty());
    let same_lane = move |a: f64, b: f64| match &lanes {
        Some(l) => nearest_lane(l, a) == nearest_lane(l, b),
        None => (a - b).abs() < 1.5,
    };
    let fr = frames(rows);

    let mean_speed: Vec<(f64, f64)> = fr
        .iter()
        .filter_map(|(t, st)| {
            let v: Vec<f64> = st.iter().filter(|r| is_cav(r)).map(|r| r.v).collect();
            (!v.is_empty()).then(|| (*t, v.iter().sum::<f64>() / v.len() as f64))
        })
        .collect();
    let chart = |title: &str, y_label: &str, series| Chart {
        title: title.into(),
        x_label: "t [s]".into(),
        y_label: y_label.into(),
        series,
    };
    vec![
        ("cav_s_t", chart("CAV longitudinal position", "s [m]", per_vehicle(rows, is_cav, |r| r.s, "cav"))),
        ("cav_y_t", chart("CAV lateral position", "y [m]", per_vehicle(rows, is_cav, |r| r.y, "cav"))),
        (
            "platoon_speed",
            chart("Platoon speed", "v [m/s]", vec![Series { name: "mean".into(), points: mean_speed }]),
        ),
        ("following", chart("CAV following distance", "gap [m]", spacing(&fr, &same_lane, &is_cav, &is_cav, "cav"))),
        ("upstream_speed", chart("Upstream HV speed", "v [m/s]", per_vehicle(rows, is_upstream, |r| r.v, "hv"))),
        (
            "upstream_gap",
            chart(
                "Upstream HV gap",
                "gap [m]",
                spacing(&fr, &same_lane, &is_upstream, &|r: &TrajectoryRow| r.kind == VehicleKind::Hv, "hv"),
            ),
        ),
    ]
}

/// Writes `<name>.svg` and `<name>.csv` for every chart into `out` and
/// returns the chart names.
pub fn cmd_plot(log: &Path, out: &Path) -> Result<Vec<String>, CliError> {
    let (traj, meta_path) = locate(log);
    let rows = read_trajectories(&traj)?;
    let meta: Option<RunMeta> = if meta_path.exists() {
        let text = std::fs::read_to_string(&meta_path).map_err(|e| CliError::io(&meta_path, e))?;
        Some(serde_json::from_str(&text).map_err(|e| CliError::MalformedLog {
            path: meta_path.display().to_string(),
            line: e.line() as u64,
            message: e.to_string(),
        })?)
    } else {
        None
    };
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let mut names = Vec::new();
    for (name, chart) in charts(&rows, meta.as_ref()) {
        let svg = out.join(format!("{name}.svg"));
        std::fs::write(&svg, chart.to_svg()).map_err(|e| CliError::io(&svg, e))?;
        let csv = out.join(format!("{name}.csv"));
        let file = std::fs::File::create(&csv).map_err(|e| CliError::io(&csv, e))?;
        let data = chart.series.iter().flat_map(|s| {
            s.points.iter().map(|&(t, value)| SeriesRow { series: s.name.clone(), t, value })
        });
        write_rows(data, std::io::BufWriter::new(file))?;
        names.push(name.to_string());
    }
    Ok(names)
}
