//! Command-line front end: scenario runs, single plans, plots and plan
//! validation. The binary only parses arguments and maps errors to exit
//! codes; everything else lives here so it can be tested.

mod plot;
mod svg;

pub use plot::{cmd_plot, read_trajectories, SeriesRow};
pub use svg::{Chart, Series};

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::centered_lanes;
use crate::planner::{quadratic_objective, validate_plan, PlanDocument, Violation};
use crate::sim::{
    compute_moes, initial_problem, run_mode, Comparison, Controller, Footprint, MoeReport, ScenarioConfig, SimError,
    SimLog, VehicleMeta,
};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config file {0} not found")]
    MissingConfig(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    MalformedLog { path: String, line: u64, message: String },
    #[error("{path}: {message}")]
    BadPlan { path: String, message: String },
    #[error("plan violates {} constraint(s); first: {}", .0.len(), .0[0])]
    Violations(Vec<Violation>),
}

impl CliError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// 2 for unusable input files, 1 for everything that went wrong later.
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::MissingConfig(_) | Self::Sim(SimError::Config(_)) | Self::BadPlan { .. } => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Swarm,
    Baseline,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Artifact {
    Logs,
    Moes,
    Plots,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: PathBuf,
    pub out: PathBuf,
    pub mode: Mode,
    pub emit: Vec<Artifact>,
}

/// Run-level facts the CSV logs leave out, written next to them as
/// `meta.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub controller: Controller,
    pub dt: f64,
    pub lanes: Vec<f64>,
    pub vehicles: Vec<VehicleMeta>,
    pub overtake_done_at: Option<f64>,
}

/// Contents of `moes.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoesFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub swarm: Option<MoeReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline: Option<MoeReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comparison: Option<Comparison>,
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig, CliError> {
    if !path.is_file() {
        return Err(CliError::MissingConfig(path.display().to_string()));
    }
    let cfg = ScenarioConfig::load(path)?;
    cfg.validate()?;
    Ok(cfg)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(SimError::from)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn write_log(cfg: &ScenarioConfig, log: &SimLog, dir: &Path, manifest: &RunManifest) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    if manifest.emit.contains(&Artifact::Logs) || manifest.emit.contains(&Artifact::Plots) {
        log.write_dir(dir)?;
        let meta = RunMeta {
            controller: log.controller,
            dt: log.dt,
            lanes: centered_lanes(cfg.road.lane_count, cfg.road.lane_width),
            vehicles: log.vehicles.clone(),
            overtake_done_at: log.overtake_done_at,
        };
        write_json(&dir.join("meta.json"), &meta)?;
    }
    if manifest.emit.contains(&Artifact::Plots) {
        cmd_plot(dir, &dir.join("plots"))?;
    }
    Ok(())
}

/// Runs the scenario and an HV-only reference of it, then writes logs,
/// `moes.json` and plots as requested. In `both` mode each controller gets a
/// subdirectory and `moes.json` carries the comparison.
pub fn cmd_run(manifest: &RunManifest) -> Result<MoesFile, CliError> {
    let cfg = load_config(&manifest.config)?;
    let fp = Footprint { length: cfg.vehicle.length, width: cfg.vehicle.width };
    let reference = run_mode(&cfg, Controller::HvOnly)?;
    let sub = |name: &str| match manifest.mode {
        Mode::Both => manifest.out.join(name),
        _ => manifest.out.clone(),
    };
    let run = |controller, dir: PathBuf| -> Result<SimLog, CliError> {
        match run_mode(&cfg, controller) {
            Ok(log) => {
                write_log(&cfg, &log, &dir, manifest)?;
                Ok(log)
            }
            Err(SimError::Collision { t, a, b, log }) => {
                // Keep what happened up to the crash for inspection.
                write_log(&cfg, &log, &dir, manifest)?;
                Err(SimError::Collision { t, a, b, log }.into())
            }
            Err(e) => Err(e.into()),
        }
    };

    let mut moes = MoesFile { swarm: None, baseline: None, comparison: None };
    if manifest.mode != Mode::Baseline {
        let log = run(Controller::Swarming, sub("swarm"))?;
        moes.swarm = Some(compute_moes(&log, Some(&reference), cfg.moe.segment, fp));
    }
    if manifest.mode != Mode::Swarm {
        let log = run(Controller::BaselineCacc, sub("baseline"))?;
        // Same travel-time segment as the swarm so the two compare.
        let segment = cfg.moe.segment.or(moes.swarm.as_ref().and_then(|m| m.platoon.as_ref()?.segment));
        moes.baseline = Some(compute_moes(&log, Some(&reference), segment, fp));
    }
    if let (Some(s), Some(b)) = (&moes.swarm, &moes.baseline) {
        moes.comparison = Comparison::new(s, b);
    }
    if manifest.emit.contains(&Artifact::Moes) {
        std::fs::create_dir_all(&manifest.out).map_err(|e| CliError::io(&manifest.out, e))?;
        write_json(&manifest.out.join("moes.json"), &moes)?;
    }
    Ok(moes)
}

/// Solves the first planning episode and returns its plan with the CAVs
/// numbered front to back.
pub fn cmd_plan(config: &Path, horizon: Option<usize>) -> Result<PlanDocument, CliError> {
    let cfg = load_config(config)?;
    let problem = initial_problem(&cfg, horizon)?;
    if problem.horizon == 1 {
        // Step 1 is pinned to the starting cells; there is nothing to choose.
        let cells: Vec<Vec<_>> = problem.init.iter().map(|&c| vec![c]).collect();
        let delta = [problem.weights.delta];
        let objective = quadratic_objective(&cells, problem.grid.n_rows, &problem.weights, &delta);
        return Ok(PlanDocument::from_cells(&cells, Some(objective)));
    }
    let ep = problem.solve(&cfg.planner)?;
    log::info!(
        "{} rows x {} lanes, {} nodes, {} refinements",
        problem.grid.n_rows,
        problem.grid.n_cols,
        ep.stats.nodes,
        ep.refinements
    );
    Ok(PlanDocument::from(&ep.plan))
}

pub fn read_plan(path: &Path) -> Result<PlanDocument, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::BadPlan {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Checks a plan file against the scenario's first planning episode.
pub fn cmd_validate(plan: &Path, config: &Path) -> Result<usize, CliError> {
    let cfg = load_config(config)?;
    let doc = read_plan(plan)?;
    let problem = initial_problem(&cfg, Some(doc.horizon))?;
    let cells = doc.to_cells();
    if cells.len() != problem.init.len() {
        return Err(CliError::BadPlan {
            path: plan.display().to_string(),
            message: format!("plan has {} CAVs, scenario has {}", cells.len(), problem.init.len()),
        });
    }
    let violations = validate_plan(&cells, &problem.grid, &problem.forecast, &problem.init);
    if violations.is_empty() {
        Ok(cells.len())
    } else {
        Err(CliError::Violations(violations))
    }
}

#[derive(Debug, Parser)]
#[command(name = "vswarm", version, about = "Cooperative CAV overtaking: planning, tracking and traffic simulation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a scenario and write logs and measures of effectiveness.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "both")]
        mode: Mode,
        #[arg(long, value_enum, value_delimiter = ',', default_value = "logs,moes,plots")]
        emit: Vec<Artifact>,
    },
    /// Solve the first planning episode and print its cell table.
    Plan {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        horizon: Option<usize>,
        /// Where to write the plan JSON.
        #[arg(long, default_value = "plan.json")]
        out: PathBuf,
    },
    /// Draw charts from a run directory or trajectories file.
    Plot {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-check a plan file against a scenario.
    Validate {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        config: PathBuf,
    },
}

fn dispatch(cli: Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    let out = |w: &mut dyn Write, s: String| {
        let _ = w.write_all(s.as_bytes());
    };
    match cli.command {
        Command::Run { config, out: dir, mode, emit } => {
            let moes = cmd_run(&RunManifest { config, out: dir.clone(), mode, emit })?;
            for (name, m) in [("swarm", &moes.swarm), ("baseline", &moes.baseline)] {
                if let Some(p) = m.as_ref().and_then(|m| m.platoon.as_ref()) {
                    out(stdout, format!("{name}: mean platoon speed {:.2} m/s\n", p.mean_speed));
                }
            }
            if let Some(c) = moes.comparison {
                out(stdout, format!("speed uplift {:.2}%\n", c.speed_uplift_pct));
            }
            out(stdout, format!("wrote {}\n", dir.display()));
        }
        Command::Plan { config, horizon, out: path } => {
            let doc = cmd_plan(&config, horizon)?;
            out(stdout, doc.table());
            write_json(&path, &doc)?;
            out(stdout, format!("wrote {}\n", path.display()));
        }
        Command::Plot { log, out: dir } => {
            let names = cmd_plot(&log, &dir)?;
            out(stdout, format!("wrote {} charts to {}\n", names.len(), dir.display()));
        }
        Command::Validate { plan, config } => {
            let n = cmd_validate(&plan, &config)?;
            out(stdout, format!("plan for {n} CAVs is valid\n"));
        }
    }
    Ok(())
}

/// Entry point shared by the binary and the tests.
pub fn main_with(args: impl IntoIterator<Item = String>, stdout: &mut dyn Write, stderr: &mut dyn Write) -> ExitCode {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(stderr, "{e}");
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match dispatch(cli, stdout) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            if let CliError::Violations(v) = &e {
                for x in v {
                    let _ = writeln!(stderr, "  {x}");
                }
            }
            ExitCode::from(e.exit_code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> (ExitCode, String, String) {
        let (mut o, mut e) = (Vec::new(), Vec::new());
        let code = main_with(args.iter().map(|s| s.to_string()), &mut o, &mut e);
        (code, String::from_utf8(o).unwrap(), String::from_utf8(e).unwrap())
    }

    #[test]
    fn missing_config_exits_2() {
        let (code, _, err) = run_args(&["vswarm", "run", "--config", "/nonexistent.toml", "--out", "/tmp/x"]);
        assert_eq!(code, ExitCode::from(2));
        assert!(err.contains("not found"), "{err}");
    }

    #[test]
    fn short_duration_is_a_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        std::fs::write(&p, "duration = 2.0\n").unwrap();
        let e = cmd_run(&RunManifest { config: p, out: dir.path().join("o"), mode: Mode::Swarm, emit: vec![] }).unwrap_err();
        assert!(matches!(e, CliError::Sim(SimError::Config(_))), "{e}");
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn emit_list_parses() {
        let cli = Cli::try_parse_from(["vswarm", "run", "--config", "a", "--out", "b", "--mode", "swarm", "--emit", "moes,plots"]).unwrap();
        match cli.command {
            Command::Run { mode, emit, .. } => {
                assert_eq!(mode, Mode::Swarm);
                assert_eq!(emit, vec![Artifact::Moes, Artifact::Plots]);
            }
            _ => panic!(),
        }
    }

    #[test]
    fn single_cav_empty_road_plans_forward() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        std::fs::write(&p, "streams = []\n[platoon]\ncount = 1\n[front_hv]\nenabled = false\n[planner]\nhorizon = 4\n").unwrap();
        let doc = cmd_plan(&p, None).unwrap();
        let rows: Vec<usize> = doc.cavs[0].steps.iter().map(|s| s.row).collect();
        assert!(rows.windows(2).all(|w| w[1] >= w[0]), "{rows:?}");
        assert!(doc.cavs[0].steps.iter().all(|s| s.col == 2));
    }

    #[test]
    fn horizon_one_keeps_initial_cells() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        std::fs::write(&p, "").unwrap();
        let doc = cmd_plan(&p, Some(1)).unwrap();
        let problem = initial_problem(&ScenarioConfig::default(), Some(1)).unwrap();
        assert_eq!(doc.to_cells(), problem.init.iter().map(|&c| vec![c]).collect::<Vec<_>>());
    }
}
