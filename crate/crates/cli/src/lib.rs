//! Configuration-driven front end of the semiflow toolkit: scenario files,
//! run reports, plot data and the built-in scenario registry.

pub mod config;
pub mod expr;
pub mod model;
pub mod ops;
pub mod registry;
pub mod report;
pub mod svg;

use std::path::{Path, PathBuf};

use rayon::prelude::*;

pub use config::{load_config, parse_config, ConfigError, Scenario};
pub use report::{run_scenario, RunReport, ScenarioRun, Status};

/// Where a configuration comes from: a file or a registry entry.
pub fn resolve(spec: &str) -> Result<Vec<Scenario>, ConfigError> {
    let path = Path::new(spec);
    if !path.exists() {
        if let Some(e) = registry::find(spec) {
            return parse_config(e.source, &format!("builtin:{}", e.name), Path::new("."));
        }
    }
    load_config(path)
}

pub struct RunOptions {
    pub out: PathBuf,
    pub jobs: Option<usize>,
    pub svg: bool,
}

/// Runs every scenario (in parallel when `jobs` allows) and writes each into
/// its own directory under `opts.out`. Results are returned in config order.
pub fn run_all(scenarios: &[Scenario], opts: &RunOptions) -> std::io::Result<Vec<ScenarioRun>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.unwrap_or(0))
        .build()
        .map_err(std::io::Error::other)?;
    let runs: Vec<ScenarioRun> = pool.install(|| scenarios.par_iter().map(run_scenario).collect());
    for run in &runs {
        report::write_run(run, &opts.out.join(&run.output), opts.svg)?;
    }
    Ok(runs)
}

pub fn overall(runs: &[ScenarioRun]) -> Status {
    runs.iter().map(|r| r.report.verdict.status).fold(Status::Pass, Status::worst)
}
