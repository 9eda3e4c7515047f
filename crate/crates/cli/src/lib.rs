//! Configuration-driven runner: each invocation resolves one system, runs one job and
//! writes `report.json` plus the job's CSV and image artifacts.

pub mod config;
pub mod jobs;
pub mod output;
pub mod report;

use std::io;
use std::path::Path;

pub use config::{load, parse, ConfigError, JobConfig, JobKind};
pub use report::{Check, Failure, RunReport};

use jobs::Ctx;
use output::Outputs;

/// Runs the job and writes its artifacts and `report.json` into `out_dir`.
pub fn run(config: &JobConfig, out_dir: &Path) -> anyhow::Result<RunReport> {
    let system = config.system.resolve()?;
    let mut out = Outputs::new(out_dir)?;
    let mut ctx = Ctx { seed: config.seed, out: &mut out, checks: Vec::new(), failures: Vec::new(), results: Default::default() };
    jobs::run_job(&mut ctx, &system, &config.job)?;
    jobs::write_checks(&mut ctx)?;
    let Ctx { checks, failures, results, .. } = ctx;
    let passed = failures.is_empty() && checks.iter().all(|c| c.passed);
    let mut report = RunReport {
        schema_version: config::SCHEMA_VERSION,
        job: config.job.kind(),
        system: config.system.label(),
        seed: config.seed,
        passed,
        checks,
        failures,
        results,
        artifacts: out.manifest.clone(),
    };
    out.json("report.json", &report)?;
    report.artifacts = out.manifest;
    for a in &report.artifacts {
        if !out_dir.join(&a.path).is_file() {
            return Err(io::Error::new(io::ErrorKind::NotFound, format!("declared artifact {} is missing", a.path)).into());
        }
    }
    Ok(report)
}
