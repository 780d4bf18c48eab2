//! Experiment runner behind the `intervene` binary.

pub mod config;
pub mod experiments;
pub mod report;

use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use thiserror::Error;

use config::{ConfigError, RunConfig};
use report::{Outcome, Report};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] intervene_core::Error),
    #[error("cannot write `{path}`: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("cannot write `{path}`: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("cannot serialize report: {0}")]
    Json(#[from] serde_json::Error),
}

/// What a finished run left on disk.
#[derive(Debug)]
pub struct RunOutput {
    pub outcome: Outcome,
    pub report_path: PathBuf,
    pub files: Vec<PathBuf>,
}

impl RunOutput {
    pub fn exit_code(&self) -> u8 {
        if self.outcome.any_failed() { 2 } else { 0 }
    }
}

/// Run the configured experiment and write `report.json`, `timings.json`
/// and every table into the output directory.
///
/// Wall-clock timings live in their own file so `report.json` stays
/// byte-identical across runs with the same configuration.
pub fn run(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    let dir = cfg.output_dir.clone();
    fs::create_dir_all(&dir).map_err(|source| CliError::Write { path: dir.clone(), source })?;

    let started = Instant::now();
    let mut outcome = experiments::run(cfg)?;
    outcome.timings.push(("total".into(), started.elapsed().as_secs_f64()));

    let mut files = Vec::new();
    for table in &outcome.tables {
        let path = dir.join(&table.file);
        report::write_table(&dir, table).map_err(|source| CliError::Csv { path: path.clone(), source })?;
        files.push(path);
    }
    files.extend(outcome.extra_files.iter().map(|f| dir.join(f)));

    let mut table_names: Vec<String> = outcome.tables.iter().map(|t| t.file.clone()).collect();
    table_names.extend(outcome.extra_files.iter().cloned());
    let report = Report {
        tool: "intervene",
        version: intervene_core::VERSION,
        experiment: cfg.experiment,
        seed: cfg.seed,
        parameters: &cfg.params,
        status: if outcome.any_failed() { "invariant_failure" } else { "pass" },
        results: &outcome.results,
        invariants: &outcome.invariants,
        findings: &outcome.findings,
        tables: table_names,
    };
    let report_path = dir.join("report.json");
    write_bytes(&report_path, &report::to_json(&report)?)?;

    let timings: std::collections::BTreeMap<&str, f64> =
        outcome.timings.iter().map(|(k, v)| (k.as_str(), *v)).collect();
    let timings_path = dir.join("timings.json");
    write_bytes(&timings_path, &report::to_json(&timings)?)?;
    files.push(timings_path);

    Ok(RunOutput { outcome, report_path, files })
}

fn write_bytes(path: &PathBuf, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|source| CliError::Write { path: path.clone(), source })
}
