//! Experiment runner: configs, pipelines, CSV reports, field files and
//! SVG plots.
//!
//! Exit codes of the binary: 0 when every check passes, 2 when some check
//! fails, 1 on usage, config or runtime errors.

pub mod config;
pub mod convergence;
pub mod fieldfile;
pub mod pipelines;
pub mod plot;
pub mod report;

use std::path::Path;

pub use config::ExperimentConfig;
pub use convergence::{report_convergence, ConvergenceEstimate};
pub use pipelines::{run_pipeline, Artifact, Outcome, Pipeline};
pub use report::{Comparison, Report, Row};

use crate::error::Result;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_CHECK_FAILED: i32 = 2;

/// Runs `pipeline` and writes `<pipeline>.csv` plus any artifacts into `out`.
pub fn run(pipeline: Pipeline, cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let outcome = run_pipeline(pipeline, cfg)?;
    std::fs::create_dir_all(out)?;
    let file = std::fs::File::create(out.join(format!("{}.csv", pipeline.name())))?;
    outcome.report.write_csv(std::io::BufWriter::new(file))?;
    for a in &outcome.artifacts {
        std::fs::write(out.join(&a.name), &a.bytes)?;
    }
    Ok(outcome)
}

pub fn exit_code(result: &Result<Outcome>) -> i32 {
    match result {
        Ok(o) if o.report.pass() => EXIT_PASS,
        Ok(_) => EXIT_CHECK_FAILED,
        Err(_) => EXIT_ERROR,
    }
}
