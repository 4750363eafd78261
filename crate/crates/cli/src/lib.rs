//! Configuration loading, the experiment registry and report writing for
//! the `balayage` command line tool.

pub mod config;
pub mod experiments;
pub mod report;

use std::time::Instant;

use balayage::pipeline::ExperimentReport;
use balayage::{Error, Result};

use config::RunConfig;
use experiments::Registry;

/// Resolves the experiment for `cfg`; `expected` is the name implied by a
/// subcommand, which must agree with the configuration when both are given.
pub fn resolve<'r>(registry: &'r Registry, cfg: &RunConfig, expected: Option<&str>) -> Result<&'r dyn experiments::Experiment> {
    let name = match (cfg.experiment.as_deref(), expected) {
        (Some(a), Some(b)) if a != b => {
            return Err(Error::Config(format!("config names experiment `{a}` but the subcommand is `{b}`")))
        }
        (Some(a), _) => a,
        (None, Some(b)) => b,
        (None, None) => return Err(Error::Config("config does not name an experiment".into())),
    };
    registry.get(name)
}

/// Runs the experiment and stamps the wall-clock time.
pub fn execute(registry: &Registry, cfg: &RunConfig, expected: Option<&str>) -> Result<ExperimentReport> {
    let exp = resolve(registry, cfg, expected)?;
    let t = Instant::now();
    let mut rep = exp.run(cfg)?;
    rep.runtime_seconds = t.elapsed().as_secs_f64();
    Ok(rep)
}
