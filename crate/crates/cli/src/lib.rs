//! Command-line experiments for the two-component quadratic NLS system:
//! configuration, run manifests, per-command drivers and sweeps.

pub mod config;
pub mod error;
pub mod experiments;
pub mod manifest;
pub mod sweep;

use std::path::Path;

pub use config::{Config, Range};
pub use error::{CliError, Result};
pub use experiments::Outcome;
pub use manifest::{run_id, RunManifest, RunOutput};

/// Run `command` and persist its run directory under `out`. Sweeps write
/// their point runs as they complete.
pub fn execute(command: &str, cfg: &Config, seed: u64, threads: usize, out: &Path) -> Result<Outcome> {
    let outcome = if command == "sweep" {
        let spec = sweep::SweepSpec::from_config(cfg, threads)?;
        sweep::run_sweep(cfg, &spec, seed, out)?
    } else {
        experiments::run(command, cfg, seed)?
    };
    outcome.run.write(out)?;
    Ok(outcome)
}
