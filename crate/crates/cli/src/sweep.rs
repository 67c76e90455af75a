//! Parameter sweeps over a `(κ, γ)` grid on a fixed-size thread pool.

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde_json::json;

use crate::config::{Config, Range};
use crate::error::{invalid, CliError, Result};
use crate::experiments::{self, Outcome};
use crate::manifest::RunOutput;

pub const EXPERIMENTS: [&str; 5] = ["regions", "branch", "spectrum", "probe", "ground-state"];

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SweepSpec {
    pub experiment: String,
    pub kappa: Range,
    pub gamma: Range,
    pub parallelism: usize,
}

impl SweepSpec {
    pub fn from_config(cfg: &Config, threads: usize) -> Result<Self> {
        let experiment: String = cfg.get("sweep.experiment", "probe".to_string())?;
        let experiment = experiment.replace('_', "-");
        if !EXPERIMENTS.contains(&experiment.as_str()) {
            return invalid(format!("unknown sweep experiment {experiment:?}; one of {EXPERIMENTS:?}"));
        }
        let kappa: Range = cfg.require("kappa")?;
        let gamma: Range = cfg.require("gamma")?;
        kappa.validate("kappa")?;
        gamma.validate("gamma")?;
        if !(gamma.lo > 0.0) {
            return invalid(format!("gamma range must be positive, got lo = {}", gamma.lo));
        }
        let parallelism: usize = cfg.get("sweep.parallelism", threads)?;
        if parallelism == 0 {
            return invalid("parallelism must be >= 1");
        }
        Ok(SweepSpec { experiment, kappa, gamma, parallelism })
    }

    /// Work list in a fixed order.
    pub fn points(&self) -> Vec<(f64, f64)> {
        let gs = self.gamma.points();
        self.kappa
            .points()
            .into_iter()
            .flat_map(|k| gs.iter().map(move |&g| (k, g)))
            .collect()
    }
}

/// One aggregated row: `kappa, gamma, status, error, run_id, <experiment columns>`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub kappa: f64,
    pub gamma: f64,
    pub cells: Vec<String>,
}

fn point_config(base: &Config, kappa: f64, gamma: f64) -> Config {
    let mut c = base.clone();
    c.set("kappa", experiments::num(kappa));
    c.set("gamma", experiments::num(gamma));
    c
}

/// Run one sweep point as a standalone run. Validation and numerical
/// failures are returned for in-band recording.
pub fn run_point(experiment: &str, base: &Config, kappa: f64, gamma: f64, seed: u64) -> Result<Outcome> {
    let cfg = point_config(base, kappa, gamma);
    if experiment == "regions" {
        // a one-cell region table
        return experiments::regions(&cfg, seed).map(|mut o| {
            let r = experiments::region_row(kappa, gamma).expect("validated by the run");
            o.header = experiments::REGION_HEADER[2..].to_vec();
            o.row = r[2..].to_vec();
            o
        });
    }
    experiments::run(experiment, &cfg, seed)
}

fn header_for(experiment: &str) -> Vec<&'static str> {
    match experiment {
        "regions" => experiments::REGION_HEADER[2..].to_vec(),
        "branch" => vec!["j_region", "k_region", "branch_count", "ell"],
        "ground-state" => vec!["k_region", "family", "expected_family", "match_error", "action", "d_omega"],
        "spectrum" => vec!["operator", "negative_count", "kernel_dim", "lowest"],
        _ => vec!["branch", "direction", "verdict", "predicted", "max_dist", "growth_time"],
    }
}

pub fn sweep_csv(experiment: &str, rows: &[SweepRow]) -> String {
    let mut header = vec!["kappa", "gamma", "status", "error", "run_id"];
    header.extend(header_for(experiment));
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&experiments::num(r.kappa));
        s.push(',');
        s.push_str(&experiments::num(r.gamma));
        s.push(',');
        s.push_str(&r.cells.join(","));
        s.push('\n');
    }
    s
}

fn csv_cell(s: &str) -> String {
    // keep error strings on one line and free of separators
    s.replace([',', '\n', '"'], ";")
}

/// Execute the sweep; each point writes its own run directory, then the
/// aggregate is written under the sweep's run directory.
pub fn run_sweep(base: &Config, spec: &SweepSpec, seed: u64, out: &Path) -> Result<Outcome> {
    let start = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.parallelism)
        .build()
        .map_err(|e| CliError::Validation(format!("thread pool: {e}")))?;
    let width = header_for(&spec.experiment).len();
    let points = spec.points();
    let results: Vec<Result<SweepRow>> = pool.install(|| {
        points
            .par_iter()
            .map(|&(k, g)| -> Result<SweepRow> {
                let cells = match run_point(&spec.experiment, base, k, g, seed) {
                    Ok(o) => {
                        o.run.write(out)?;
                        let status = o.failure.as_ref().map_or("ok".to_string(), |f| {
                            f.split(':').next().unwrap_or("numerical").to_string()
                        });
                        let mut c = vec![status, csv_cell(o.failure.as_deref().unwrap_or("")), o.run.manifest.run_id.clone()];
                        c.extend(o.row);
                        c
                    }
                    Err(e @ (CliError::Validation(_) | CliError::Numerical(_))) => {
                        let mut c = vec![e.class(), csv_cell(&e.to_string()), String::new()];
                        c.extend(std::iter::repeat_n(String::new(), width));
                        c
                    }
                    Err(e) => return Err(e),
                };
                Ok(SweepRow { kappa: k, gamma: g, cells })
            })
            .collect()
    });
    let mut rows = results.into_iter().collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| a.kappa.total_cmp(&b.kappa).then(a.gamma.total_cmp(&b.gamma)));
    let table = sweep_csv(&spec.experiment, &rows);
    let point_runs: Vec<&str> = rows.iter().map(|r| r.cells[2].as_str()).collect();
    let failed = rows.iter().filter(|r| r.cells[0] != "ok").count();
    let inputs = json!({
        "experiment": spec.experiment,
        "kappa": spec.kappa,
        "gamma": spec.gamma,
        "point_runs": point_runs,
    });
    let verdicts = json!({ "points": rows.len(), "failed": failed, "parallelism": spec.parallelism });
    let run = RunOutput::new(
        "sweep",
        inputs,
        seed,
        verdicts,
        vec![("sweep.csv".into(), table.clone().into_bytes())],
        start.elapsed().as_secs_f64(),
    );
    Ok(Outcome {
        run,
        header: vec!["points", "failed"],
        row: vec![rows.len().to_string(), failed.to_string()],
        text: table,
        failure: None,
    })
}
