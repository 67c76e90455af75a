use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rnls::{execute, CliError, Config};

#[derive(Parser)]
#[command(name = "rnls", version, about = "Standing waves of a two-component quadratic NLS system")]
struct Cli {
    /// key=value configuration file (dotted keys, e.g. grid.n=1024)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; RNLS_OUT takes precedence
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Worker threads for sweeps
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// Print the run manifest as JSON instead of a text summary
    #[arg(long, global = true)]
    json: bool,
    /// Override any configuration key, e.g. --set evolve.dt=5e-4
    #[arg(long = "set", short = 's', global = true, value_name = "KEY=VALUE")]
    sets: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Label a (κ, γ) grid with its J and K regions and branch values
    Regions(Knobs),
    /// Branch points, ell and the E1∩E2 check at one (κ, γ)
    Branch(Knobs),
    /// Nehari-constrained action minimization and family classification
    GroundState(Knobs),
    /// Low spectrum of a linearized operator
    Spectrum(Knobs),
    /// Time evolution of a (perturbed) standing wave
    Evolve(Knobs),
    /// Orbital stability probe of a standing wave
    Probe(Knobs),
    /// Run one experiment over a (κ, γ) grid
    Sweep(Knobs),
    /// Branch values along a γ line at fixed κ
    Diagram(Knobs),
}

/// Shorthands for the most common configuration keys.
#[derive(Args, Default)]
#[command(allow_negative_numbers = true)]
struct Knobs {
    /// Value, or lo:hi:count for regions, diagram and sweep
    #[arg(long, allow_hyphen_values = true)]
    kappa: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    gamma: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    omega: Option<f64>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    /// Box length
    #[arg(long)]
    extent: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long = "t-final")]
    t_final: Option<f64>,
    /// semitrivial, plus_minus, minus_plus or degenerate
    #[arg(long)]
    branch: Option<String>,
    /// random_even, psi_first_component or phase_kick
    #[arg(long)]
    direction: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    delta: Option<f64>,
    /// La, LR or LI
    #[arg(long)]
    operator: Option<String>,
    /// Potential coupling of La
    #[arg(long, allow_hyphen_values = true)]
    a: Option<f64>,
    /// Experiment run by sweep
    #[arg(long)]
    experiment: Option<String>,
}

impl Knobs {
    fn apply(&self, c: &mut Config) {
        let pairs: [(&str, Option<String>); 14] = [
            ("kappa", self.kappa.clone()),
            ("gamma", self.gamma.clone()),
            ("omega", self.omega.map(|v| v.to_string())),
            ("grid.dim", self.dim.map(|v| v.to_string())),
            ("grid.n", self.n.map(|v| v.to_string())),
            ("grid.L", self.extent.map(|v| v.to_string())),
            ("evolve.dt", self.dt.map(|v| v.to_string())),
            ("evolve.T", self.t_final.map(|v| v.to_string())),
            ("state.branch", self.branch.clone()),
            ("perturb.direction", self.direction.clone()),
            ("perturb.delta", self.delta.map(|v| v.to_string())),
            ("spectrum.operator", self.operator.clone()),
            ("spectrum.a", self.a.map(|v| v.to_string())),
            ("sweep.experiment", self.experiment.clone()),
        ];
        for (k, v) in pairs {
            if let Some(v) = v {
                c.set(k, v);
            }
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    for s in &cli.sets {
        cfg.set_pair(s)?;
    }
    let (name, knobs) = match &cli.command {
        Command::Regions(k) => ("regions", k),
        Command::Branch(k) => ("branch", k),
        Command::GroundState(k) => ("ground-state", k),
        Command::Spectrum(k) => ("spectrum", k),
        Command::Evolve(k) => ("evolve", k),
        Command::Probe(k) => ("probe", k),
        Command::Sweep(k) => ("sweep", k),
        Command::Diagram(k) => ("diagram", k),
    };
    knobs.apply(&mut cfg);
    if cli.threads == 0 {
        return Err(CliError::Validation("--threads must be >= 1".into()));
    }
    let out = std::env::var_os("RNLS_OUT")
        .map(PathBuf::from)
        .or(cli.out)
        .unwrap_or_else(|| PathBuf::from("out"));
    let outcome = execute(name, &cfg, cli.seed, cli.threads, &out)?;
    for key in cfg.unused() {
        eprintln!("warning: unused setting {key}");
    }
    let text = if cli.json {
        serde_json::to_string_pretty(&outcome.run.manifest)? + "\n"
    } else {
        format!("{}run {} -> {}\n", outcome.text, outcome.run.manifest.run_id, outcome.run.dir(&out).display())
    };
    // a closed pipe (e.g. `| head`) is not an error
    if let Err(e) = std::io::stdout().lock().write_all(text.as_bytes()) {
        if e.kind() != std::io::ErrorKind::BrokenPipe {
            return Err(e.into());
        }
    }
    match outcome.failure {
        Some(f) => Err(CliError::Numerical(f)),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
