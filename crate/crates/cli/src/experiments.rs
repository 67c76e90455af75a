//! One function per subcommand. Each resolves its inputs from the config,
//! computes everything in memory and returns a [`RunOutput`] plus a summary
//! row for sweep tables; nothing is written here.

use std::time::Instant;

use rnls_core::evolution::{self, Direction, EvolutionConfig, ProbeTarget, TrajectorySeries};
use rnls_core::field::{write_snapshot, SnapshotMeta};
use rnls_core::ground_state::{self, Family, NehariOptions};
use rnls_core::model::{self, BranchKind, BranchPoint, KRegion};
use rnls_core::spectra::{self, Discretization, OperatorParams, SpectrumReport};
use rnls_core::{CouplingParams, Field2, Grid};
use serde_json::{json, Value};

use crate::config::{Config, Range};
use crate::error::{invalid, CliError, Result};
use crate::manifest::RunOutput;

/// Largest fraction of profile mass allowed near the box edge.
pub const TAIL_MASS_TOL: f64 = 1e-12;

pub const COMMANDS: [&str; 8] = ["regions", "branch", "ground-state", "spectrum", "evolve", "probe", "sweep", "diagram"];

/// A run plus its one-line summary for sweep tables.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub run: RunOutput,
    pub header: Vec<&'static str>,
    pub row: Vec<String>,
    /// Human-readable stdout text.
    pub text: String,
    /// A numerical failure that still produced artifacts worth keeping.
    pub failure: Option<String>,
}

pub fn num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v:.16e}")
    }
}

pub fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), num)
}

fn csv(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    s
}

fn params(cfg: &Config) -> Result<CouplingParams> {
    let k: f64 = cfg.require("kappa")?;
    let g: f64 = cfg.require("gamma")?;
    Ok(CouplingParams::new(k, g)?)
}

fn omega(cfg: &Config) -> Result<f64> {
    let w: f64 = cfg.get("omega", 1.0)?;
    if !(w > 0.0 && w.is_finite()) {
        return invalid(format!("omega must be > 0, got {w}"));
    }
    Ok(w)
}

fn grid(cfg: &Config, default_n: usize) -> Result<Grid> {
    let dim: usize = cfg.get("grid.dim", 1)?;
    let n: usize = cfg.get("grid.n", if dim == 1 { default_n } else { 64 })?;
    let l: f64 = cfg.get("grid.L", if dim == 1 { 80.0 } else { 30.0 })?;
    Ok(Grid::new(dim, n, l)?)
}

fn evolution_cfg(cfg: &Config, t_final: f64, dt: f64) -> Result<EvolutionConfig> {
    let c = EvolutionConfig {
        dt: cfg.get("evolve.dt", dt)?,
        t_final: cfg.get("evolve.T", t_final)?,
        nonlinear_substeps: cfg.get("evolve.substeps", 1)?,
        monitor_stride: cfg.get("evolve.stride", 10)?,
        dealias: cfg.get("evolve.dealias", false)?,
    };
    c.validate()?;
    Ok(c)
}

fn kind_name(k: BranchKind) -> &'static str {
    match k {
        BranchKind::PlusMinus => "plus_minus",
        BranchKind::MinusPlus => "minus_plus",
        BranchKind::Degenerate => "degenerate",
        BranchKind::Semitrivial => "semitrivial",
    }
}

/// The branch point named by `state.branch`.
pub fn select_branch(p: &CouplingParams, name: &str) -> Result<BranchPoint> {
    if name == "semitrivial" {
        return Ok(BranchPoint::semitrivial(p));
    }
    let kind = match name {
        "plus_minus" => BranchKind::PlusMinus,
        "minus_plus" => BranchKind::MinusPlus,
        "degenerate" => BranchKind::Degenerate,
        _ => return invalid(format!("unknown branch {name:?}")),
    };
    let region = model::classify_j(p)?;
    model::branch_points(p)?
        .into_iter()
        .find(|b| b.kind == kind)
        .ok_or_else(|| CliError::Validation(format!("no {name} branch at (κ={}, γ={}) in {region}", p.kappa, p.gamma)))
}

fn snapshot(f: &Field2, p: &CouplingParams, omega: f64, time: f64) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_snapshot(&mut buf, f, &SnapshotMeta { omega, kappa: p.kappa, gamma: p.gamma, time })?;
    Ok(buf)
}

fn finish(command: &str, inputs: Value, seed: u64, verdicts: Value, artifacts: Vec<(String, Vec<u8>)>, start: Instant) -> RunOutput {
    RunOutput::new(command, inputs, seed, verdicts, artifacts, start.elapsed().as_secs_f64())
}

// ---------------------------------------------------------------------------

pub const REGION_HEADER: [&str; 10] = [
    "kappa", "gamma", "j_region", "k_region", "alpha_plus", "beta_minus", "alpha_minus", "beta_plus", "alpha0", "beta0",
];

/// Region tags and the branch values that belong to the solution set.
pub fn region_row(kappa: f64, gamma: f64) -> Result<Vec<String>> {
    let p = CouplingParams::new(kappa, gamma)?;
    let j = model::classify_j(&p)?;
    let k = model::classify_k(&p)?;
    let mut row = vec![num(kappa), num(gamma), j.to_string(), k.to_string()];
    let mut cells = [None; 6];
    for bp in model::branch_points(&p)? {
        let slot = match bp.kind {
            BranchKind::PlusMinus => 0,
            BranchKind::MinusPlus => 2,
            _ => 4,
        };
        cells[slot] = Some(bp.alpha);
        cells[slot + 1] = Some(bp.beta);
    }
    row.extend(cells.iter().map(|c| opt(*c)));
    Ok(row)
}

fn ranges(cfg: &Config) -> Result<(Range, Range)> {
    let k: Range = cfg.require("kappa")?;
    let g: Range = cfg.require("gamma")?;
    k.validate("kappa")?;
    g.validate("gamma")?;
    if !(g.lo > 0.0 && g.hi > 0.0) {
        return invalid(format!("gamma range must be positive, got {}:{}", g.lo, g.hi));
    }
    Ok((k, g))
}

pub fn regions(cfg: &Config, seed: u64) -> Result<Outcome> {
    let start = Instant::now();
    let (kr, gr) = ranges(cfg)?;
    let mut rows = Vec::new();
    for &k in &kr.points() {
        for &g in &gr.points() {
            rows.push(region_row(k, g)?);
        }
    }
    let table = csv(&REGION_HEADER, &rows);
    let inputs = json!({ "kappa": kr, "gamma": gr });
    let verdicts = json!({ "rows": rows.len() });
    let run = finish("regions", inputs, seed, verdicts, vec![("regions.csv".into(), table.clone().into_bytes())], start);
    Ok(Outcome {
        run,
        header: vec!["rows"],
        row: vec![rows.len().to_string()],
        text: table,
        failure: None,
    })
}

pub fn branch(cfg: &Config, seed: u64) -> Result<Outcome> {
    let start = Instant::now();
    let p = params(cfg)?;
    let j = model::classify_j(&p)?;
    let k = model::classify_k(&p)?;
    let ell = model::ell(&p)?;
    let e1e2 = model::verify_e1e2(&p, cfg.get("branch.resolution", 400)?)?;
    let mut pts = vec![BranchPoint::semitrivial(&p)];
    pts.extend(model::branch_points(&p)?);
    let header = ["kind", "alpha", "beta", "residual_line", "residual_ellipse", "predicted"];
    let mut rows = Vec::new();
    let mut listed = Vec::new();
    for bp in &pts {
        let pred = model::predicted_stability(&p, bp.kind)?.map(|x| x.as_str()).unwrap_or("");
        rows.push(vec![
            kind_name(bp.kind).to_string(),
            num(bp.alpha),
            num(bp.beta),
            num(bp.residual_line),
            num(bp.residual_ellipse),
            pred.to_string(),
        ]);
        listed.push(json!({ "kind": bp.kind, "alpha": bp.alpha, "beta": bp.beta, "predicted": pred }));
    }
    let table = csv(&header, &rows);
    let inputs = json!({ "kappa": p.kappa, "gamma": p.gamma });
    let verdicts = json!({ "j_region": j, "k_region": k, "ell": ell, "e1e2": e1e2, "points": listed });
    let text = format!("J region {j}, K region {k}, ell {ell:.16e}\n{table}");
    let run = finish("branch", inputs, seed, verdicts, vec![("branch.csv".into(), table.into_bytes())], start);
    Ok(Outcome {
        run,
        header: vec!["j_region", "k_region", "branch_count", "ell"],
        row: vec![j.to_string(), k.to_string(), (pts.len() - 1).to_string(), num(ell)],
        text,
        failure: None,
    })
}

pub fn expected_family(k: KRegion) -> Family {
    match k {
        KRegion::K1 => Family::BranchG1,
        KRegion::K2 => Family::SemitrivialG0,
        KRegion::K3 => Family::Both,
    }
}

pub fn ground_state(cfg: &Config, seed: u64) -> Result<Outcome> {
    let start = Instant::now();
    let p = params(cfg)?;
    let w = omega(cfg)?;
    let g = grid(cfg, 512)?;
    let d = NehariOptions::default();
    let opts = NehariOptions {
        max_iter: cfg.get("nehari.max_iter", d.max_iter)?,
        grad_tol: cfg.get("nehari.tol", d.grad_tol)?,
        starts: cfg.get("nehari.starts", d.starts)?,
    };
    let v = ground_state::nehari_minimize_with(&p, w, &g, seed, &opts)?;
    let d_omega = ground_state::d_omega(&p, w, &g)?;
    let k = model::classify_k(&p)?;
    let expected = expected_family(k);
    let inputs = json!({ "kappa": p.kappa, "gamma": p.gamma, "omega": w, "grid": g.spec(), "nehari": opts });
    let verdicts = json!({
        "k_region": k,
        "family": v.family.as_str(),
        "expected_family": expected.as_str(),
        "matches": v.family == expected,
        "match_error": v.match_error,
        "action": v.action_value,
        "d_omega": d_omega,
        "dist_g0": v.dist_g0,
        "dist_g1": v.dist_g1,
        "grad_norm": v.grad_norm,
        "iterations": v.iterations,
        "start_actions": v.start_actions,
    });
    let arts = vec![("fields/minimizer.dat".into(), snapshot(&v.minimizer, &p, w, 0.0)?)];
    let text = format!(
        "K region {k}: family {} (expected {}), match error {:.3e}, action {:.16e}, d(omega) {:.16e}\n",
        v.family.as_str(),
        expected.as_str(),
        v.match_error,
        v.action_value,
        d_omega
    );
    let run = finish("ground-state", inputs, seed, verdicts, arts, start);
    Ok(Outcome {
        run,
        header: vec!["k_region", "family", "expected_family", "match_error", "action", "d_omega"],
        row: vec![
            k.to_string(),
            v.family.as_str().into(),
            expected.as_str().into(),
            num(v.match_error),
            num(v.action_value),
            num(d_omega),
        ],
        text,
        failure: None,
    })
}

pub fn spectrum(cfg: &Config, seed: u64) -> Result<Outcome> {
    let start = Instant::now();
    let w = omega(cfg)?;
    let g = grid(cfg, 512)?;
    let k: usize = cfg.get("spectrum.k", 6)?;
    let operator: String = cfg.get("spectrum.operator", "La".to_string())?;
    let phi = ground_state::scalar_profile(w, &g)?;
    let (disc, disc_json) = if g.dim() == 1 {
        (Discretization::Periodic, json!("periodic"))
    } else {
        let points: usize = cfg.get("spectrum.points", 600)?;
        let r_max: f64 = cfg.get("spectrum.rmax", 30.0 / w.sqrt())?;
        (Discretization::Radial { points, r_max }, json!({ "radial_points": points, "r_max": r_max }))
    };
    let mut inputs = json!({ "omega": w, "grid": g.spec(), "k": k, "operator": operator, "discretization": disc_json });
    let (report, name) = match operator.as_str() {
        "La" => {
            let a: f64 = cfg.require("spectrum.a")?;
            inputs["a"] = json!(a);
            let op = spectra::assemble_la(a, &phi, disc)?;
            let s = spectra::eig_low(&op, k)?;
            let params = OperatorParams { a: Some(a), ..Default::default() };
            (SpectrumReport::new("La", &op.mesh, w, params, &s), format!("L_{a}"))
        }
        "LR" | "LI" => {
            let p = params(cfg)?;
            let branch: String = cfg.get("state.branch", "plus_minus".to_string())?;
            let bp = select_branch(&p, &branch)?;
            inputs["kappa"] = json!(p.kappa);
            inputs["gamma"] = json!(p.gamma);
            inputs["branch"] = json!(branch);
            let (lr, li) = spectra::assemble_blocks(&bp, &p, &phi, disc)?;
            let op = if operator == "LR" { lr } else { li };
            let s = spectra::eig_low(&op, k)?;
            let params = OperatorParams {
                kappa: Some(p.kappa),
                gamma: Some(p.gamma),
                alpha: Some(bp.alpha),
                beta: Some(bp.beta),
                a: None,
            };
            (SpectrumReport::new(&operator, &op.mesh, w, params, &s), format!("{operator} at {branch}"))
        }
        other => return invalid(format!("unknown operator {other:?}; use La, LR or LI")),
    };
    let mut body = serde_json::to_vec_pretty(&report)?;
    body.push(b'\n');
    let verdicts = json!({
        "eigenvalues": report.eigenvalues,
        "negative_count": report.negative_count,
        "kernel_dim": report.kernel_dim,
        "max_residual": report.residuals.iter().cloned().fold(0.0, f64::max),
    });
    let text = format!(
        "{name}: negative {}, kernel {}, lowest {:?}\n",
        report.negative_count, report.kernel_dim, report.eigenvalues
    );
    let row = vec![
        operator.clone(),
        report.negative_count.to_string(),
        report.kernel_dim.to_string(),
        num(report.eigenvalues[0]),
    ];
    let run = finish("spectrum", inputs, seed, verdicts, vec![("spectrum.json".into(), body)], start);
    Ok(Outcome {
        run,
        header: vec!["operator", "negative_count", "kernel_dim", "lowest"],
        row,
        text,
        failure: None,
    })
}

fn profile_checked(w: f64, g: &Grid) -> Result<ground_state::ScalarProfile> {
    let phi = ground_state::scalar_profile(w, g)?;
    phi.certify()?;
    let tail = phi.tail_mass();
    if !(tail < TAIL_MASS_TOL) {
        return invalid(format!(
            "profile tail mass {tail:e} exceeds {TAIL_MASS_TOL:e}; enlarge grid.L (now {})",
            g.extent()
        ));
    }
    Ok(phi)
}

fn series_verdicts(s: &TrajectorySeries) -> Value {
    json!({
        "energy_drift": TrajectorySeries::max_relative_drift(&s.energy),
        "charge_drift": TrajectorySeries::max_relative_drift(&s.charge),
        "final_orbital_dist": s.orbital_dist.last(),
        "aborted_at": s.aborted_at,
        "far_shift": s.far_shift,
    })
}

pub fn evolve(cfg: &Config, seed: u64) -> Result<Outcome> {
    let start = Instant::now();
    let p = params(cfg)?;
    let w = omega(cfg)?;
    let g = grid(cfg, 1024)?;
    let ecfg = evolution_cfg(cfg, 20.0, 1e-3)?;
    let branch: String = cfg.get("state.branch", "semitrivial".to_string())?;
    let delta: f64 = cfg.get("perturb.delta", 0.0)?;
    let direction: Direction = cfg.get("perturb.direction", Direction::RandomEven)?;
    if !(delta >= 0.0 && delta.is_finite()) {
        return invalid(format!("perturb.delta must be >= 0, got {delta}"));
    }
    let bp = select_branch(&p, &branch)?;
    let phi = profile_checked(w, &g)?;
    let target = ProbeTarget { grid: &g, profile: &phi.values, alpha: bp.alpha, beta: bp.beta };
    let base = target.state();
    let u0 = if delta > 0.0 {
        base.axpy(delta, &evolution::perturbation(&target, direction, seed)?)
    } else {
        base.clone()
    };
    let (series, last) = evolution::evolve(&u0, &p, &ecfg, Some(&base))?;
    let inputs = json!({
        "kappa": p.kappa, "gamma": p.gamma, "omega": w, "grid": g.spec(), "cfg": ecfg,
        "branch": branch, "perturb": { "delta": delta, "direction": direction },
    });
    let verdicts = series_verdicts(&series);
    let t_end = *series.times.last().unwrap_or(&0.0);
    let arts = vec![
        ("series.csv".into(), series.to_csv().into_bytes()),
        ("fields/initial.dat".into(), snapshot(&u0, &p, w, 0.0)?),
        ("fields/final.dat".into(), snapshot(&last, &p, w, t_end)?),
    ];
    let failure = series.aborted_at.map(|t| format!("nan_abort: non-finite state after t = {t}"));
    let text = format!(
        "energy drift {:.3e}, charge drift {:.3e}, final orbit distance {}\n",
        verdicts["energy_drift"].as_f64().unwrap_or(f64::NAN),
        verdicts["charge_drift"].as_f64().unwrap_or(f64::NAN),
        series.orbital_dist.last().map_or("n/a".into(), |d| format!("{d:.3e}")),
    );
    let row = vec![
        num(TrajectorySeries::max_relative_drift(&series.energy)),
        num(TrajectorySeries::max_relative_drift(&series.charge)),
        opt(series.orbital_dist.last().copied()),
        if failure.is_some() { "nan_abort".into() } else { "ok".into() },
    ];
    let run = finish("evolve", inputs, seed, verdicts, arts, start);
    Ok(Outcome {
        run,
        header: vec!["energy_drift", "charge_drift", "final_orbital_dist", "outcome"],
        row,
        text,
        failure,
    })
}

pub fn probe(cfg: &Config, seed: u64) -> Result<Outcome> {
    let start = Instant::now();
    let p = params(cfg)?;
    let w = omega(cfg)?;
    let g = grid(cfg, 1024)?;
    let ecfg = evolution_cfg(cfg, 100.0, 0.01 / w)?;
    let branch: String = cfg.get("state.branch", "semitrivial".to_string())?;
    let delta: f64 = cfg.get("perturb.delta", 1e-3)?;
    let direction: Direction = cfg.get("perturb.direction", Direction::RandomEven)?;
    let bp = select_branch(&p, &branch)?;
    let phi = profile_checked(w, &g)?;
    let target = ProbeTarget { grid: &g, profile: &phi.values, alpha: bp.alpha, beta: bp.beta };
    let (v, series) = evolution::stability_probe(&target, &p, w, delta, direction, &ecfg, seed)?;
    let predicted = model::predicted_stability(&p, bp.kind)?.map(|x| x.as_str()).unwrap_or("");
    let u0 = target.state().axpy(delta, &evolution::perturbation(&target, direction, seed)?);
    let inputs = json!({
        "kappa": p.kappa, "gamma": p.gamma, "omega": w, "grid": g.spec(), "cfg": ecfg,
        "branch": branch, "perturb": { "delta": delta, "direction": direction },
    });
    let mut verdicts = serde_json::to_value(&v)?;
    verdicts["verdict"] = json!(v.verdict.as_str());
    verdicts["predicted"] = json!(predicted);
    verdicts["far_shift"] = json!(series.far_shift);
    verdicts["growth_factor"] = json!(evolution::GROWTH_FACTOR);
    verdicts["bounded_factor"] = json!(evolution::BOUNDED_FACTOR);
    verdicts["energy_drift"] = json!(TrajectorySeries::max_relative_drift(&series.energy));
    let arts = vec![
        ("series.csv".into(), series.to_csv().into_bytes()),
        ("fields/initial.dat".into(), snapshot(&u0, &p, w, 0.0)?),
    ];
    let text = format!(
        "{branch} at (κ={}, γ={}): {} (predicted {}), max distance {:.3e}, growth time {}\n",
        p.kappa,
        p.gamma,
        v.verdict.as_str(),
        if predicted.is_empty() { "n/a" } else { predicted },
        v.max_dist,
        v.growth_time.map_or("none".into(), |t| format!("{t}")),
    );
    let row = vec![
        branch.clone(),
        serde_json::to_value(direction)?.as_str().unwrap_or("").to_string(),
        v.verdict.as_str().into(),
        predicted.into(),
        num(v.max_dist),
        opt(v.growth_time),
    ];
    let run = finish("probe", inputs, seed, verdicts, arts, start);
    Ok(Outcome {
        run,
        header: vec!["branch", "direction", "verdict", "predicted", "max_dist", "growth_time"],
        row,
        text,
        failure: None,
    })
}

pub const DIAGRAM_HEADER: [&str; 8] = [
    "gamma", "alpha_plus", "beta_minus", "alpha_minus", "beta_plus", "alpha0", "beta0", "stability",
];

/// Branch values along a `γ` line at fixed `κ`, with the known stability of
/// every standing wave that exists there.
pub fn diagram_rows(kappa: f64, gammas: &[f64]) -> Result<Vec<Vec<String>>> {
    let mut rows = Vec::new();
    for &g in gammas {
        let p = CouplingParams::new(kappa, g)?;
        let region = region_row(kappa, g)?;
        let mut tags = Vec::new();
        for kind in [BranchKind::Semitrivial, BranchKind::PlusMinus, BranchKind::MinusPlus, BranchKind::Degenerate] {
            if let Some(pred) = model::predicted_stability(&p, kind)? {
                tags.push(format!("{}={}", kind_name(kind), pred.as_str()));
            }
        }
        let mut row = vec![num(g)];
        row.extend(region[4..].iter().cloned());
        row.push(tags.join(";"));
        rows.push(row);
    }
    Ok(rows)
}

pub fn diagram(cfg: &Config, seed: u64) -> Result<Outcome> {
    let start = Instant::now();
    let kappa: f64 = cfg.require("kappa")?;
    let gr: Range = cfg.require("gamma")?;
    gr.validate("gamma")?;
    if !(gr.lo > 0.0) {
        return invalid(format!("gamma range must be positive, got lo = {}", gr.lo));
    }
    let rows = diagram_rows(kappa, &gr.points())?;
    let table = csv(&DIAGRAM_HEADER, &rows);
    let inputs = json!({ "kappa": kappa, "gamma": gr });
    let gpm = if kappa != 0.0 && kappa.abs() < 1.0 / std::f64::consts::SQRT_2 {
        model::gamma_pm(kappa).ok()
    } else {
        None
    };
    let verdicts = json!({ "rows": rows.len(), "gamma_pm": gpm });
    let run = finish("diagram", inputs, seed, verdicts, vec![("diagram.csv".into(), table.clone().into_bytes())], start);
    Ok(Outcome {
        run,
        header: vec!["rows"],
        row: vec![rows.len().to_string()],
        text: table,
        failure: None,
    })
}

/// Dispatch a single-point or table command by name.
pub fn run(command: &str, cfg: &Config, seed: u64) -> Result<Outcome> {
    match command {
        "regions" => regions(cfg, seed),
        "branch" => branch(cfg, seed),
        "ground-state" => ground_state(cfg, seed),
        "spectrum" => spectrum(cfg, seed),
        "evolve" => evolve(cfg, seed),
        "probe" => probe(cfg, seed),
        "diagram" => diagram(cfg, seed),
        _ => invalid(format!("unknown command {command:?}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn region_row_examples() {
        let r = region_row(1.0, 0.8).unwrap();
        assert_eq!(&r[2..4], ["J2", "K1"]);
        assert!(r[4..8].iter().all(|c| !c.is_empty()));
        assert!(r[8..].iter().all(|c| c.is_empty()));
        assert!(region_row(0.0, 0.0).is_err());
    }

    #[test]
    fn diagram_near_bifurcation() {
        let rows = diagram_rows(-0.5, &[0.9, 1.0 + 1e-6, 1.2]).unwrap();
        assert!(rows[0][1].is_empty());
        let a: f64 = rows[1][1].parse().unwrap();
        assert!(a > 0.0 && a < 1e-2, "{a}");
        let rows = diagram_rows(0.5, &[0.8, 0.86, 1.0 - 1e-6]).unwrap();
        assert!(rows[0][1].is_empty() && rows[0][3].is_empty());
        let am: f64 = rows[2][3].parse().unwrap();
        assert!(am < 1e-2, "{am}");
    }
}
