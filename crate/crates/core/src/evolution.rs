//! Strang-split pseudospectral time stepping and stability probes.
//!
//! The linear part is exact in Fourier space. The nonlinear part
//! `d/dt u1 = i(κ|u1|u1 + γ conj(u1) u2)`, `d/dt u2 = i(2|u2|u2 + γ u1²)`
//! exchanges mass between the components, so it is integrated pointwise with
//! classical RK4 substeps.

use std::fmt::Write as _;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::field::{self, dealias_mask, Field2};
use crate::grid::{Grid, C64};
use crate::model::CouplingParams;
use crate::orbit::{OrbitFit, OrbitReference};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolutionConfig {
    pub dt: f64,
    pub t_final: f64,
    pub nonlinear_substeps: usize,
    pub monitor_stride: usize,
    pub dealias: bool,
}

impl EvolutionConfig {
    /// Defaults for a given frequency: `dt = 0.01 / omega`.
    pub fn for_omega(omega: f64, t_final: f64) -> Self {
        EvolutionConfig {
            dt: 0.01 / omega,
            t_final,
            nonlinear_substeps: 1,
            monitor_stride: 10,
            dealias: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return domain(format!("dt must be > 0, got {}", self.dt));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return domain(format!("t_final must be > 0, got {}", self.t_final));
        }
        if self.nonlinear_substeps == 0 || self.monitor_stride == 0 {
            return domain("nonlinear_substeps and monitor_stride must be >= 1");
        }
        Ok(())
    }

    pub fn total_steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }
}

/// Precomputed propagator for a fixed grid, coupling and step.
#[derive(Debug, Clone)]
pub struct SplitStep {
    grid: Grid,
    params: CouplingParams,
    dt: f64,
    substeps: usize,
    half: (Vec<C64>, Vec<C64>),
    full: (Vec<C64>, Vec<C64>),
    mask: Option<Vec<bool>>,
}

impl SplitStep {
    /// `dt` may be negative (backward stepping).
    pub fn new(grid: &Grid, params: CouplingParams, dt: f64, substeps: usize, dealias: bool) -> Result<Self> {
        if !dt.is_finite() || dt == 0.0 {
            return domain(format!("dt must be finite and nonzero, got {dt}"));
        }
        if substeps == 0 {
            return domain("nonlinear_substeps must be >= 1");
        }
        let mult = |c: f64, tau: f64| -> Vec<C64> {
            grid.k2().iter().map(|k2| C64::from_polar(1.0, -c * k2 * tau)).collect()
        };
        Ok(SplitStep {
            grid: grid.clone(),
            params,
            dt,
            substeps,
            half: (mult(1.0, 0.5 * dt), mult(2.0, 0.5 * dt)),
            full: (mult(1.0, dt), mult(2.0, dt)),
            mask: dealias.then(|| dealias_mask(grid)),
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn linear(&self, f: &mut Field2, m: &(Vec<C64>, Vec<C64>)) {
        for (u, mul) in [(&mut f.u1, &m.0), (&mut f.u2, &m.1)] {
            self.grid.forward(u);
            for (z, e) in u.iter_mut().zip(mul) {
                *z *= e;
            }
            if let Some(mask) = &self.mask {
                for (z, keep) in u.iter_mut().zip(mask) {
                    if !keep {
                        *z = C64::new(0.0, 0.0);
                    }
                }
            }
            self.grid.inverse(u);
        }
    }

    fn nonlinear(&self, f: &mut Field2) {
        let (k, g) = (self.params.kappa, self.params.gamma);
        let h = self.dt / self.substeps as f64;
        let i = C64::new(0.0, 1.0);
        let rhs = |a: C64, b: C64| -> (C64, C64) {
            (
                i * (a * (k * a.norm_sqr().sqrt()) + a.conj() * b * g),
                i * (b * (2.0 * b.norm_sqr().sqrt()) + a * a * g),
            )
        };
        for (a, b) in f.u1.iter_mut().zip(f.u2.iter_mut()) {
            let (mut x, mut y) = (*a, *b);
            for _ in 0..self.substeps {
                let (k1x, k1y) = rhs(x, y);
                let (k2x, k2y) = rhs(x + k1x * (0.5 * h), y + k1y * (0.5 * h));
                let (k3x, k3y) = rhs(x + k2x * (0.5 * h), y + k2y * (0.5 * h));
                let (k4x, k4y) = rhs(x + k3x * h, y + k3y * h);
                x += (k1x + (k2x + k3x) * 2.0 + k4x) * (h / 6.0);
                y += (k1y + (k2y + k3y) * 2.0 + k4y) * (h / 6.0);
            }
            *a = x;
            *b = y;
        }
    }

    /// One Strang step: half linear, full nonlinear, half linear.
    pub fn step(&self, f: &Field2) -> Field2 {
        let mut out = f.clone();
        self.linear(&mut out, &self.half);
        self.nonlinear(&mut out);
        self.linear(&mut out, &self.half);
        out
    }

    /// `steps` Strang steps with the interior half steps fused.
    pub fn advance(&self, f: &mut Field2, steps: usize) {
        if steps == 0 {
            return;
        }
        self.linear(f, &self.half);
        for s in 0..steps {
            self.nonlinear(f);
            if s + 1 < steps {
                self.linear(f, &self.full);
            }
        }
        self.linear(f, &self.half);
    }
}

/// One Strang step of size `cfg.dt`.
pub fn step(f: &Field2, p: &CouplingParams, cfg: &EvolutionConfig) -> Result<Field2> {
    let s = SplitStep::new(&f.grid, *p, cfg.dt, cfg.nonlinear_substeps, cfg.dealias)?;
    let out = s.step(f);
    if out.check_finite().is_err() {
        return Err(Error::NanAbort { last_good_time: 0.0 });
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySeries {
    pub times: Vec<f64>,
    pub energy: Vec<f64>,
    pub charge: Vec<f64>,
    pub mass1: Vec<f64>,
    pub mass2: Vec<f64>,
    pub orbital_dist: Vec<f64>,
    pub theta_track: Vec<f64>,
    /// Set when the run stopped on a non-finite state; holds the last time
    /// at which the state was finite.
    pub aborted_at: Option<f64>,
    /// Some sample had its orbit shift beyond a quarter of the box.
    pub far_shift: bool,
}

impl TrajectorySeries {
    fn push(&mut self, t: f64, f: &Field2, p: &CouplingParams, fit: Option<&OrbitFit>) {
        let (m1, m2) = f.masses();
        self.times.push(t);
        self.energy.push(field::energy(f, p));
        self.charge.push(0.5 * (m1 + m2));
        self.mass1.push(m1);
        self.mass2.push(m2);
        self.orbital_dist.push(fit.map_or(f64::NAN, |x| x.distance));
        self.theta_track.push(fit.map_or(f64::NAN, |x| x.theta));
        if fit.is_some_and(|x| x.far_shift) {
            self.far_shift = true;
        }
    }

    pub fn max_relative_drift(values: &[f64]) -> f64 {
        let Some(&v0) = values.first() else { return 0.0 };
        let scale = v0.abs().max(f64::MIN_POSITIVE);
        values.iter().map(|v| (v - v0).abs() / scale).fold(0.0, f64::max)
    }

    /// CSV with header; missing values are empty cells.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("time,energy,charge,mass1,mass2,orbital_dist,theta_track\n");
        let cell = |v: f64| if v.is_nan() { String::new() } else { format!("{v:.16e}") };
        for i in 0..self.times.len() {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                cell(self.times[i]),
                cell(self.energy[i]),
                cell(self.charge[i]),
                cell(self.mass1[i]),
                cell(self.mass2[i]),
                cell(self.orbital_dist[i]),
                cell(self.theta_track[i]),
            );
        }
        s
    }
}

/// Integrate to `cfg.t_final`, sampling every `monitor_stride` steps. On a
/// non-finite state the partial series is returned with `aborted_at` set,
/// together with the last finite field.
pub fn evolve(
    f: &Field2,
    p: &CouplingParams,
    cfg: &EvolutionConfig,
    reference: Option<&Field2>,
) -> Result<(TrajectorySeries, Field2)> {
    evolve_until(f, p, cfg, reference, |_, _| false)
}

/// As [`evolve`], stopping early once `stop(t, fit)` returns true.
pub fn evolve_until<S>(
    f: &Field2,
    p: &CouplingParams,
    cfg: &EvolutionConfig,
    reference: Option<&Field2>,
    mut stop: S,
) -> Result<(TrajectorySeries, Field2)>
where
    S: FnMut(f64, Option<&OrbitFit>) -> bool,
{
    cfg.validate()?;
    f.check_finite()?;
    if let Some(r) = reference {
        f.same_grid(r)?;
    }
    let prop = SplitStep::new(&f.grid, *p, cfg.dt, cfg.nonlinear_substeps, cfg.dealias)?;
    let orbit = reference.map(|r| OrbitReference::new(r, 1.0));
    let total = cfg.total_steps();
    let mut series = TrajectorySeries::default();
    let mut state = f.clone();
    let fit0 = orbit.as_ref().map(|o| o.fit(&state)).transpose()?;
    series.push(0.0, &state, p, fit0.as_ref());
    if stop(0.0, fit0.as_ref()) {
        return Ok((series, state));
    }
    let mut done = 0;
    while done < total {
        let m = cfg.monitor_stride.min(total - done);
        let mut next = state.clone();
        prop.advance(&mut next, m);
        let t = (done + m) as f64 * cfg.dt;
        if next.check_finite().is_err() {
            series.aborted_at = Some(done as f64 * cfg.dt);
            return Ok((series, state));
        }
        state = next;
        done += m;
        let fit = orbit.as_ref().map(|o| o.fit(&state)).transpose()?;
        series.push(t, &state, p, fit.as_ref());
        if stop(t, fit.as_ref()) {
            break;
        }
    }
    Ok((series, state))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    StableBounded,
    UnstableGrowth,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::StableBounded => "stable_bounded",
            Verdict::UnstableGrowth => "unstable_growth",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    RandomEven,
    PsiFirstComponent,
    PhaseKick,
}

impl std::str::FromStr for Direction {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random_even" => Ok(Direction::RandomEven),
            "psi_first_component" => Ok(Direction::PsiFirstComponent),
            "phase_kick" => Ok(Direction::PhaseKick),
            _ => domain(format!("unknown perturbation direction {s:?}")),
        }
    }
}

/// Verdict gates, in units of the perturbation size.
pub const GROWTH_FACTOR: f64 = 10.0;
pub const BOUNDED_FACTOR: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityVerdict {
    pub verdict: Verdict,
    pub max_dist: f64,
    pub growth_time: Option<f64>,
    pub perturbation_size: f64,
    pub initial_dist: f64,
    pub final_time: f64,
}

/// A standing-wave profile `(alpha phi, beta phi)` built from a real scalar
/// profile `phi` sampled on the grid.
#[derive(Debug, Clone)]
pub struct ProbeTarget<'a> {
    pub grid: &'a Grid,
    pub profile: &'a [f64],
    pub alpha: f64,
    pub beta: f64,
}

impl ProbeTarget<'_> {
    pub fn state(&self) -> Field2 {
        Field2::from_profile(self.grid, self.profile, self.alpha, self.beta)
    }
}

/// Unit perturbation direction. `psi_first_component` is `(phi, 0)` with unit
/// `L^2` norm; the others have unit `X` norm.
pub fn perturbation(target: &ProbeTarget<'_>, direction: Direction, seed: u64) -> Result<Field2> {
    let grid = target.grid;
    let phi = target.profile;
    let zero = C64::new(0.0, 0.0);
    let w = match direction {
        Direction::PsiFirstComponent => {
            let w = Field2::new(grid, phi.iter().map(|&v| C64::new(v, 0.0)).collect(), vec![zero; grid.len()])?;
            let n = w.masses().0.sqrt();
            return Ok(w.scaled(1.0 / n));
        }
        Direction::PhaseKick => {
            // i(-2 beta phi, alpha phi): H-orthogonal to J(alpha phi, beta phi)
            Field2::new(
                grid,
                phi.iter().map(|&v| C64::new(0.0, -2.0 * target.beta * v)).collect(),
                phi.iter().map(|&v| C64::new(0.0, target.alpha * v)).collect(),
            )?
        }
        Direction::RandomEven => random_even(grid, seed),
    };
    let n = w.x_norm();
    if n == 0.0 {
        return domain("perturbation direction vanishes");
    }
    Ok(w.scaled(1.0 / n))
}

/// Smooth, localized field, even under `x -> -x`, with random complex
/// coefficients on a few Gaussian widths in both components.
pub fn random_even(grid: &Grid, seed: u64) -> Field2 {
    const WIDTHS: [f64; 4] = [1.0, 1.5, 2.0, 3.0];
    let mut r = rng::stream(seed, "random_even", 0);
    let mut coef = || C64::new(r.sample(StandardNormal), r.sample(StandardNormal));
    let c1: Vec<C64> = WIDTHS.iter().map(|_| coef()).collect();
    let c2: Vec<C64> = WIDTHS.iter().map(|_| coef()).collect();
    let eval = |c: &[C64], idx: usize| -> C64 {
        let r2 = grid.radius(idx).powi(2);
        c.iter()
            .zip(WIDTHS)
            .map(|(ci, s)| ci * (-0.5 * r2 / (s * s)).exp())
            .sum()
    };
    Field2 {
        grid: grid.clone(),
        u1: (0..grid.len()).map(|i| eval(&c1, i)).collect(),
        u2: (0..grid.len()).map(|i| eval(&c2, i)).collect(),
    }
}

#[allow(clippy::too_many_arguments)]
pub fn stability_probe(
    target: &ProbeTarget<'_>,
    p: &CouplingParams,
    omega: f64,
    delta: f64,
    direction: Direction,
    cfg: &EvolutionConfig,
    seed: u64,
) -> Result<(StabilityVerdict, TrajectorySeries)> {
    if !(1e-4..=1e-2).contains(&delta) {
        return domain(format!("perturbation size must lie in [1e-4, 1e-2], got {delta}"));
    }
    if !(omega > 0.0) {
        return domain(format!("omega must be > 0, got {omega}"));
    }
    cfg.validate()?;
    let base = target.state();
    let w = perturbation(target, direction, seed)?;
    let u0 = base.axpy(delta, &w);
    let threshold = GROWTH_FACTOR * delta;
    let mut growth_time = None;
    let (series, _) = evolve_until(&u0, p, cfg, Some(&base), |t, fit| {
        let hit = fit.is_some_and(|x| x.distance >= threshold);
        if hit {
            growth_time = Some(t);
        }
        hit
    })?;
    if let Some(t) = series.aborted_at {
        return Err(Error::NanAbort { last_good_time: t });
    }
    let max_dist = series.orbital_dist.iter().cloned().fold(0.0, f64::max);
    let verdict = if growth_time.is_some() {
        Verdict::UnstableGrowth
    } else if max_dist <= BOUNDED_FACTOR * delta {
        Verdict::StableBounded
    } else {
        Verdict::Inconclusive
    };
    Ok((
        StabilityVerdict {
            verdict,
            max_dist,
            growth_time,
            perturbation_size: delta,
            initial_dist: series.orbital_dist[0],
            final_time: *series.times.last().unwrap(),
        },
        series,
    ))
}

/// Gauge angle and orbit distance of each snapshot relative to `phi`.
pub fn phase_track(snapshots: &[Field2], phi: &Field2) -> Result<Vec<(f64, f64)>> {
    let orbit = OrbitReference::new(phi, 1.0);
    snapshots
        .iter()
        .map(|s| orbit.fit(s).map(|fit| (fit.theta, fit.distance)))
        .collect()
}
