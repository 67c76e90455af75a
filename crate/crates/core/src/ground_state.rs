//! Scalar soliton profiles, branch states and Nehari-constrained minimization
//! of the action.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::field::{self, Field2, FunctionalReport};
use crate::grid::{Grid, C64};
use crate::model::{self, BranchPoint, CouplingParams};
use crate::ode::{DormandPrince, Tolerance};
use crate::orbit::orbital_distance;
use crate::rng;

/// Certificate tolerance for profile residuals and the Nehari identity.
pub const PROFILE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileMethod {
    ClosedForm1d,
    ShootingRadial,
    ImaginaryTime,
}

/// Radial solution at unit frequency on uniform nodes `r_j = j * dr`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialTable {
    pub dim: usize,
    pub dr: f64,
    pub values: Vec<f64>,
    pub slopes: Vec<f64>,
    /// Number of segments used to carry the decaying solution outward.
    pub segments: usize,
}

#[derive(Debug, Clone)]
pub struct ScalarProfile {
    pub omega: f64,
    pub dim: usize,
    pub grid: Grid,
    pub values: Vec<f64>,
    pub method: ProfileMethod,
    /// Relative residual `||-Δφ + ωφ - φ²|| / ||φ||`. For shooting profiles
    /// this is evaluated on the radial table; otherwise on the grid.
    pub residual: f64,
    /// Relative gap `| ||φ||²_{H¹_ω} - ||φ||³_{L³} | / ||φ||³_{L³}`.
    pub nehari_gap: f64,
    pub radial: Option<RadialTable>,
}

impl ScalarProfile {
    pub fn l2_norm2(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>() * self.grid.cell_volume()
    }

    pub fn l3_cubed(&self) -> f64 {
        self.values.iter().map(|v| v.abs().powi(3)).sum::<f64>() * self.grid.cell_volume()
    }

    /// Spectral residual on the periodic grid.
    pub fn grid_residual(&self) -> f64 {
        grid_residual(&self.grid, &self.values, self.omega)
    }

    /// Fraction of `L^2` mass in the outer shell `max_a |x_a| > 0.4 L`.
    pub fn tail_mass(&self) -> f64 {
        let cut = 0.4 * self.grid.extent();
        let mut outer = 0.0;
        let mut total = 0.0;
        for (idx, v) in self.values.iter().enumerate() {
            let x = self.grid.position(idx);
            let m = v * v;
            total += m;
            if x.iter().any(|c| c.abs() > cut) {
                outer += m;
            }
        }
        outer / total
    }

    pub fn certify(&self) -> Result<()> {
        let min = self.values.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(min > 0.0) {
            return Err(Error::Precondition {
                lemma: "profile positivity",
                detail: format!("minimum {min:e}"),
            });
        }
        if !(self.residual <= PROFILE_TOL && self.nehari_gap <= PROFILE_TOL) {
            return Err(Error::Precondition {
                lemma: "profile certificate",
                detail: format!("residual {:e}, Nehari gap {:e}", self.residual, self.nehari_gap),
            });
        }
        Ok(())
    }
}

/// `(−Δ + ω)^{-1}` applied spectrally.
pub(crate) fn resolvent(grid: &Grid, u: &[C64], omega: f64) -> Vec<C64> {
    let mut d = u.to_vec();
    grid.forward(&mut d);
    for (z, k2) in d.iter_mut().zip(grid.k2()) {
        *z /= omega + k2;
    }
    grid.inverse(&mut d);
    d
}

/// Spectral `−Δu`.
pub(crate) fn neg_laplacian(grid: &Grid, u: &[C64]) -> Vec<C64> {
    let mut d = u.to_vec();
    grid.forward(&mut d);
    for (z, k2) in d.iter_mut().zip(grid.k2()) {
        *z *= k2;
    }
    grid.inverse(&mut d);
    d
}

fn grid_residual(grid: &Grid, phi: &[f64], omega: f64) -> f64 {
    let u: Vec<C64> = phi.iter().map(|&v| C64::new(v, 0.0)).collect();
    let lap = neg_laplacian(grid, &u);
    let (mut num, mut den) = (0.0, 0.0);
    for (l, &v) in lap.iter().zip(phi) {
        let r = l.re + omega * v - v * v;
        num += r * r;
        den += v * v;
    }
    (num / den).sqrt()
}

fn grid_nehari_gap(grid: &Grid, phi: &[f64], omega: f64) -> f64 {
    let u: Vec<C64> = phi.iter().map(|&v| C64::new(v, 0.0)).collect();
    let g = field::grad_norm2(grid, &u);
    let dv = grid.cell_volume();
    let m: f64 = phi.iter().map(|v| v * v).sum::<f64>() * dv;
    let c: f64 = phi.iter().map(|v| v.abs().powi(3)).sum::<f64>() * dv;
    ((g + omega * m) - c).abs() / c
}

/// `φ_ω(x) = (3ω/2) sech²(√ω x / 2)`.
pub fn phi_closed_form_1d(omega: f64, grid: &Grid) -> Result<ScalarProfile> {
    if grid.dim() != 1 {
        return domain(format!("closed-form profile needs a 1-D grid, got dim {}", grid.dim()));
    }
    if !(omega > 0.0 && omega.is_finite()) {
        return domain(format!("omega must be > 0, got {omega}"));
    }
    let s = 0.5 * omega.sqrt();
    let values: Vec<f64> = grid
        .axis()
        .iter()
        .map(|&x| 1.5 * omega / (s * x).cosh().powi(2))
        .collect();
    Ok(ScalarProfile {
        omega,
        dim: 1,
        grid: grid.clone(),
        residual: grid_residual(grid, &values, omega),
        nehari_gap: grid_nehari_gap(grid, &values, omega),
        values,
        method: ProfileMethod::ClosedForm1d,
        radial: None,
    })
}

/// The scalar profile for a grid: closed form in 1-D, radial shooting otherwise.
pub fn scalar_profile(omega: f64, grid: &Grid) -> Result<ScalarProfile> {
    if grid.dim() == 1 {
        phi_closed_form_1d(omega, grid)
    } else {
        phi_radial(omega, grid.dim(), grid)
    }
}

// ---------------------------------------------------------------------------
// radial shooting

const RADIAL_DR: f64 = 0.005;
const MAX_BISECTIONS: usize = 200;
// two bracketing trajectories are trusted while they agree to this level
const SEPARATION_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Fate {
    Under,
    Over,
    Undecided,
}

struct Shooter {
    dim: usize,
    dr: f64,
    nodes: usize,
}

impl Shooter {
    fn rhs(&self) -> impl Fn(f64, &[f64; 2]) -> [f64; 2] + '_ {
        let c = (self.dim - 1) as f64;
        move |r, y| [y[1], y[0] - y[0] * y[0] - c / r * y[1]]
    }

    /// Series solution near the origin for `φ(0) = a`.
    fn taylor(&self, a: f64, r: f64) -> [f64; 2] {
        let d = self.dim as f64;
        let c2 = (a - a * a) / (2.0 * d);
        let c4 = c2 * (1.0 - 2.0 * a) / (4.0 * (d + 2.0));
        let c6 = (c4 * (1.0 - 2.0 * a) - c2 * c2) / (6.0 * (d + 4.0));
        let r2 = r * r;
        [
            a + r2 * (c2 + r2 * (c4 + r2 * c6)),
            r * (2.0 * c2 + r2 * (4.0 * c4 + r2 * 6.0 * c6)),
        ]
    }

    /// Integrate from node `j0` with state `y0`, storing states at nodes,
    /// until the trajectory turns upward, crosses zero, or the table ends.
    fn shoot(&self, j0: usize, y0: [f64; 2], out: &mut Vec<[f64; 2]>) -> Fate {
        out.clear();
        out.push(y0);
        let f = self.rhs();
        let mut dp = DormandPrince::new(Tolerance { rtol: 1e-13, atol: 1e-18 }, 0.25 * self.dr);
        let mut y = y0;
        for j in j0..self.nodes - 1 {
            let r0 = j as f64 * self.dr;
            dp.integrate(&f, r0, &mut y, r0 + self.dr);
            out.push(y);
            if y[0] < 0.0 {
                return Fate::Over;
            }
            if y[1] > 0.0 {
                return Fate::Under;
            }
        }
        Fate::Undecided
    }
}

/// Bisect a scalar shooting parameter between an undershooting `lo` and an
/// overshooting `hi`; returns the two final bracketing trajectories.
fn bisect<F>(mut lo: f64, mut hi: f64, mut fate: F) -> Result<(Vec<[f64; 2]>, Vec<[f64; 2]>)>
where
    F: FnMut(f64, &mut Vec<[f64; 2]>) -> Fate,
{
    let mut t_lo = Vec::new();
    let mut t_hi = Vec::new();
    if fate(lo, &mut t_lo) != Fate::Under || fate(hi, &mut t_hi) != Fate::Over {
        return Err(Error::NonConvergence {
            what: "radial shooting",
            iterations: 0,
            detail: format!("initial bracket [{lo}, {hi}] does not separate the two behaviors"),
        });
    }
    let mut scratch = Vec::new();
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo.min(hi) || mid >= lo.max(hi) {
            return Ok((t_lo, t_hi));
        }
        match fate(mid, &mut scratch) {
            Fate::Under => {
                lo = mid;
                std::mem::swap(&mut t_lo, &mut scratch);
            }
            Fate::Over => {
                hi = mid;
                std::mem::swap(&mut t_hi, &mut scratch);
            }
            Fate::Undecided => {
                std::mem::swap(&mut t_lo, &mut scratch);
                t_hi = t_lo.clone();
                return Ok((t_lo, t_hi));
            }
        }
    }
    Err(Error::NonConvergence {
        what: "radial shooting",
        iterations: MAX_BISECTIONS,
        detail: format!("bracketing interval [{lo:.17e}, {hi:.17e}]"),
    })
}

/// Positive radial solution of `φ'' + (d−1)/r φ' = φ − φ²` (unit frequency)
/// on `[0, r_max]`.
pub fn radial_table(dim: usize, r_max: f64) -> Result<RadialTable> {
    if !(1..=3).contains(&dim) {
        return domain(format!("radial dimension must be 1, 2 or 3, got {dim}"));
    }
    let dr = RADIAL_DR;
    let nodes = (r_max / dr).ceil() as usize + 1;
    let sh = Shooter { dim, dr, nodes };
    let mut values = vec![0.0; nodes];
    let mut slopes = vec![0.0; nodes];

    // stage 0: amplitude at the origin
    let (lo, hi) = bisect(0.5, 20.0, |a, out| {
        let y1 = sh.taylor(a, dr);
        let fate = sh.shoot(1, y1, out);
        out.insert(0, [a, 0.0]);
        fate
    })?;
    let mut start = 0;
    let mut segments = 0;
    let (mut t_lo, mut t_hi) = (lo, hi);
    loop {
        segments += 1;
        let scale = values.first().copied().filter(|v| *v > 0.0).unwrap_or(t_lo[0][0]);
        let common = t_lo.len().min(t_hi.len());
        let mut keep = 1;
        while keep < common && (t_lo[keep][0] - t_hi[keep][0]).abs() <= SEPARATION_TOL * scale {
            keep += 1;
        }
        for j in 0..keep {
            let y = [0.5 * (t_lo[j][0] + t_hi[j][0]), 0.5 * (t_lo[j][1] + t_hi[j][1])];
            values[start + j] = y[0];
            slopes[start + j] = y[1];
        }
        let last = start + keep - 1;
        let at_end = last + 1 >= nodes;
        if at_end || values[last] <= 1e-16 * scale || keep < 8 {
            // fill the remainder with the decaying linear tail
            let (v0, r0) = (values[last], last as f64 * dr);
            let c = (dim as f64 - 1.0) / 2.0;
            for j in last + 1..nodes {
                let r = j as f64 * dr;
                let v = v0 * (r0 / r).powf(c) * (-(r - r0)).exp();
                values[j] = v;
                slopes[j] = -v * (1.0 + c / r);
            }
            break;
        }
        // re-shoot on the slope from the last trusted node
        start = last;
        let phi0 = values[start];
        let s_mid = slopes[start];
        let spread = (t_lo[keep - 1][1] - t_hi[keep - 1][1]).abs().max(1e-12 * s_mid.abs());
        let (s_under, s_over) = (s_mid + 100.0 * spread, s_mid - 100.0 * spread);
        let (a, b) = bisect(s_under, s_over, |s, out| sh.shoot(start, [phi0, s], out))?;
        t_lo = a;
        t_hi = b;
        if segments > 64 {
            break;
        }
    }
    Ok(RadialTable {
        dim,
        dr,
        values,
        slopes,
        segments,
    })
}

impl RadialTable {
    fn curvature(&self, j: usize) -> f64 {
        let v = self.values[j];
        if j == 0 {
            (v - v * v) / self.dim as f64
        } else {
            let r = j as f64 * self.dr;
            v - v * v - (self.dim as f64 - 1.0) / r * self.slopes[j]
        }
    }

    /// Quintic Hermite interpolation at radius `r` (unit frequency).
    pub fn eval(&self, r: f64) -> f64 {
        let x = r / self.dr;
        let j = x.floor() as usize;
        if j + 1 >= self.values.len() {
            return 0.0;
        }
        let t = x - j as f64;
        let h = self.dr;
        let (t2, t3) = (t * t, t * t * t);
        let (t4, t5) = (t3 * t, t3 * t2);
        let h0 = 1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5;
        let h1 = 10.0 * t3 - 15.0 * t4 + 6.0 * t5;
        let h2 = t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5;
        let h3 = -4.0 * t3 + 7.0 * t4 - 3.0 * t5;
        let h4 = 0.5 * (t2 - 3.0 * t3 + 3.0 * t4 - t5);
        let h5 = 0.5 * (t3 - 2.0 * t4 + t5);
        self.values[j] * h0
            + self.values[j + 1] * h1
            + h * (self.slopes[j] * h2 + self.slopes[j + 1] * h3)
            + h * h * (self.curvature(j) * h4 + self.curvature(j + 1) * h5)
    }

    /// Relative residual of the radial equation from 8th-order differences
    /// of the tabulated values, weighted by `r^{d-1}`.
    pub fn residual(&self) -> f64 {
        const D2: [f64; 9] = [
            -1.0 / 560.0,
            8.0 / 315.0,
            -1.0 / 5.0,
            8.0 / 5.0,
            -205.0 / 72.0,
            8.0 / 5.0,
            -1.0 / 5.0,
            8.0 / 315.0,
            -1.0 / 560.0,
        ];
        const D1: [f64; 9] = [
            1.0 / 280.0,
            -4.0 / 105.0,
            1.0 / 5.0,
            -4.0 / 5.0,
            0.0,
            4.0 / 5.0,
            -1.0 / 5.0,
            4.0 / 105.0,
            -1.0 / 280.0,
        ];
        let n = self.values.len();
        let h = self.dr;
        let d = self.dim as f64;
        // even extension through the origin
        let v = |j: isize| self.values[j.unsigned_abs()];
        let (mut num, mut den) = (0.0, 0.0);
        for j in 0..n.saturating_sub(4) {
            let (mut s2, mut s1) = (0.0, 0.0);
            for (m, (c2, c1)) in D2.iter().zip(D1.iter()).enumerate() {
                let vj = v(j as isize + m as isize - 4);
                s2 += c2 * vj;
                s1 += c1 * vj;
            }
            let (lap, w) = if j == 0 {
                (d * s2 / (h * h), 1.0)
            } else {
                let r = j as f64 * h;
                (s2 / (h * h) + (d - 1.0) / r * s1 / h, r.powf(d - 1.0))
            };
            let phi = self.values[j];
            let res = lap - phi + phi * phi;
            let w = if j == 0 { 0.5 * w } else { w };
            num += w * res * res;
            den += w * phi * phi;
        }
        (num / den).sqrt()
    }

    /// Relative gap between `∫(φ'² + φ²) r^{d-1}` and `∫φ³ r^{d-1}` (Simpson).
    pub fn nehari_gap(&self) -> f64 {
        let m = if self.values.len() % 2 == 0 { self.values.len() - 1 } else { self.values.len() };
        let d = self.dim as f64;
        let (mut lhs, mut rhs) = (0.0, 0.0);
        for j in 0..m {
            let w = if j == 0 || j == m - 1 {
                1.0
            } else if j % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let r = j as f64 * self.dr;
            let rw = if self.dim == 1 { 1.0 } else { r.powf(d - 1.0) };
            let (v, s) = (self.values[j], self.slopes[j]);
            lhs += w * rw * (s * s + v * v);
            rhs += w * rw * v * v * v;
        }
        (lhs - rhs).abs() / rhs
    }
}

/// Radial profile by shooting, placed on `grid` via `φ_ω(r) = ω φ_1(√ω r)`.
pub fn phi_radial(omega: f64, dim: usize, grid: &Grid) -> Result<ScalarProfile> {
    if !(omega > 0.0 && omega.is_finite()) {
        return domain(format!("omega must be > 0, got {omega}"));
    }
    if grid.dim() != dim {
        return Err(Error::GridMismatch(format!("profile dim {dim} on a {}-D grid", grid.dim())));
    }
    let corner = 0.5 * grid.extent() * (dim as f64).sqrt();
    let table = radial_table(dim, omega.sqrt() * corner + 1.0)?;
    let s = omega.sqrt();
    let values: Vec<f64> = (0..grid.len())
        .map(|i| omega * table.eval(s * grid.radius(i)))
        .collect();
    Ok(ScalarProfile {
        omega,
        dim,
        grid: grid.clone(),
        // the relative residual scales linearly with ω under the rescaling
        residual: omega * table.residual(),
        nehari_gap: table.nehari_gap(),
        values,
        method: ProfileMethod::ShootingRadial,
        radial: Some(table),
    })
}

/// Scalar profile from the Nehari-projected preconditioned gradient flow on
/// the periodic grid.
pub fn phi_imaginary_time(omega: f64, grid: &Grid) -> Result<ScalarProfile> {
    if !(omega > 0.0 && omega.is_finite()) {
        return domain(format!("omega must be > 0, got {omega}"));
    }
    let w = 1.0 / omega.sqrt();
    let bump: Vec<C64> = (0..grid.len())
        .map(|i| C64::new(1.5 * omega * (-0.5 * (grid.radius(i) / w).powi(2)).exp(), 0.0))
        .collect();
    let start = Field2 {
        grid: grid.clone(),
        u1: vec![C64::new(0.0, 0.0); grid.len()],
        u2: bump,
    };
    // with u1 = 0 the coupled flow is the scalar flow for u2
    let p = CouplingParams { kappa: 0.0, gamma: 1.0 };
    let run = nehari_flow(start, &p, omega, &NehariOptions::default())?;
    let values: Vec<f64> = run.state.u2.iter().map(|z| z.re).collect();
    // recentre on the grid origin, where the other methods place the peak
    let fit = {
        let f = Field2::from_profile(grid, &values, 0.0, 1.0);
        let reference = Field2::from_profile(grid, &gaussian_like(grid, omega), 0.0, 1.0);
        orbital_distance(&f, &reference, 1.0)?
    };
    let neg: Vec<f64> = fit.shift.iter().map(|v| -v).collect();
    let values: Vec<f64> = Field2::from_profile(grid, &values, 0.0, 1.0)
        .translate(&neg)
        .u2
        .iter()
        .map(|z| z.re)
        .collect();
    Ok(ScalarProfile {
        omega,
        dim: grid.dim(),
        grid: grid.clone(),
        residual: grid_residual(grid, &values, omega),
        nehari_gap: grid_nehari_gap(grid, &values, omega),
        values,
        method: ProfileMethod::ImaginaryTime,
        radial: None,
    })
}

fn gaussian_like(grid: &Grid, omega: f64) -> Vec<f64> {
    (0..grid.len())
        .map(|i| (-0.5 * omega * grid.radius(i).powi(2)).exp())
        .collect()
}

// ---------------------------------------------------------------------------
// branch states

/// `(α φ, β φ)` for a certified branch point.
pub fn branch_state(bp: &BranchPoint, phi: &ScalarProfile) -> Result<Field2> {
    if !bp.is_certified() {
        return Err(Error::Precondition {
            lemma: "branch point residuals",
            detail: format!("line {:e}, ellipse {:e}", bp.residual_line, bp.residual_ellipse),
        });
    }
    Ok(Field2::from_profile(&phi.grid, &phi.values, bp.alpha, bp.beta))
}

/// Relative `L^2` residual of the stationary system
/// `−Δu1 + ωu1 = κ|u1|u1 + γ conj(u1) u2`, `−Δu2 + ωu2 = |u2|u2 + (γ/2) u1²`.
pub fn stationary_residual(f: &Field2, p: &CouplingParams, omega: f64) -> f64 {
    let l1 = neg_laplacian(&f.grid, &f.u1);
    let l2 = neg_laplacian(&f.grid, &f.u2);
    let (mut num, mut den) = (0.0, 0.0);
    for j in 0..f.u1.len() {
        let (a, b) = (f.u1[j], f.u2[j]);
        let r1 = l1[j] + a * omega - a * (p.kappa * a.norm_sqr().sqrt()) - a.conj() * b * p.gamma;
        let r2 = l2[j] + b * omega - b * b.norm_sqr().sqrt() - a * a * (0.5 * p.gamma);
        num += r1.norm_sqr() + r2.norm_sqr();
        den += a.norm_sqr() + b.norm_sqr();
    }
    if den == 0.0 {
        return 0.0;
    }
    (num / den).sqrt()
}

// ---------------------------------------------------------------------------
// Nehari minimization

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NehariOptions {
    pub max_iter: usize,
    /// Stop when the projected gradient has `X_ω` norm below this.
    pub grad_tol: f64,
    /// Number of seeded starting fields.
    pub starts: usize,
}

impl Default for NehariOptions {
    fn default() -> Self {
        NehariOptions {
            max_iter: 20_000,
            grad_tol: 1e-7,
            starts: 4,
        }
    }
}

#[derive(Debug, Clone)]
struct FlowResult {
    state: Field2,
    report: FunctionalReport,
    grad_norm: f64,
    iterations: usize,
}

fn nonlinearity(f: &Field2, p: &CouplingParams) -> Field2 {
    let mut n1 = Vec::with_capacity(f.u1.len());
    let mut n2 = Vec::with_capacity(f.u1.len());
    for (a, b) in f.u1.iter().zip(&f.u2) {
        n1.push(a * (p.kappa * a.norm_sqr().sqrt()) + a.conj() * b * p.gamma);
        n2.push(b * b.norm_sqr().sqrt() + a * a * (0.5 * p.gamma));
    }
    Field2 {
        grid: f.grid.clone(),
        u1: n1,
        u2: n2,
    }
}

/// `X_ω` inner product.
fn xw_inner(a: &Field2, b: &Field2, omega: f64) -> f64 {
    let grid = &a.grid;
    let mut s = 0.0;
    for (x, y) in [(&a.u1, &b.u1), (&a.u2, &b.u2)] {
        let mut fx = x.clone();
        let mut fy = y.clone();
        grid.forward(&mut fx);
        grid.forward(&mut fy);
        s += fx
            .iter()
            .zip(&fy)
            .zip(grid.k2())
            .map(|((p, q), k2)| (omega + k2) * (p.re * q.re + p.im * q.im))
            .sum::<f64>();
    }
    s * grid.cell_volume() / grid.len() as f64
}

/// Rescale onto `K_ω = 0`; `None` when `V ≤ 0`.
fn nehari_project(f: &Field2, p: &CouplingParams, omega: f64) -> Option<Field2> {
    let x = f.h1_norm2(omega);
    let v = field::cubic(f, p);
    if !(v > 0.0) || !x.is_finite() {
        return None;
    }
    Some(f.scaled(x / v))
}

fn nehari_flow(start: Field2, p: &CouplingParams, omega: f64, opts: &NehariOptions) -> Result<FlowResult> {
    let grid = start.grid.clone();
    let mut u = nehari_project(&start, p, omega).ok_or_else(|| Error::NonConvergence {
        what: "Nehari minimization",
        iterations: 0,
        detail: "cubic functional not positive at the start".into(),
    })?;
    let gradient = |u: &Field2| -> Field2 {
        let n = nonlinearity(u, p);
        let r = Field2 {
            grid: grid.clone(),
            u1: resolvent(&grid, &n.u1, omega),
            u2: resolvent(&grid, &n.u2, omega),
        };
        u.axpy(-1.0, &r)
    };
    let mut g = gradient(&u);
    let mut tau = 0.5;
    let mut action = u.h1_norm2(omega) / 6.0;
    let mut prev: Option<(Field2, Field2)> = None;
    for it in 0..opts.max_iter {
        let gnorm = xw_inner(&g, &g, omega).max(0.0).sqrt();
        if !gnorm.is_finite() {
            return Err(Error::NonFinite("Nehari gradient".into()));
        }
        if gnorm < opts.grad_tol {
            let report = field::action(&u, p, omega)?;
            return Ok(FlowResult {
                state: u,
                report,
                grad_norm: gnorm,
                iterations: it,
            });
        }
        if let Some((u_old, g_old)) = &prev {
            let s = u.axpy(-1.0, u_old);
            let y = g.axpy(-1.0, g_old);
            let sy = xw_inner(&s, &y, omega);
            if sy > 0.0 {
                tau = (xw_inner(&s, &s, omega) / sy).clamp(0.05, 5.0);
            }
        }
        let mut next = None;
        for _ in 0..40 {
            if let Some(v) = nehari_project(&u.axpy(-tau, &g), p, omega) {
                let a = v.h1_norm2(omega) / 6.0;
                if a <= action * (1.0 + 1e-3) {
                    next = Some((v, a));
                    break;
                }
            }
            tau *= 0.5;
        }
        let Some((v, a)) = next else {
            return Err(Error::NonConvergence {
                what: "Nehari minimization",
                iterations: it,
                detail: format!("no admissible step, gradient norm {gnorm:e}"),
            });
        };
        let g_new = gradient(&v);
        prev = Some((std::mem::replace(&mut u, v), std::mem::replace(&mut g, g_new)));
        action = a;
    }
    let gnorm = xw_inner(&g, &g, omega).sqrt();
    Err(Error::NonConvergence {
        what: "Nehari minimization",
        iterations: opts.max_iter,
        detail: format!("gradient norm {gnorm:e} above {:e}", opts.grad_tol),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    #[serde(rename = "semitrivial_G0")]
    SemitrivialG0,
    #[serde(rename = "branch_G1")]
    BranchG1,
    Both,
}

impl Family {
    pub fn as_str(&self) -> &'static str {
        match self {
            Family::SemitrivialG0 => "semitrivial_G0",
            Family::BranchG1 => "branch_G1",
            Family::Both => "both",
        }
    }
}

/// Relative action gap below which the two families are reported as tied.
pub const FAMILY_TIE_TOL: f64 = 1e-8;
/// Orbit distance within which the minimizer is said to match a family.
pub const FAMILY_MATCH_TOL: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct GroundStateVerdict {
    pub minimizer: Field2,
    pub action_value: f64,
    pub family: Family,
    pub match_error: f64,
    pub dist_g0: f64,
    pub dist_g1: Option<f64>,
    pub report: FunctionalReport,
    pub grad_norm: f64,
    pub iterations: usize,
    /// Actions of all converged starts, in start order.
    pub start_actions: Vec<f64>,
}

/// Closed-form candidate actions `(S(0, φ), S(α₊φ, β₋φ))`.
pub fn candidate_actions(p: &CouplingParams, phi: &ScalarProfile) -> Result<(f64, Option<(BranchPoint, f64)>)> {
    let l3 = phi.l3_cubed();
    let g1 = model::plus_minus_point(p)?.map(|b| (b, (b.alpha * b.alpha + b.beta * b.beta) * l3 / 6.0));
    Ok((l3 / 6.0, g1))
}

/// Seeded starting fields: a Gaussian bump split between the components at
/// angles spread over `[0, π/2]`.
fn seed_field(grid: &Grid, omega: f64, seed: u64, index: usize, starts: usize) -> Field2 {
    let mut r = rng::stream(seed, "nehari_start", index as u64);
    let jitter: f64 = r.gen_range(0.0..1.0);
    let width: f64 = r.gen_range(0.8..1.5) / omega.sqrt();
    let angle = 0.5 * std::f64::consts::PI * (index as f64 + jitter) / starts as f64;
    let (c, s) = (angle.cos(), angle.sin());
    let bump: Vec<f64> = (0..grid.len())
        .map(|i| 1.5 * omega * (-0.5 * (grid.radius(i) / width).powi(2)).exp())
        .collect();
    Field2::from_profile(grid, &bump, c, s)
}

pub fn nehari_minimize_with(
    p: &CouplingParams,
    omega: f64,
    grid: &Grid,
    seed: u64,
    opts: &NehariOptions,
) -> Result<GroundStateVerdict> {
    p.validate()?;
    if !(omega > 0.0 && omega.is_finite()) {
        return domain(format!("omega must be > 0, got {omega}"));
    }
    if opts.starts == 0 {
        return domain("at least one start is required");
    }
    let phi = scalar_profile(omega, grid)?;
    let mut best: Option<FlowResult> = None;
    let mut start_actions = Vec::new();
    for j in 0..opts.starts {
        let mut start = seed_field(grid, omega, seed, j, opts.starts);
        if !(field::cubic(&start, p) > 0.0) {
            // reseed with the positive second-component bump
            start.u1.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
        }
        let run = nehari_flow(start, p, omega, opts)?;
        start_actions.push(run.report.action);
        if best.as_ref().is_none_or(|b| run.report.action < b.report.action) {
            best = Some(run);
        }
    }
    let best = best.expect("at least one start");
    let (s0, g1) = candidate_actions(p, &phi)?;
    let g0_state = Field2::from_profile(grid, &phi.values, 0.0, 1.0);
    let dist_g0 = orbital_distance(&best.state, &g0_state, 1.0)?.distance;
    let dist_g1 = match &g1 {
        Some((bp, _)) => {
            let s = branch_state(bp, &phi)?;
            Some(orbital_distance(&best.state, &s, 1.0)?.distance)
        }
        None => None,
    };
    let (family, match_error) = match (g1, dist_g1) {
        (Some((_, s1)), Some(d1)) if (s1 - s0).abs() < FAMILY_TIE_TOL * s0 => (Family::Both, d1.min(dist_g0)),
        (Some(_), Some(d1)) if d1 < dist_g0 => (Family::BranchG1, d1),
        _ => (Family::SemitrivialG0, dist_g0),
    };
    Ok(GroundStateVerdict {
        action_value: best.report.action,
        minimizer: best.state,
        family,
        match_error,
        dist_g0,
        dist_g1,
        report: best.report,
        grad_norm: best.grad_norm,
        iterations: best.iterations,
        start_actions,
    })
}

pub fn nehari_minimize(p: &CouplingParams, omega: f64, grid: &Grid, seed: u64) -> Result<GroundStateVerdict> {
    nehari_minimize_with(p, omega, grid, seed, &NehariOptions::default())
}

/// Least action over the two candidate families, from the closed forms.
pub fn d_omega(p: &CouplingParams, omega: f64, grid: &Grid) -> Result<f64> {
    p.validate()?;
    let phi = scalar_profile(omega, grid)?;
    let (s0, g1) = candidate_actions(p, &phi)?;
    Ok(g1.map_or(s0, |(_, s1)| s0.min(s1)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_examples() {
        let g = Grid::new(1, 1024, 80.0).unwrap();
        let p = phi_closed_form_1d(1.0, &g).unwrap();
        assert_eq!(p.values[512], 1.5);
        assert!((p.l3_cubed() - 7.2).abs() < 1e-10 * 7.2);
        assert!((p.l2_norm2() - 6.0).abs() < 1e-10 * 6.0);
        p.certify().unwrap();
        let p4 = phi_closed_form_1d(4.0, &g).unwrap();
        assert_eq!(p4.values[512], 6.0);
        p4.certify().unwrap();
        assert!(phi_closed_form_1d(1.0, &Grid::new(2, 64, 20.0).unwrap()).is_err());
    }

    #[test]
    fn radial_1d_matches_closed_form() {
        let t = radial_table(1, 30.0).unwrap();
        for r in [0.0_f64, 0.3, 1.7, 5.0, 12.0, 20.0] {
            let exact = 1.5 / (0.5 * r).cosh().powi(2);
            assert!((t.eval(r) - exact).abs() < 1e-12, "r={r}: {} vs {exact}", t.eval(r));
        }
        assert!(t.residual() < 1e-9, "{}", t.residual());
        assert!(t.nehari_gap() < 1e-9);
    }

    #[test]
    fn radial_profiles_certified() {
        for dim in [2, 3] {
            let t = radial_table(dim, 30.0).unwrap();
            assert!(t.residual() < 1e-9, "dim {dim}: residual {}", t.residual());
            assert!(t.nehari_gap() < 1e-9, "dim {dim}: gap {}", t.nehari_gap());
            assert!(t.values.windows(2).all(|w| w[1] <= w[0] && w[1] > 0.0));
        }
    }

    #[test]
    fn stationary_residuals() {
        let g = Grid::new(1, 1024, 80.0).unwrap();
        let phi = phi_closed_form_1d(1.0, &g).unwrap();
        let p = CouplingParams::new(0.0, 2.0).unwrap();
        let bp = model::branch_points(&p).unwrap()[0];
        let f = branch_state(&bp, &phi).unwrap();
        assert!(stationary_residual(&f, &p, 1.0) < 1e-8);
        let p = CouplingParams::new(-0.7, 0.4).unwrap();
        let f = branch_state(&BranchPoint::semitrivial(&p), &phi).unwrap();
        assert!(stationary_residual(&f, &p, 1.0) < 1e-8);
    }

    #[test]
    fn d_omega_examples() {
        let g = Grid::new(1, 1024, 80.0).unwrap();
        let k2 = CouplingParams::new(0.5, 0.8).unwrap();
        assert!((d_omega(&k2, 1.0, &g).unwrap() - 1.2).abs() < 1e-10);
        let k1 = CouplingParams::new(1.0, 1.0).unwrap();
        assert!((d_omega(&k1, 1.0, &g).unwrap() - (5.0 / 9.0) * 1.2).abs() < 1e-10);
        let r = d_omega(&k2, 4.0, &g).unwrap() / d_omega(&k2, 1.0, &g).unwrap();
        assert!((r - 32.0).abs() < 1e-8);
    }

    #[test]
    fn nehari_families() {
        let g = Grid::new(1, 512, 40.0).unwrap();
        for (k, ga, fam) in [(0.5, 0.8, Family::SemitrivialG0), (1.0, 1.0, Family::BranchG1)] {
            let p = CouplingParams::new(k, ga).unwrap();
            let v = nehari_minimize(&p, 1.0, &g, 7).unwrap();
            let d = d_omega(&p, 1.0, &g).unwrap();
            assert_eq!(v.family, fam);
            assert!(v.match_error < FAMILY_MATCH_TOL);
            assert!((v.action_value - d).abs() < 1e-8 * d);
        }
    }

    #[test]
    fn imaginary_time_matches_closed_form() {
        let g = Grid::new(1, 512, 40.0).unwrap();
        let a = phi_imaginary_time(1.0, &g).unwrap();
        let b = phi_closed_form_1d(1.0, &g).unwrap();
        let err = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(err < 1e-6, "{err}");
        assert!(a.grid_residual() < 1e-6);
    }

    #[test]
    fn radial_profile_on_2d_grid() {
        let g = Grid::new(2, 128, 30.0).unwrap();
        let phi = phi_radial(2.0, 2, &g).unwrap();
        phi.certify().unwrap();
        assert!(phi.grid_residual() < 1e-6, "{}", phi.grid_residual());
        assert!(phi.tail_mass() < 1e-12, "{}", phi.tail_mass());
    }
}
