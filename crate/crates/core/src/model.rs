//! Closed-form parameter algebra of the coupled system.
//!
//! Scaled-soliton stationary states `(alpha * phi, beta * phi)` exist exactly
//! when `(alpha, beta)` lies on both the line `kappa*x + gamma*y = 1` and the
//! ellipse `gamma*x^2 + 2y^2 = 2y` in the open first quadrant. This module
//! classifies the `(kappa, gamma)` plane into the existence regions `J0..J3`
//! and the ground-state regions `K1..K3`, evaluates the branch values, and
//! provides grid-based oracles for the same geometry.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Absolute tolerance used to detect the codimension-one boundary sets
/// `J3` and `K3`.
pub const BOUNDARY_TOL: f64 = 1e-12;

/// Residual tolerance a branch point must satisfy against the line/ellipse.
pub const RESIDUAL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingParams {
    pub kappa: f64,
    pub gamma: f64,
}

impl CouplingParams {
    pub fn new(kappa: f64, gamma: f64) -> Result<Self> {
        let p = CouplingParams { kappa, gamma };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.kappa.is_finite() || !self.gamma.is_finite() {
            return domain(format!("non-finite coupling ({}, {})", self.kappa, self.gamma));
        }
        if self.gamma <= 0.0 {
            return domain(format!("gamma must be > 0, got {}", self.gamma));
        }
        Ok(())
    }

    /// `D = kappa^2 + 2 gamma (gamma - 1)`; the branch formulas need `D >= 0`.
    pub fn discriminant(&self) -> f64 {
        self.kappa * self.kappa + 2.0 * self.gamma * (self.gamma - 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum JRegion {
    J0,
    J1,
    J2,
    J3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KRegion {
    K1,
    K2,
    K3,
}

impl std::fmt::Display for JRegion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:?}", self)
    }
}

impl std::fmt::Display for KRegion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:?}", self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchKind {
    /// `(alpha_+, beta_-)`
    PlusMinus,
    /// `(alpha_-, beta_+)`
    MinusPlus,
    /// `(alpha_0, beta_0)` on `J3`
    Degenerate,
    /// `(0, 1)`, i.e. the state `(0, phi)`
    Semitrivial,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchPoint {
    pub alpha: f64,
    pub beta: f64,
    pub kind: BranchKind,
    pub residual_line: f64,
    pub residual_ellipse: f64,
}

impl BranchPoint {
    fn new(p: &CouplingParams, alpha: f64, beta: f64, kind: BranchKind) -> Self {
        let (residual_line, residual_ellipse) = residuals(p, alpha, beta);
        BranchPoint {
            alpha,
            beta,
            kind,
            residual_line,
            residual_ellipse,
        }
    }

    pub fn semitrivial(p: &CouplingParams) -> Self {
        BranchPoint::new(p, 0.0, 1.0, BranchKind::Semitrivial)
    }

    /// Whether `(alpha, beta)` generates a stationary state for `p`. The
    /// semitrivial point only needs the ellipse equation.
    pub fn is_certified(&self) -> bool {
        let ok_ellipse = self.residual_ellipse.abs() <= RESIDUAL_TOL;
        match self.kind {
            BranchKind::Semitrivial => ok_ellipse && self.alpha == 0.0,
            _ => ok_ellipse && self.residual_line.abs() <= RESIDUAL_TOL,
        }
    }
}

/// Residuals of `(x, y)` against the line and the ellipse.
pub fn residuals(p: &CouplingParams, x: f64, y: f64) -> (f64, f64) {
    (
        p.kappa * x + p.gamma * y - 1.0,
        p.gamma * x * x + 2.0 * y * y - 2.0 * y,
    )
}

fn j3_kappa(gamma: f64) -> f64 {
    (2.0 * gamma * (1.0 - gamma)).sqrt()
}

pub fn classify_j(p: &CouplingParams) -> Result<JRegion> {
    p.validate()?;
    let (k, g) = (p.kappa, p.gamma);
    if (k <= 0.0 && g > 1.0) || (k > 0.0 && g >= 1.0) {
        return Ok(JRegion::J1);
    }
    if g < 1.0 {
        let edge = j3_kappa(g);
        if (k - edge).abs() <= BOUNDARY_TOL {
            return Ok(JRegion::J3);
        }
        if k > edge {
            return Ok(JRegion::J2);
        }
    }
    Ok(JRegion::J0)
}

pub fn classify_k(p: &CouplingParams) -> Result<KRegion> {
    p.validate()?;
    let (k, g) = (p.kappa, p.gamma);
    if k <= 0.0 {
        return Ok(if g > 1.0 { KRegion::K1 } else { KRegion::K2 });
    }
    if k >= 1.0 || g >= 1.0 {
        return Ok(KRegion::K1);
    }
    // 0 < k < 1 and 0 < g < 1: compare with the critical curve in the
    // kappa direction, where kappa_c is explicit.
    let kc = kappa_c(g)?;
    if (k - kc).abs() <= BOUNDARY_TOL {
        Ok(KRegion::K3)
    } else if k > kc {
        // kappa_c decreasing: kappa > kappa_c(gamma) <=> gamma > gamma_c(kappa)
        Ok(KRegion::K1)
    } else {
        Ok(KRegion::K2)
    }
}

/// Critical coupling `kappa_c(gamma) = (gamma + 2) sqrt(1 - gamma) / 2` on `(0, 1)`.
pub fn kappa_c(gamma: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return domain(format!("kappa_c needs 0 < gamma < 1, got {gamma}"));
    }
    Ok(0.5 * (gamma + 2.0) * (1.0 - gamma).sqrt())
}

/// Inverse of [`kappa_c`], by bisection on `(0, 1)`.
pub fn gamma_c(kappa: f64) -> Result<f64> {
    if !(kappa > 0.0 && kappa < 1.0) {
        return domain(format!("gamma_c needs 0 < kappa < 1, got {kappa}"));
    }
    let f = |g: f64| 0.5 * (g + 2.0) * (1.0 - g).sqrt() - kappa;
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    // f(0) = 1 - kappa > 0, f(1) = -kappa < 0
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Both roots of `2 gamma (1 - gamma) = kappa^2`, ascending.
pub fn gamma_pm(kappa: f64) -> Result<(f64, f64)> {
    let kmax = std::f64::consts::FRAC_1_SQRT_2;
    if !(kappa > 0.0 && kappa <= kmax + 1e-15) {
        return domain(format!("gamma_pm needs 0 < kappa <= 1/sqrt(2), got {kappa}"));
    }
    let s = (1.0 - 2.0 * kappa * kappa).max(0.0).sqrt();
    let plus = 0.5 * (1.0 + s);
    // product of the roots is kappa^2 / 2
    let minus = 0.5 * kappa * kappa / plus;
    Ok((minus, plus))
}

/// All four branch values, when `D >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchValues {
    pub alpha_plus: f64,
    pub alpha_minus: f64,
    pub beta_plus: f64,
    pub beta_minus: f64,
    pub alpha0: f64,
    pub beta0: f64,
}

/// Evaluate the closed forms. The `+`/`-` pairs are computed so that the
/// member with cancellation is obtained from the product identities
/// `alpha_+ alpha_- = 2(1 - gamma)/den` and `beta_+ beta_- = gamma/den`.
pub fn branch_values(p: &CouplingParams) -> Option<BranchValues> {
    let (k, g) = (p.kappa, p.gamma);
    let d = p.discriminant();
    if d < 0.0 {
        return None;
    }
    let sd = d.sqrt();
    let den = 2.0 * k * k + g * g * g;
    let s = (2.0 - g) * k;
    let t = g * sd;
    let (alpha_plus, alpha_minus) = if s >= 0.0 {
        let ap = (s + t) / den;
        let am = if s + t != 0.0 { 2.0 * (1.0 - g) / (s + t) } else { 0.0 };
        (ap, am)
    } else {
        let am = (s - t) / den;
        (2.0 * (1.0 - g) / (s - t), am)
    };
    let pp = k * k + g * g;
    let q = k * sd;
    let (beta_plus, beta_minus) = if q >= 0.0 {
        ((pp + q) / den, g / (pp + q))
    } else {
        (g / (pp - q), (pp - q) / den)
    };
    Some(BranchValues {
        alpha_plus,
        alpha_minus,
        beta_plus,
        beta_minus,
        alpha0: s / den,
        beta0: pp / den,
    })
}

/// The set of positive solutions of the line/ellipse system, sorted by
/// ascending `alpha`.
pub fn branch_points(p: &CouplingParams) -> Result<Vec<BranchPoint>> {
    let region = classify_j(p)?;
    let mut out = match region {
        JRegion::J0 => Vec::new(),
        JRegion::J1 => {
            let v = branch_values(p).expect("D >= 0 on J1");
            vec![BranchPoint::new(p, v.alpha_plus, v.beta_minus, BranchKind::PlusMinus)]
        }
        JRegion::J2 => {
            let v = branch_values(p).expect("D >= 0 on J2");
            vec![
                BranchPoint::new(p, v.alpha_plus, v.beta_minus, BranchKind::PlusMinus),
                BranchPoint::new(p, v.alpha_minus, v.beta_plus, BranchKind::MinusPlus),
            ]
        }
        JRegion::J3 => {
            let (k, g) = (p.kappa, p.gamma);
            let den = 2.0 * k * k + g * g * g;
            vec![BranchPoint::new(
                p,
                (2.0 - g) * k / den,
                (k * k + g * g) / den,
                BranchKind::Degenerate,
            )]
        }
    };
    out.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));
    Ok(out)
}

/// The `(alpha_+, beta_-)` point when it belongs to the solution set.
pub fn plus_minus_point(p: &CouplingParams) -> Result<Option<BranchPoint>> {
    Ok(branch_points(p)?
        .into_iter()
        .find(|b| matches!(b.kind, BranchKind::PlusMinus | BranchKind::Degenerate)))
}

/// The `(alpha_-, beta_+)` point (exists only on `J2`).
pub fn minus_plus_point(p: &CouplingParams) -> Result<Option<BranchPoint>> {
    Ok(branch_points(p)?
        .into_iter()
        .find(|b| b.kind == BranchKind::MinusPlus))
}

/// Independent oracle for [`branch_points`]: parameterise the right half of
/// the ellipse, locate sign changes and interior extrema of the line
/// residual, and refine by bisection / golden-section search.
pub fn branch_points_bruteforce(p: &CouplingParams, resolution: usize) -> Vec<(f64, f64)> {
    use std::f64::consts::FRAC_PI_2;
    let res = resolution.max(100);
    let (k, g) = (p.kappa, p.gamma);
    let a = 1.0 / (2.0 * g).sqrt();
    let point = |t: f64| (a * t.cos(), 0.5 + 0.5 * t.sin());
    let r = |t: f64| {
        let (x, y) = point(t);
        k * x + g * y - 1.0
    };
    let ts: Vec<f64> = (0..=res)
        .map(|j| -FRAC_PI_2 + std::f64::consts::PI * j as f64 / res as f64)
        .collect();
    let rs: Vec<f64> = ts.iter().map(|&t| r(t)).collect();

    let bisect = |mut lo: f64, mut hi: f64| -> f64 {
        let mut rlo = r(lo);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let rm = r(mid);
            if rm == 0.0 {
                return mid;
            }
            if (rm < 0.0) == (rlo < 0.0) {
                lo = mid;
                rlo = rm;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    // golden-section search for an extremum of sign `s` (s=+1 max, -1 min)
    let extremum = |lo: f64, hi: f64, s: f64| -> f64 {
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        let (mut a0, mut b0) = (lo, hi);
        let mut c = b0 - phi * (b0 - a0);
        let mut d = a0 + phi * (b0 - a0);
        for _ in 0..200 {
            if s * r(c) > s * r(d) {
                b0 = d;
            } else {
                a0 = c;
            }
            c = b0 - phi * (b0 - a0);
            d = a0 + phi * (b0 - a0);
            if (b0 - a0).abs() < 1e-15 {
                break;
            }
        }
        0.5 * (a0 + b0)
    };

    let mut roots: Vec<f64> = Vec::new();
    let interior = |t: f64| t > -FRAC_PI_2 && t < FRAC_PI_2;
    for j in 0..res {
        let (t0, t1) = (ts[j], ts[j + 1]);
        let (r0, r1) = (rs[j], rs[j + 1]);
        if r0 == 0.0 && interior(t0) {
            roots.push(t0);
        }
        if r0 * r1 < 0.0 {
            roots.push(bisect(t0, t1));
        }
    }
    // Interior extrema whose neighbours share a sign may hide a pair of
    // roots (or a tangency) between samples.
    for j in 1..res {
        let (rm, r0, rp) = (rs[j - 1], rs[j], rs[j + 1]);
        let is_max = r0 >= rm && r0 >= rp;
        let is_min = r0 <= rm && r0 <= rp;
        if !(is_max || is_min) {
            continue;
        }
        let s = if is_max { 1.0 } else { -1.0 };
        let te = extremum(ts[j - 1], ts[j + 1], s);
        let re = r(te);
        if re.abs() <= 1e-13 {
            if roots.iter().all(|&t| (t - te).abs() > 1e-6) && interior(te) {
                roots.push(te);
            }
        } else if (re > 0.0) != (r0 > 0.0) {
            // sign flip inside the bracket: two simple roots
            for (lo, hi) in [(ts[j - 1], te), (te, ts[j + 1])] {
                if r(lo) * r(hi) < 0.0 {
                    let t = bisect(lo, hi);
                    if roots.iter().all(|&u| (u - t).abs() > 1e-12) {
                        roots.push(t);
                    }
                }
            }
        }
    }
    let mut pts: Vec<(f64, f64)> = roots
        .into_iter()
        .map(point)
        .filter(|&(x, y)| x > 0.0 && y > 0.0)
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts.dedup_by(|a, b| (a.0 - b.0).abs() < 1e-9 && (a.1 - b.1).abs() < 1e-9);
    pts
}

/// `alpha_+^2 + beta_-^2` on `K1`, and `1` on `K2 ∪ K3`.
pub fn ell(p: &CouplingParams) -> Result<f64> {
    match classify_k(p)? {
        KRegion::K1 => {
            let v = branch_values(p).expect("K1 is contained in J1 ∪ J2");
            Ok(v.alpha_plus * v.alpha_plus + v.beta_minus * v.beta_minus)
        }
        KRegion::K2 | KRegion::K3 => Ok(1.0),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum E1E2 {
    Empty,
    Singleton { x: f64, y: f64 },
}

/// Membership tolerance for [`verify_e1e2`].
pub const E1E2_TOL: f64 = 1e-9;

/// Scan `(0, sqrt(ell)]^2` for points of
/// `E1 = {kappa x + gamma y >= 1}` ∩ `E2 = {gamma x^2 + 2y^2 >= 2y, x^2 + y^2 <= ell}`
/// and refine the best candidate by Levenberg–Marquardt on the hinge
/// residuals. A refined point pinned to the `x` floor of the scan (first
/// grid column) lies on the boundary of the open quadrant and is rejected.
pub fn verify_e1e2(p: &CouplingParams, resolution: usize) -> Result<E1E2> {
    let l = ell(p)?;
    let res = resolution.max(200);
    let side = l.sqrt();
    let floor = side / res as f64;
    let (k, g) = (p.kappa, p.gamma);
    let cons = |x: f64, y: f64| -> [f64; 3] {
        [
            1.0 - k * x - g * y,
            2.0 * y - g * x * x - 2.0 * y * y,
            x * x + y * y - l,
        ]
    };
    let violation = |x: f64, y: f64| -> f64 {
        cons(x, y).iter().map(|c| c.max(0.0).powi(2)).sum::<f64>()
    };
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for i in 1..=res {
        for j in 1..=res {
            let x = side * i as f64 / res as f64;
            let y = side * j as f64 / res as f64;
            let v = violation(x, y);
            if v < best.0 {
                best = (v, x, y);
            }
        }
    }
    let (_, mut x, mut y) = best;
    let mut mu = 1e-3;
    for _ in 0..500 {
        let c = cons(x, y);
        // Jacobian rows of the active hinge residuals
        let grads = [[-k, -g], [-2.0 * g * x, 2.0 - 4.0 * y], [2.0 * x, 2.0 * y]];
        let (mut jtj, mut jtr) = ([[0.0; 2]; 2], [0.0; 2]);
        for (ci, gi) in c.iter().zip(grads.iter()) {
            if *ci > 0.0 {
                for a in 0..2 {
                    jtr[a] += gi[a] * ci;
                    for b in 0..2 {
                        jtj[a][b] += gi[a] * gi[b];
                    }
                }
            }
        }
        if jtr[0] == 0.0 && jtr[1] == 0.0 {
            break;
        }
        let v0 = violation(x, y);
        let mut improved = false;
        for _ in 0..40 {
            let m = [[jtj[0][0] + mu, jtj[0][1]], [jtj[1][0], jtj[1][1] + mu]];
            let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
            let dx = -(m[1][1] * jtr[0] - m[0][1] * jtr[1]) / det;
            let dy = -(-m[1][0] * jtr[0] + m[0][0] * jtr[1]) / det;
            let (nx, ny) = ((x + dx).max(floor), (y + dy).max(0.0));
            if violation(nx, ny) < v0 {
                x = nx;
                y = ny;
                mu = (mu * 0.3).max(1e-15);
                improved = true;
                break;
            }
            mu *= 10.0;
        }
        if !improved {
            break;
        }
    }
    let worst = cons(x, y).iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if worst <= E1E2_TOL && x > floor * (1.0 + 1e-9) && y > 0.0 {
        Ok(E1E2::Singleton { x, y })
    } else {
        Ok(E1E2::Empty)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Prediction {
    Stable,
    Unstable,
    Unknown,
}

impl Prediction {
    pub fn as_str(&self) -> &'static str {
        match self {
            Prediction::Stable => "stable",
            Prediction::Unstable => "unstable",
            Prediction::Unknown => "unknown",
        }
    }
}

/// Known orbital stability of the standing wave built on a branch of the
/// given kind, or `None` when that branch does not exist at `p`.
pub fn predicted_stability(p: &CouplingParams, kind: BranchKind) -> Result<Option<Prediction>> {
    let region = classify_j(p)?;
    Ok(match kind {
        BranchKind::Semitrivial => Some(if p.gamma < 1.0 {
            Prediction::Stable
        } else if p.gamma > 1.0 || p.kappa > 0.0 {
            Prediction::Unstable
        } else {
            Prediction::Stable
        }),
        BranchKind::PlusMinus => matches!(region, JRegion::J1 | JRegion::J2).then_some(Prediction::Stable),
        BranchKind::MinusPlus => (region == JRegion::J2).then_some(Prediction::Unstable),
        BranchKind::Degenerate => (region == JRegion::J3).then_some(Prediction::Unknown),
    })
}
