//! Distance from a field to the symmetry orbit `{G(theta) tau_y phi}`.
//!
//! The inner product `<f, G(theta) tau_y phi>` is a trigonometric polynomial
//! in `(theta, y)` whose values on all grid shifts come from one inverse
//! transform per component. The best grid shift and one of 64 phase samples
//! seed a Newton iteration on the exact polynomial; the reported distance is
//! then evaluated directly from the difference field.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field2;
use crate::grid::C64;

const THETA_SAMPLES: usize = 64;
const NEWTON_TOL: f64 = 1e-10;
const NEWTON_MAX: usize = 60;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitFit {
    pub distance: f64,
    pub theta: f64,
    pub shift: Vec<f64>,
    /// The optimal shift exceeds a quarter of the box; the periodic search
    /// may then underestimate the distance on the whole space.
    pub far_shift: bool,
}

/// Reference state with its weighted spectrum cached for repeated fits.
#[derive(Debug, Clone)]
pub struct OrbitReference {
    phi: Field2,
    weight: f64,
    // conj(phi_hat) * (weight + |k|^2)
    w1: Vec<C64>,
    w2: Vec<C64>,
    k1: Vec<f64>,
}

impl OrbitReference {
    /// `weight` multiplies the `L^2` part of the norm; 1 gives the `X` norm.
    pub fn new(phi: &Field2, weight: f64) -> Self {
        let grid = &phi.grid;
        let prep = |u: &[C64]| -> Vec<C64> {
            let mut d = u.to_vec();
            grid.forward(&mut d);
            d.iter()
                .zip(grid.k2())
                .map(|(z, k2)| z.conj() * (weight + k2))
                .collect()
        };
        OrbitReference {
            phi: phi.clone(),
            weight,
            w1: prep(&phi.u1),
            w2: prep(&phi.u2),
            k1: grid.wavenumbers(),
        }
    }

    pub fn phi(&self) -> &Field2 {
        &self.phi
    }

    pub fn fit(&self, f: &Field2) -> Result<OrbitFit> {
        f.same_grid(&self.phi)?;
        f.check_finite()?;
        let grid = &f.grid;
        let dim = grid.dim();
        let n = grid.n();
        let h = grid.spacing();
        let extent = grid.extent();
        let dv = grid.cell_volume();
        let total = grid.len() as f64;

        let mut x1 = f.u1.clone();
        let mut x2 = f.u2.clone();
        grid.forward(&mut x1);
        grid.forward(&mut x2);
        for (z, w) in x1.iter_mut().zip(&self.w1) {
            *z *= w;
        }
        for (z, w) in x2.iter_mut().zip(&self.w2) {
            *z *= w;
        }

        // correlation on all grid shifts
        let mut a = x1.clone();
        let mut b = x2.clone();
        grid.inverse(&mut a);
        grid.inverse(&mut b);
        let phases: Vec<(C64, C64)> = (0..THETA_SAMPLES)
            .map(|j| {
                let t = 2.0 * std::f64::consts::PI * j as f64 / THETA_SAMPLES as f64;
                (C64::from_polar(1.0, -t), C64::from_polar(1.0, -2.0 * t))
            })
            .collect();
        let mut best = (f64::NEG_INFINITY, 0.0, 0usize);
        for (idx, (za, zb)) in a.iter().zip(&b).enumerate() {
            if (za.norm() + zb.norm()) * dv <= best.0 {
                continue;
            }
            for (j, (p1, p2)) in phases.iter().enumerate() {
                let c = (p1 * za + p2 * zb).re * dv;
                if c > best.0 {
                    let t = 2.0 * std::f64::consts::PI * j as f64 / THETA_SAMPLES as f64;
                    best = (c, t, idx);
                }
            }
        }
        let m = grid.unravel(best.2);
        let mut theta = best.1;
        let mut y: Vec<f64> = (0..dim)
            .map(|ax| {
                let j = m[ax];
                if j < n / 2 {
                    j as f64 * h
                } else {
                    (j as f64 - n as f64) * h
                }
            })
            .collect();

        // Newton ascent on the exact trigonometric polynomial
        let scale = dv / total;
        let eval = |theta: f64, y: &[f64]| -> (f64, DVector<f64>, DMatrix<f64>) {
            let e1 = C64::from_polar(1.0, -theta);
            let e2 = C64::from_polar(1.0, -2.0 * theta);
            let nv = dim + 1;
            let mut g = DVector::zeros(nv);
            let mut hm = DMatrix::zeros(nv, nv);
            let mut c = 0.0;
            for idx in 0..x1.len() {
                let k = grid.wavevector(idx, &self.k1);
                let ky: f64 = (0..dim).map(|ax| k[ax] * y[ax]).sum();
                let e = C64::from_polar(1.0, ky);
                let p1 = e1 * x1[idx] * e;
                let p2 = e2 * x2[idx] * e;
                let s = p1 + p2;
                let d = p1 + p2 * 2.0;
                c += s.re;
                // d/dtheta of s is -i d
                g[0] += d.im;
                hm[(0, 0)] -= (p1 + p2 * 4.0).re;
                for ax in 0..dim {
                    g[ax + 1] -= k[ax] * s.im;
                    hm[(0, ax + 1)] += k[ax] * d.re;
                    for bx in 0..dim {
                        hm[(ax + 1, bx + 1)] -= k[ax] * k[bx] * s.re;
                    }
                }
            }
            for ax in 0..dim {
                hm[(ax + 1, 0)] = hm[(0, ax + 1)];
            }
            (c * scale, g * scale, hm * scale)
        };

        let max_dy = 2.0 * h;
        for _ in 0..NEWTON_MAX {
            let (c0, g, hm) = eval(theta, &y);
            if g.norm() == 0.0 {
                break;
            }
            let neg = -hm.clone();
            let mut step = match neg.clone().cholesky() {
                Some(ch) => ch.solve(&g),
                None => {
                    // not locally concave: gradient step scaled by the curvature
                    let lam = neg.norm().max(1e-300);
                    &g / lam
                }
            };
            let mut limit = 1.0_f64;
            limit = limit.min(0.5 / step[0].abs().max(1e-300));
            for ax in 0..dim {
                limit = limit.min(max_dy / step[ax + 1].abs().max(1e-300));
            }
            step *= limit.min(1.0);
            let mut accepted = false;
            for _ in 0..30 {
                let t_try = theta + step[0];
                let y_try: Vec<f64> = (0..dim).map(|ax| y[ax] + step[ax + 1]).collect();
                let (c1, _, _) = eval(t_try, &y_try);
                if c1 >= c0 - 1e-15 * c0.abs() {
                    theta = t_try;
                    y = y_try;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted || step.norm() < NEWTON_TOL {
                break;
            }
        }

        let two_pi = 2.0 * std::f64::consts::PI;
        theta = theta.rem_euclid(two_pi);
        for v in y.iter_mut() {
            *v = (*v + 0.5 * extent).rem_euclid(extent) - 0.5 * extent;
        }
        let model = self.phi.translate(&y).apply_gauge(theta);
        let diff = f.axpy(-1.0, &model);
        let distance = diff.h1_norm2(self.weight).max(0.0).sqrt();
        if !distance.is_finite() {
            return Err(Error::NonFinite("orbital distance".into()));
        }
        let far_shift = y.iter().map(|v| v * v).sum::<f64>().sqrt() > 0.25 * extent;
        Ok(OrbitFit {
            distance,
            theta,
            shift: y,
            far_shift,
        })
    }
}

/// `min over (theta, y) of ||f - G(theta) tau_y phi||` in the `H^1` norm with
/// `L^2` weight `weight` (1 for the `X` norm).
pub fn orbital_distance(f: &Field2, phi: &Field2, weight: f64) -> Result<OrbitFit> {
    f.same_grid(phi)?;
    OrbitReference::new(phi, weight).fit(f)
}
