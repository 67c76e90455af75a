//! Periodic tensor grids on `[-L/2, L/2)^N` and their discrete Fourier
//! transforms.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

pub type C64 = Complex64;

/// Plain description of a grid, as stored in manifests and snapshots.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dim: usize,
    pub n: usize,
    pub extent: f64,
}

#[derive(Clone)]
pub struct Grid {
    spec: GridSpec,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    k2: Arc<Vec<f64>>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("dim", &self.spec.dim)
            .field("n", &self.spec.n)
            .field("extent", &self.spec.extent)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec
    }
}

impl Grid {
    pub fn new(dim: usize, n: usize, extent: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return domain(format!("grid dimension must be 1, 2 or 3, got {dim}"));
        }
        if n < 64 || !n.is_power_of_two() {
            return domain(format!("points per axis must be a power of two >= 64, got {n}"));
        }
        if !(extent.is_finite() && extent > 0.0) {
            return domain(format!("grid extent must be positive, got {extent}"));
        }
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let spec = GridSpec { dim, n, extent };
        let k1 = wavenumbers(n, extent);
        let total = n.pow(dim as u32);
        let mut k2 = vec![0.0; total];
        for (idx, v) in k2.iter_mut().enumerate() {
            let mut s = 0.0;
            let mut rest = idx;
            for _ in 0..dim {
                let k = k1[rest % n];
                s += k * k;
                rest /= n;
            }
            *v = s;
        }
        Ok(Grid {
            spec,
            fwd,
            inv,
            k2: Arc::new(k2),
        })
    }

    pub fn from_spec(spec: GridSpec) -> Result<Self> {
        Grid::new(spec.dim, spec.n, spec.extent)
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    pub fn n(&self) -> usize {
        self.spec.n
    }

    pub fn extent(&self) -> f64 {
        self.spec.extent
    }

    pub fn spacing(&self) -> f64 {
        self.spec.extent / self.spec.n as f64
    }

    /// Total number of grid points, `n^dim`.
    pub fn len(&self) -> usize {
        self.k2.len()
    }

    pub fn is_empty(&self) -> bool {
        self.k2.is_empty()
    }

    /// Quadrature weight `h^dim` of the rectangle rule.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.spec.dim as i32)
    }

    /// Node coordinates along one axis.
    pub fn axis(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..self.spec.n)
            .map(|j| -0.5 * self.spec.extent + j as f64 * h)
            .collect()
    }

    /// Wavenumbers along one axis in transform order.
    pub fn wavenumbers(&self) -> Vec<f64> {
        wavenumbers(self.spec.n, self.spec.extent)
    }

    /// `|k|^2` at every flat index, in transform order.
    pub fn k2(&self) -> &[f64] {
        &self.k2
    }

    /// Multi-index of a flat index; axis 0 varies slowest.
    pub fn unravel(&self, idx: usize) -> [usize; 3] {
        let n = self.spec.n;
        let mut out = [0; 3];
        let mut rest = idx;
        for a in (0..self.spec.dim).rev() {
            out[a] = rest % n;
            rest /= n;
        }
        out
    }

    /// Coordinates of a flat index (unused axes are 0).
    pub fn position(&self, idx: usize) -> [f64; 3] {
        let h = self.spacing();
        let m = self.unravel(idx);
        let mut x = [0.0; 3];
        for a in 0..self.spec.dim {
            x[a] = -0.5 * self.spec.extent + m[a] as f64 * h;
        }
        x
    }

    pub fn radius(&self, idx: usize) -> f64 {
        let x = self.position(idx);
        (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
    }

    /// Wave vector of a flat index in transform order.
    pub fn wavevector(&self, idx: usize, k1: &[f64]) -> [f64; 3] {
        let m = self.unravel(idx);
        let mut k = [0.0; 3];
        for a in 0..self.spec.dim {
            k[a] = k1[m[a]];
        }
        k
    }

    /// In-place unnormalized forward transform.
    pub fn forward(&self, data: &mut [C64]) {
        self.transform(data, &self.fwd);
    }

    /// In-place inverse transform, normalized so that `inverse(forward(u)) = u`.
    pub fn inverse(&self, data: &mut [C64]) {
        self.transform(data, &self.inv);
        let s = 1.0 / data.len() as f64;
        for v in data.iter_mut() {
            *v *= s;
        }
    }

    fn transform(&self, data: &mut [C64], plan: &Arc<dyn Fft<f64>>) {
        assert_eq!(data.len(), self.len(), "field length does not match grid");
        let n = self.spec.n;
        let mut scratch = vec![C64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        if self.spec.dim == 1 {
            plan.process_with_scratch(data, &mut scratch);
            return;
        }
        let total = data.len();
        let mut line = vec![C64::new(0.0, 0.0); n];
        for axis in 0..self.spec.dim {
            let stride = n.pow((self.spec.dim - 1 - axis) as u32);
            let block = stride * n;
            for start in (0..total).step_by(block) {
                for offset in 0..stride {
                    let base = start + offset;
                    if stride == 1 {
                        plan.process_with_scratch(&mut data[base..base + n], &mut scratch);
                        continue;
                    }
                    for (j, v) in line.iter_mut().enumerate() {
                        *v = data[base + j * stride];
                    }
                    plan.process_with_scratch(&mut line, &mut scratch);
                    for (j, v) in line.iter().enumerate() {
                        data[base + j * stride] = *v;
                    }
                }
            }
        }
    }
}

fn wavenumbers(n: usize, extent: f64) -> Vec<f64> {
    let dk = 2.0 * std::f64::consts::PI / extent;
    (0..n)
        .map(|j| {
            let m = if j < n / 2 { j as f64 } else { j as f64 - n as f64 };
            m * dk
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid::new(0, 64, 1.0).is_err());
        assert!(Grid::new(4, 64, 1.0).is_err());
        assert!(Grid::new(1, 100, 1.0).is_err());
        assert!(Grid::new(1, 32, 1.0).is_err());
        assert!(Grid::new(1, 64, 0.0).is_err());
    }

    #[test]
    fn spacing_times_n_is_extent() {
        let g = Grid::new(2, 128, 40.0).unwrap();
        assert_eq!(g.spacing() * 128.0, 40.0);
        assert_eq!(g.len(), 128 * 128);
        assert_eq!(g.axis()[0], -20.0);
    }

    #[test]
    fn round_trip_2d_3d() {
        for dim in [1, 2, 3] {
            let g = Grid::new(dim, 64, 10.0).unwrap();
            let orig: Vec<C64> = (0..g.len())
                .map(|i| C64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
                .collect();
            let mut d = orig.clone();
            g.forward(&mut d);
            g.inverse(&mut d);
            let err = d.iter().zip(&orig).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            assert!(err < 1e-13, "dim {dim}: {err}");
        }
    }

    #[test]
    fn plane_wave_lands_on_its_mode() {
        let g = Grid::new(2, 64, 2.0 * std::f64::consts::PI).unwrap();
        let mut d: Vec<C64> = (0..g.len())
            .map(|i| {
                let x = g.position(i);
                C64::from_polar(1.0, 3.0 * x[0] - 2.0 * x[1])
            })
            .collect();
        g.forward(&mut d);
        let (imax, _) = d
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
            .unwrap();
        let k = g.wavevector(imax, &g.wavenumbers());
        assert_eq!((k[0], k[1]), (3.0, -2.0));
        assert!((g.k2()[imax] - 13.0).abs() < 1e-12);
    }
}
