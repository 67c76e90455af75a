//! Two-component fields, the conserved functionals and the symmetry group.

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::grid::{Grid, GridSpec, C64};
use crate::model::CouplingParams;

#[derive(Debug, Clone, PartialEq)]
pub struct Field2 {
    pub grid: Grid,
    pub u1: Vec<C64>,
    pub u2: Vec<C64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FunctionalReport {
    pub energy: f64,
    pub charge: f64,
    pub action: f64,
    pub nehari: f64,
    pub cubic: f64,
    pub xnorm2: f64,
}

impl Field2 {
    pub fn zeros(grid: &Grid) -> Self {
        let z = vec![C64::new(0.0, 0.0); grid.len()];
        Field2 {
            grid: grid.clone(),
            u1: z.clone(),
            u2: z,
        }
    }

    pub fn new(grid: &Grid, u1: Vec<C64>, u2: Vec<C64>) -> Result<Self> {
        if u1.len() != grid.len() || u2.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "component lengths {} / {} for a grid of {} points",
                u1.len(),
                u2.len(),
                grid.len()
            )));
        }
        let f = Field2 {
            grid: grid.clone(),
            u1,
            u2,
        };
        f.check_finite()?;
        Ok(f)
    }

    /// Sample `(a * profile, b * profile)` from a real profile.
    pub fn from_profile(grid: &Grid, profile: &[f64], a: f64, b: f64) -> Self {
        Field2 {
            grid: grid.clone(),
            u1: profile.iter().map(|&p| C64::new(a * p, 0.0)).collect(),
            u2: profile.iter().map(|&p| C64::new(b * p, 0.0)).collect(),
        }
    }

    pub fn check_finite(&self) -> Result<()> {
        let bad = self
            .u1
            .iter()
            .chain(self.u2.iter())
            .any(|z| !(z.re.is_finite() && z.im.is_finite()));
        if bad {
            Err(Error::NonFinite("field contains NaN or Inf".into()))
        } else {
            Ok(())
        }
    }

    pub fn same_grid(&self, other: &Field2) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(format!(
                "{:?} vs {:?}",
                self.grid.spec(),
                other.grid.spec()
            )));
        }
        Ok(())
    }

    /// `self + s * other`
    pub fn axpy(&self, s: f64, other: &Field2) -> Field2 {
        let add = |a: &[C64], b: &[C64]| a.iter().zip(b).map(|(x, y)| x + y * s).collect();
        Field2 {
            grid: self.grid.clone(),
            u1: add(&self.u1, &other.u1),
            u2: add(&self.u2, &other.u2),
        }
    }

    pub fn scaled(&self, s: f64) -> Field2 {
        Field2 {
            grid: self.grid.clone(),
            u1: self.u1.iter().map(|z| z * s).collect(),
            u2: self.u2.iter().map(|z| z * s).collect(),
        }
    }

    /// Squared `L^2` norms of the two components.
    pub fn masses(&self) -> (f64, f64) {
        let dv = self.grid.cell_volume();
        (
            self.u1.iter().map(|z| z.norm_sqr()).sum::<f64>() * dv,
            self.u2.iter().map(|z| z.norm_sqr()).sum::<f64>() * dv,
        )
    }

    /// Squared gradient norms `||grad u1||^2`, `||grad u2||^2`, computed spectrally.
    pub fn gradient_norms2(&self) -> (f64, f64) {
        (grad_norm2(&self.grid, &self.u1), grad_norm2(&self.grid, &self.u2))
    }

    /// Real inner product `Re sum_c int u_c conj(v_c)`.
    pub fn inner_h(&self, other: &Field2) -> f64 {
        let dv = self.grid.cell_volume();
        let dot = |a: &[C64], b: &[C64]| -> f64 {
            a.iter().zip(b).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
        };
        (dot(&self.u1, &other.u1) + dot(&self.u2, &other.u2)) * dv
    }

    /// `||u||^2_{H^1_w} = ||grad u||^2 + w ||u||^2`; `w = 1` is the `X` norm.
    pub fn h1_norm2(&self, weight: f64) -> f64 {
        let (m1, m2) = self.masses();
        let (g1, g2) = self.gradient_norms2();
        g1 + g2 + weight * (m1 + m2)
    }

    pub fn x_norm(&self) -> f64 {
        self.h1_norm2(1.0).sqrt()
    }

    pub fn apply_gauge(&self, theta: f64) -> Field2 {
        let p1 = C64::from_polar(1.0, theta);
        let p2 = C64::from_polar(1.0, 2.0 * theta);
        Field2 {
            grid: self.grid.clone(),
            u1: self.u1.iter().map(|z| z * p1).collect(),
            u2: self.u2.iter().map(|z| z * p2).collect(),
        }
    }

    pub fn apply_j(&self) -> Field2 {
        let i = C64::new(0.0, 1.0);
        Field2 {
            grid: self.grid.clone(),
            u1: self.u1.iter().map(|z| z * i).collect(),
            u2: self.u2.iter().map(|z| z * (2.0 * i)).collect(),
        }
    }

    /// `u(x - y)`, by a phase shift of the Fourier coefficients.
    pub fn translate(&self, y: &[f64]) -> Field2 {
        let grid = &self.grid;
        let k1 = grid.wavenumbers();
        let phase: Vec<C64> = (0..grid.len())
            .map(|idx| {
                let k = grid.wavevector(idx, &k1);
                let ky: f64 = (0..grid.dim()).map(|a| k[a] * y.get(a).copied().unwrap_or(0.0)).sum();
                C64::from_polar(1.0, -ky)
            })
            .collect();
        let shift = |u: &[C64]| {
            let mut d = u.to_vec();
            grid.forward(&mut d);
            for (v, p) in d.iter_mut().zip(&phase) {
                *v *= p;
            }
            grid.inverse(&mut d);
            d
        };
        Field2 {
            grid: grid.clone(),
            u1: shift(&self.u1),
            u2: shift(&self.u2),
        }
    }

    /// Zero every Fourier mode outside the central two thirds of each axis.
    pub fn dealias(&mut self) {
        let grid = self.grid.clone();
        let mask = dealias_mask(&grid);
        for u in [&mut self.u1, &mut self.u2] {
            grid.forward(u);
            for (v, keep) in u.iter_mut().zip(&mask) {
                if !keep {
                    *v = C64::new(0.0, 0.0);
                }
            }
            grid.inverse(u);
        }
    }
}

pub(crate) fn dealias_mask(grid: &Grid) -> Vec<bool> {
    let n = grid.n();
    let cut = n / 3;
    (0..grid.len())
        .map(|idx| {
            let m = grid.unravel(idx);
            (0..grid.dim()).all(|a| {
                let j = m[a];
                let freq = if j < n / 2 { j } else { n - j };
                freq <= cut
            })
        })
        .collect()
}

pub(crate) fn grad_norm2(grid: &Grid, u: &[C64]) -> f64 {
    let mut d = u.to_vec();
    grid.forward(&mut d);
    let s: f64 = d.iter().zip(grid.k2()).map(|(z, k2)| z.norm_sqr() * k2).sum();
    s * grid.cell_volume() / grid.len() as f64
}

/// `V(u) = kappa ||u1||^3_3 + ||u2||^3_3 + (3 gamma / 2) Re int u1^2 conj(u2)`.
pub fn cubic(f: &Field2, p: &CouplingParams) -> f64 {
    let (a, b, c) = cubic_parts(f);
    let mut v = b;
    if p.kappa != 0.0 {
        v += p.kappa * a;
    }
    if p.gamma != 0.0 {
        v += 1.5 * p.gamma * c;
    }
    v
}

/// `(||u1||^3_3, ||u2||^3_3, Re int u1^2 conj(u2))`
fn cubic_parts(f: &Field2) -> (f64, f64, f64) {
    let dv = f.grid.cell_volume();
    let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
    for (z1, z2) in f.u1.iter().zip(&f.u2) {
        a += z1.norm_sqr().powf(1.5);
        b += z2.norm_sqr().powf(1.5);
        c += (z1 * z1 * z2.conj()).re;
    }
    (a * dv, b * dv, c * dv)
}

pub fn energy(f: &Field2, p: &CouplingParams) -> f64 {
    let (g1, g2) = f.gradient_norms2();
    let (a, b, c) = cubic_parts(f);
    0.5 * (g1 + g2) - p.kappa / 3.0 * a - b / 3.0 - 0.5 * p.gamma * c
}

pub fn charge(f: &Field2) -> f64 {
    let (m1, m2) = f.masses();
    0.5 * (m1 + m2)
}

pub fn action(f: &Field2, p: &CouplingParams, omega: f64) -> Result<FunctionalReport> {
    if !(omega > 0.0 && omega.is_finite()) {
        return domain(format!("omega must be > 0, got {omega}"));
    }
    f.check_finite()?;
    let (m1, m2) = f.masses();
    let (g1, g2) = f.gradient_norms2();
    let (a, b, c) = cubic_parts(f);
    let charge = 0.5 * (m1 + m2);
    let energy = 0.5 * (g1 + g2) - p.kappa / 3.0 * a - b / 3.0 - 0.5 * p.gamma * c;
    let xnorm2 = g1 + g2 + omega * (m1 + m2);
    let cubic = p.kappa * a + b + 1.5 * p.gamma * c;
    Ok(FunctionalReport {
        energy,
        charge,
        action: energy + omega * charge,
        nehari: xnorm2 - cubic,
        cubic,
        xnorm2,
    })
}

/// Metadata stored alongside a field snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMeta {
    pub omega: f64,
    pub kappa: f64,
    pub gamma: f64,
    pub time: f64,
}

const MAGIC: &[u8; 4] = b"RNLS";
pub const SNAPSHOT_VERSION: u32 = 1;

pub fn write_snapshot<W: Write>(mut w: W, f: &Field2, meta: &SnapshotMeta) -> Result<()> {
    let spec = f.grid.spec();
    w.write_all(MAGIC)?;
    w.write_u32::<LittleEndian>(SNAPSHOT_VERSION)?;
    w.write_u32::<LittleEndian>(spec.dim as u32)?;
    w.write_u32::<LittleEndian>(spec.n as u32)?;
    for v in [spec.extent, meta.omega, meta.kappa, meta.gamma, meta.time] {
        w.write_f64::<LittleEndian>(v)?;
    }
    for z in f.u1.iter().chain(&f.u2) {
        w.write_f64::<LittleEndian>(z.re)?;
        w.write_f64::<LittleEndian>(z.im)?;
    }
    Ok(())
}

pub fn read_snapshot<R: Read>(mut r: R) -> Result<(Field2, SnapshotMeta)> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}")));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != SNAPSHOT_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let dim = r.read_u32::<LittleEndian>()? as usize;
    let n = r.read_u32::<LittleEndian>()? as usize;
    let extent = r.read_f64::<LittleEndian>()?;
    let grid = Grid::from_spec(GridSpec { dim, n, extent })
        .map_err(|e| Error::Format(format!("invalid grid in header: {e}")))?;
    let meta = SnapshotMeta {
        omega: r.read_f64::<LittleEndian>()?,
        kappa: r.read_f64::<LittleEndian>()?,
        gamma: r.read_f64::<LittleEndian>()?,
        time: r.read_f64::<LittleEndian>()?,
    };
    let mut read_comp = |len: usize| -> Result<Vec<C64>> {
        (0..len)
            .map(|_| {
                let re = r.read_f64::<LittleEndian>()?;
                let im = r.read_f64::<LittleEndian>()?;
                Ok(C64::new(re, im))
            })
            .collect()
    };
    let u1 = read_comp(grid.len())?;
    let u2 = read_comp(grid.len())?;
    Ok((Field2 { grid, u1, u2 }, meta))
}
