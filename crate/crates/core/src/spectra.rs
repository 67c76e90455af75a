//! Discretized linearized operators around standing waves and their low
//! spectrum.
//!
//! Scalar operators are `L_a = −Δ + ω − a φ`. Block operators act on real
//! pairs and come in two kinds: the real-part operator `LR` and the
//! imaginary-part operator `LI` of the second variation of the action.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::ground_state::{ScalarProfile, PROFILE_TOL};
use crate::grid::{Grid, GridSpec, C64};
use crate::model::{BranchPoint, CouplingParams};
use crate::rng;

/// Eigen-residual certificate, relative to the eigenvector norm.
pub const EIG_RESIDUAL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Periodic1d,
    RadialRegular,
}

/// How a scalar operator is discretized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Discretization {
    /// Fourier Laplacian on the profile's own 1-D periodic grid.
    Periodic,
    /// Second-order finite differences on cell centres `r_j = (j + 1/2) dr`,
    /// `j < points`, with a Dirichlet wall at `r = points * dr`.
    Radial { points: usize, r_max: f64 },
}

/// Nodes, weights and profile values of a discretization.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub boundary: Boundary,
    pub dim: usize,
    /// Grid points (1-D) or radii (radial).
    pub nodes: Vec<f64>,
    /// Quadrature weight of each node; for radial meshes `r^{d-1} dr` times
    /// the area of the unit sphere.
    pub weights: Vec<f64>,
    pub profile: Vec<f64>,
    pub grid: Option<GridSpec>,
}

impl Mesh {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).zip(&self.weights).map(|((x, y), w)| x * y * w).sum()
    }
}

fn sphere_area(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        2 => 2.0 * std::f64::consts::PI,
        _ => 4.0 * std::f64::consts::PI,
    }
}

/// `−Δ` as a symmetric matrix acting on coordinates `y = sqrt(w) ∘ v`, so
/// that the Euclidean inner product of coordinates is the mesh inner product.
fn laplacian(mesh: &Mesh, grid: &Grid) -> DMatrix<f64> {
    let m = mesh.len();
    match mesh.boundary {
        Boundary::Periodic1d => {
            // first column of the circulant: inverse FFT of k²
            let mut col: Vec<C64> = grid.k2().iter().map(|&k| C64::new(k, 0.0)).collect();
            grid.inverse(&mut col);
            let matrix = DMatrix::from_fn(m, m, |i, j| col[(i + m - j) % m].re);
            // symmetrize away rounding
            (&matrix + matrix.transpose()) * 0.5
        }
        Boundary::RadialRegular => {
            let dr = mesh.nodes[1] - mesh.nodes[0];
            let d = mesh.dim as f64;
            let face = |j: usize| (j as f64 * dr).powf(d - 1.0);
            let cell = |j: usize| mesh.nodes[j].powf(d - 1.0);
            let mut matrix = DMatrix::zeros(m, m);
            for j in 0..m {
                let inner = if j == 0 { 0.0 } else { face(j) };
                let outer = face(j + 1);
                matrix[(j, j)] = (inner + outer) / (dr * dr * cell(j));
                if j + 1 < m {
                    let off = -outer / (dr * dr * (cell(j) * cell(j + 1)).sqrt());
                    matrix[(j, j + 1)] = off;
                    matrix[(j + 1, j)] = off;
                }
            }
            matrix
        }
    }
}

pub fn mesh(phi: &ScalarProfile, disc: Discretization) -> Result<Mesh> {
    match disc {
        Discretization::Periodic => {
            if phi.grid.dim() != 1 {
                return Err(Error::GridMismatch(format!(
                    "periodic operators need a 1-D grid, got dim {}",
                    phi.grid.dim()
                )));
            }
            let h = phi.grid.spacing();
            Ok(Mesh {
                boundary: Boundary::Periodic1d,
                dim: 1,
                nodes: phi.grid.axis(),
                weights: vec![h; phi.grid.n()],
                profile: phi.values.clone(),
                grid: Some(phi.grid.spec()),
            })
        }
        Discretization::Radial { points, r_max } => {
            let table = phi.radial.as_ref().ok_or_else(|| {
                Error::GridMismatch("radial operators need a shooting profile with a radial table".into())
            })?;
            if points < 8 || !(r_max > 0.0) {
                return domain(format!("radial mesh needs points >= 8 and r_max > 0, got {points}, {r_max}"));
            }
            let dr = r_max / points as f64;
            let s = phi.omega.sqrt();
            let area = sphere_area(phi.dim);
            let nodes: Vec<f64> = (0..points).map(|j| (j as f64 + 0.5) * dr).collect();
            let weights = nodes.iter().map(|r| area * r.powf(phi.dim as f64 - 1.0) * dr).collect();
            let profile = nodes.iter().map(|r| phi.omega * table.eval(s * r)).collect();
            Ok(Mesh {
                boundary: Boundary::RadialRegular,
                dim: phi.dim,
                nodes,
                weights,
                profile,
                grid: None,
            })
        }
    }
}

/// A symmetric matrix together with the mesh it lives on. Vectors passed to
/// and returned from the public API are nodal values; the matrix itself acts
/// on weighted coordinates.
#[derive(Debug, Clone)]
pub struct ScalarOperator {
    pub a: f64,
    pub omega: f64,
    pub mesh: Mesh,
    pub matrix: DMatrix<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlockKind {
    #[serde(rename = "LR")]
    Real,
    #[serde(rename = "LI")]
    Imag,
}

/// Potentials `[[p11, p12], [p12, p22]]` multiplying the profile.
#[derive(Debug, Clone)]
pub struct BlockOperator {
    pub kind: BlockKind,
    pub alpha: f64,
    pub beta: f64,
    pub omega: f64,
    pub potentials: [[f64; 2]; 2],
    pub mesh: Mesh,
    /// `2m × 2m`, first component in the first `m` rows.
    pub matrix: DMatrix<f64>,
}

fn certified(phi: &ScalarProfile) -> Result<()> {
    if !(phi.residual <= PROFILE_TOL) {
        return Err(Error::Precondition {
            lemma: "profile certificate",
            detail: format!("profile residual {:e}", phi.residual),
        });
    }
    Ok(())
}

fn base_operator(mesh: &Mesh, phi: &ScalarProfile) -> DMatrix<f64> {
    let mut m = laplacian(mesh, &phi.grid);
    for j in 0..mesh.len() {
        m[(j, j)] += phi.omega;
    }
    m
}

pub fn assemble_la(a: f64, phi: &ScalarProfile, disc: Discretization) -> Result<ScalarOperator> {
    certified(phi)?;
    if !a.is_finite() {
        return domain(format!("potential coupling must be finite, got {a}"));
    }
    let mesh = mesh(phi, disc)?;
    let mut matrix = base_operator(&mesh, phi);
    for (j, v) in mesh.profile.iter().enumerate() {
        matrix[(j, j)] -= a * v;
    }
    Ok(ScalarOperator {
        a,
        omega: phi.omega,
        mesh,
        matrix,
    })
}

/// Potential coefficients of `LR` and `LI` at `(α, β)`.
pub fn block_potentials(alpha: f64, beta: f64, p: &CouplingParams) -> ([[f64; 2]; 2], [[f64; 2]; 2]) {
    let (k, g) = (p.kappa, p.gamma);
    let off = g * alpha;
    (
        [[2.0 * k * alpha + g * beta, off], [off, 2.0 * beta]],
        [[k * alpha - g * beta, off], [off, beta]],
    )
}

pub fn assemble_blocks(
    bp: &BranchPoint,
    p: &CouplingParams,
    phi: &ScalarProfile,
    disc: Discretization,
) -> Result<(BlockOperator, BlockOperator)> {
    certified(phi)?;
    if !bp.is_certified() {
        return Err(Error::Precondition {
            lemma: "branch point residuals",
            detail: format!("line {:e}, ellipse {:e}", bp.residual_line, bp.residual_ellipse),
        });
    }
    let mesh = mesh(phi, disc)?;
    let base = base_operator(&mesh, phi);
    let (pr, pi) = block_potentials(bp.alpha, bp.beta, p);
    let build = |kind, pot: [[f64; 2]; 2]| {
        let m = mesh.len();
        let mut matrix = DMatrix::zeros(2 * m, 2 * m);
        matrix.view_mut((0, 0), (m, m)).copy_from(&base);
        matrix.view_mut((m, m), (m, m)).copy_from(&base);
        for (j, v) in mesh.profile.iter().enumerate() {
            matrix[(j, j)] -= pot[0][0] * v;
            matrix[(m + j, m + j)] -= pot[1][1] * v;
            matrix[(j, m + j)] -= pot[0][1] * v;
            matrix[(m + j, j)] -= pot[1][0] * v;
        }
        BlockOperator {
            kind,
            alpha: bp.alpha,
            beta: bp.beta,
            omega: phi.omega,
            potentials: pot,
            mesh: mesh.clone(),
            matrix,
        }
    };
    Ok((build(BlockKind::Real, pr), build(BlockKind::Imag, pi)))
}

/// Common interface of scalar and block operators.
pub trait Operator {
    fn matrix(&self) -> &DMatrix<f64>;
    fn mesh(&self) -> &Mesh;
    fn components(&self) -> usize;

    /// Nodal values to symmetric coordinates.
    fn to_coords(&self, v: &[f64]) -> Result<DVector<f64>> {
        let m = self.mesh().len();
        if v.len() != m * self.components() {
            return Err(Error::GridMismatch(format!(
                "vector of length {} for an operator of size {}",
                v.len(),
                m * self.components()
            )));
        }
        let w = &self.mesh().weights;
        Ok(DVector::from_iterator(v.len(), v.iter().enumerate().map(|(i, x)| x * w[i % m].sqrt())))
    }

    fn from_coords(&self, y: &DVector<f64>) -> Vec<f64> {
        let m = self.mesh().len();
        let w = &self.mesh().weights;
        y.iter().enumerate().map(|(i, x)| x / w[i % m].sqrt()).collect()
    }

    /// `op v` as nodal values.
    fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        let y = self.to_coords(v)?;
        Ok(self.from_coords(&(self.matrix() * y)))
    }
}

impl Operator for ScalarOperator {
    fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }
    fn mesh(&self) -> &Mesh {
        &self.mesh
    }
    fn components(&self) -> usize {
        1
    }
}

impl Operator for BlockOperator {
    fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }
    fn mesh(&self) -> &Mesh {
        &self.mesh
    }
    fn components(&self) -> usize {
        2
    }
}

/// `⟨op v, v⟩` in the mesh inner product.
pub fn quadratic_form<O: Operator + ?Sized>(op: &O, v: &[f64]) -> Result<f64> {
    let y = op.to_coords(v)?;
    Ok((op.matrix() * &y).dot(&y))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OperatorSpectrum {
    pub eigenvalues: Vec<f64>,
    /// Nodal values, one vector per eigenvalue, normalized in the mesh norm.
    #[serde(skip)]
    pub eigenvectors: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    pub negative_count: usize,
    pub kernel_dim: usize,
    pub kernel_tol: f64,
    pub norm_estimate: f64,
}

fn eig_matrix(matrix: &DMatrix<f64>, k: usize) -> Result<(Vec<f64>, Vec<DVector<f64>>, Vec<f64>, f64)> {
    let n = matrix.nrows();
    if k == 0 || k > n {
        return domain(format!("need 1 <= k <= {n}, got {k}"));
    }
    let eig = SymmetricEigen::try_new(matrix.clone(), f64::EPSILON, 0).ok_or_else(|| Error::NonConvergence {
        what: "symmetric eigensolver",
        iterations: 0,
        detail: format!("matrix of size {n}"),
    })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let norm = eig.eigenvalues.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let mut vals = Vec::with_capacity(k);
    let mut vecs = Vec::with_capacity(k);
    let mut res = Vec::with_capacity(k);
    for &i in order.iter().take(k) {
        let lam = eig.eigenvalues[i];
        let v = eig.eigenvectors.column(i).into_owned();
        let r = (matrix * &v - &v * lam).norm() / v.norm();
        vals.push(lam);
        vecs.push(v);
        res.push(r);
    }
    Ok((vals, vecs, res, norm))
}

fn spectrum_from<O: Operator + ?Sized>(
    op: &O,
    vals: Vec<f64>,
    vecs: Vec<DVector<f64>>,
    residuals: Vec<f64>,
    norm: f64,
) -> Result<OperatorSpectrum> {
    if let Some((i, r)) = residuals.iter().enumerate().find(|(_, r)| !(**r <= EIG_RESIDUAL_TOL)) {
        return Err(Error::NonConvergence {
            what: "symmetric eigensolver",
            iterations: 0,
            detail: format!("eigenpair {i} residual {r:e}"),
        });
    }
    let kernel_tol = 1e-6 * norm;
    Ok(OperatorSpectrum {
        negative_count: vals.iter().filter(|v| **v < -kernel_tol).count(),
        kernel_dim: vals.iter().filter(|v| v.abs() <= kernel_tol).count(),
        eigenvectors: vecs.iter().map(|y| op.from_coords(y)).collect(),
        eigenvalues: vals,
        residuals,
        kernel_tol,
        norm_estimate: norm,
    })
}

/// The `k` lowest eigenpairs, with residual certificates.
pub fn eig_low<O: Operator + ?Sized>(op: &O, k: usize) -> Result<OperatorSpectrum> {
    let (vals, vecs, res, norm) = eig_matrix(op.matrix(), k)?;
    spectrum_from(op, vals, vecs, res, norm)
}

/// The `k` lowest eigenpairs of the operator compressed to the mesh-orthogonal
/// complement of `constraints` (nodal values).
pub fn eig_low_constrained<O: Operator + ?Sized>(op: &O, constraints: &[Vec<f64>], k: usize) -> Result<OperatorSpectrum> {
    let basis = orthonormal_coords(op, constraints)?;
    let n = op.matrix().nrows();
    let mut proj = DMatrix::<f64>::identity(n, n);
    for c in &basis {
        proj -= c * c.transpose();
    }
    let norm = op.matrix().norm();
    let mut m = &proj * op.matrix() * &proj;
    // lift the constrained directions above the rest of the spectrum
    for c in &basis {
        m += c * c.transpose() * (2.0 * norm);
    }
    let m = (&m + m.transpose()) * 0.5;
    let (vals, vecs, res, norm) = eig_matrix(&m, k)?;
    spectrum_from(op, vals, vecs, res, norm)
}

fn orthonormal_coords<O: Operator + ?Sized>(op: &O, vs: &[Vec<f64>]) -> Result<Vec<DVector<f64>>> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for v in vs {
        let mut y = op.to_coords(v)?;
        for b in &basis {
            let c = b.dot(&y);
            y -= b * c;
        }
        let n = y.norm();
        if n > 1e-12 {
            basis.push(y / n);
        }
    }
    Ok(basis)
}

/// Mesh inner product of pair-valued nodal vectors.
fn pair_inner(mesh: &Mesh, a: &[f64], b: &[f64]) -> f64 {
    let m = mesh.len();
    mesh.inner(&a[..m], &b[..m]) + mesh.inner(&a[m..], &b[m..])
}

// ---------------------------------------------------------------------------
// diagonalization

/// The orthogonal rotations that diagonalize the pair potentials: rows
/// `(α, β), (−β, α)` for `LR` and `(α, 2β), (−2β, α)` for `LI`, normalized.
pub fn rotations(alpha: f64, beta: f64) -> ([[f64; 2]; 2], [[f64; 2]; 2]) {
    let a = alpha.hypot(beta);
    let b = alpha.hypot(2.0 * beta);
    (
        [[alpha / a, beta / a], [-beta / a, alpha / a]],
        [[alpha / b, 2.0 * beta / b], [-2.0 * beta / b, alpha / b]],
    )
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiagonalizationReport {
    pub alpha: f64,
    pub beta: f64,
    /// `max(||RᵀR − I||)` over the two rotations.
    pub orthogonality_error: f64,
    /// Largest off-diagonal block norm after conjugating `LR` and `LI`.
    pub offdiag_real: f64,
    pub offdiag_imag: f64,
    /// Decoupled couplings: `LR ~ (L_2, L_{a_r})`, `LI ~ (L_1, L_{a_i})`.
    pub coupling_real: f64,
    pub coupling_imag: f64,
    /// Largest deviation between the block eigenvalues and the merged scalar
    /// eigenvalues.
    pub eig_gap_real: f64,
    pub eig_gap_imag: f64,
    pub eigenvalues_real: Vec<f64>,
    pub eigenvalues_imag: Vec<f64>,
}

fn conjugate(op: &BlockOperator, r: [[f64; 2]; 2]) -> DMatrix<f64> {
    let m = op.mesh.len();
    let mut rot = DMatrix::<f64>::zeros(2 * m, 2 * m);
    for j in 0..m {
        rot[(j, j)] = r[0][0];
        rot[(j, m + j)] = r[0][1];
        rot[(m + j, j)] = r[1][0];
        rot[(m + j, m + j)] = r[1][1];
    }
    &rot * &op.matrix * rot.transpose()
}

fn merged_low(phi: &ScalarProfile, disc: Discretization, a: [f64; 2], k: usize) -> Result<Vec<f64>> {
    let mut all = Vec::new();
    for c in a {
        all.extend(eig_low(&assemble_la(c, phi, disc)?, k)?.eigenvalues);
    }
    all.sort_by(f64::total_cmp);
    all.truncate(k);
    Ok(all)
}

pub fn verify_diagonalization(
    bp: &BranchPoint,
    p: &CouplingParams,
    phi: &ScalarProfile,
    disc: Discretization,
    k: usize,
) -> Result<DiagonalizationReport> {
    if !(bp.alpha > 0.0 && bp.beta > 0.0) {
        return Err(Error::Precondition {
            lemma: "diagonalization",
            detail: format!(
                "needs alpha > 0 and beta > 0, got ({}, {}); the semitrivial operators are already decoupled",
                bp.alpha, bp.beta
            ),
        });
    }
    let (lr, li) = assemble_blocks(bp, p, phi, disc)?;
    let (ra, rb) = rotations(bp.alpha, bp.beta);
    let orth = |r: [[f64; 2]; 2]| {
        let m = nalgebra::Matrix2::new(r[0][0], r[0][1], r[1][0], r[1][1]);
        (m.transpose() * m - nalgebra::Matrix2::identity()).abs().max()
    };
    let m = lr.mesh.len();
    let offdiag = |c: &DMatrix<f64>| c.view((0, m), (m, m)).norm().max(c.view((m, 0), (m, m)).norm());
    let cr = conjugate(&lr, ra);
    let ci = conjugate(&li, rb);
    let coupling_real = (2.0 - p.gamma) * bp.beta;
    let coupling_imag = (1.0 - 2.0 * p.gamma) * bp.beta;
    let er = eig_low(&lr, k)?.eigenvalues;
    let ei = eig_low(&li, k)?.eigenvalues;
    let mr = merged_low(phi, disc, [2.0, coupling_real], k)?;
    let mi = merged_low(phi, disc, [1.0, coupling_imag], k)?;
    let gap = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    Ok(DiagonalizationReport {
        alpha: bp.alpha,
        beta: bp.beta,
        orthogonality_error: orth(ra).max(orth(rb)),
        offdiag_real: offdiag(&cr),
        offdiag_imag: offdiag(&ci),
        coupling_real,
        coupling_imag,
        eig_gap_real: gap(&er, &mr),
        eig_gap_imag: gap(&ei, &mi),
        eigenvalues_real: er,
        eigenvalues_imag: ei,
    })
}

// ---------------------------------------------------------------------------
// kernels and coercivity

/// Standing-wave directions on the mesh: `Φ = (αφ, βφ)`, `Φ1 = (−βφ, αφ)`,
/// `Φ2 = (αφ, 2βφ)` and, on periodic meshes, `∂xΦ`.
#[derive(Debug, Clone)]
pub struct Directions {
    pub phi: Vec<f64>,
    pub phi1: Vec<f64>,
    pub phi2: Vec<f64>,
    pub grad_phi: Option<Vec<f64>>,
}

pub fn directions(mesh: &Mesh, alpha: f64, beta: f64, profile: &ScalarProfile) -> Directions {
    let f = &mesh.profile;
    let pair = |a: f64, b: f64, v: &[f64]| -> Vec<f64> { v.iter().map(|x| a * x).chain(v.iter().map(|x| b * x)).collect() };
    let grad_phi = match mesh.boundary {
        Boundary::Periodic1d => {
            let grid = &profile.grid;
            let k = grid.wavenumbers();
            let mut d: Vec<C64> = f.iter().map(|&v| C64::new(v, 0.0)).collect();
            grid.forward(&mut d);
            for (z, kk) in d.iter_mut().zip(&k) {
                *z *= C64::new(0.0, *kk);
            }
            grid.inverse(&mut d);
            let dx: Vec<f64> = d.iter().map(|z| z.re).collect();
            Some(pair(alpha, beta, &dx))
        }
        Boundary::RadialRegular => None,
    };
    Directions {
        phi: pair(alpha, beta, f),
        phi1: pair(-beta, alpha, f),
        phi2: pair(alpha, 2.0 * beta, f),
        grad_phi,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coercivity {
    /// `LR` off `Φ` and `∇Φ`, needs `(2−γ)β < 1`.
    Lr1,
    /// `LR` on even pairs off `Φ` and `Φ1`, needs `1 ≤ (2−γ)β < 2`.
    Lr2,
    /// `LI` off `Φ2`.
    Li1,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoercivityReport {
    pub kind: Coercivity,
    pub trials: usize,
    /// Smallest `⟨ℒv, v⟩ / ||v||²_X` seen.
    pub min_quotient: f64,
}

/// Random smooth real pair on the mesh: a few Gaussian bumps per component.
fn random_pair(mesh: &Mesh, seed: u64, trial: usize, even: bool) -> Vec<f64> {
    let mut r = rng::stream(seed, "coercivity", trial as u64);
    let m = mesh.len();
    let mut v = vec![0.0; 2 * m];
    for c in 0..2 {
        for _ in 0..3 {
            let amp: f64 = r.gen_range(-1.0..1.0);
            let width: f64 = r.gen_range(0.5..4.0);
            let centre: f64 = if even || mesh.boundary == Boundary::RadialRegular {
                0.0
            } else {
                r.gen_range(-6.0..6.0)
            };
            for j in 0..m {
                let x = mesh.nodes[j];
                let g = |y: f64| (-0.5 * ((x - y) / width).powi(2)).exp();
                let bump = if even && centre != 0.0 { g(centre) + g(-centre) } else { g(centre) };
                v[c * m + j] += amp * bump;
            }
        }
        if even && mesh.boundary == Boundary::Periodic1d {
            // an even offset bump pair as well
            let amp: f64 = r.gen_range(-1.0..1.0);
            let c0: f64 = r.gen_range(0.5..6.0);
            for j in 0..m {
                let x = mesh.nodes[j];
                v[c * m + j] += amp * ((-0.5 * (x - c0).powi(2)).exp() + (-0.5 * (x + c0).powi(2)).exp());
            }
        }
    }
    v
}

/// Minimal Rayleigh quotient `⟨ℒv, v⟩ / ||v||²_X` over random smooth trial
/// pairs projected onto the constraint set of `kind`. A positive result only
/// means no counterexample was found.
pub fn coercivity_probe(
    kind: Coercivity,
    bp: &BranchPoint,
    p: &CouplingParams,
    phi: &ScalarProfile,
    disc: Discretization,
    trials: usize,
    seed: u64,
) -> Result<CoercivityReport> {
    let c = (2.0 - p.gamma) * bp.beta;
    match kind {
        Coercivity::Lr1 if !(c < 1.0) => {
            return Err(Error::Precondition {
                lemma: "LR coercivity off the symmetry directions",
                detail: format!("needs (2-γ)β < 1, got {c}"),
            })
        }
        Coercivity::Lr2 if !(1.0 <= c && c < 2.0) => {
            return Err(Error::Precondition {
                lemma: "LR coercivity on even pairs",
                detail: format!("needs 1 <= (2-γ)β < 2, got {c}"),
            })
        }
        _ => {}
    }
    if trials == 0 {
        return domain("at least one trial is required");
    }
    let (lr, li) = assemble_blocks(bp, p, phi, disc)?;
    let op = if kind == Coercivity::Li1 { &li } else { &lr };
    let mesh = &op.mesh;
    let dirs = directions(mesh, bp.alpha, bp.beta, phi);
    let constraints: Vec<Vec<f64>> = match kind {
        Coercivity::Lr1 => {
            let mut c = vec![dirs.phi.clone()];
            c.extend(dirs.grad_phi.clone());
            c
        }
        Coercivity::Lr2 => vec![dirs.phi.clone(), dirs.phi1.clone()],
        Coercivity::Li1 => vec![dirs.phi2.clone()],
    };
    // Gram–Schmidt in the mesh inner product
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for c in constraints {
        let mut v = c;
        for b in &basis {
            let s = pair_inner(mesh, &v, b);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= s * y);
        }
        let n = pair_inner(mesh, &v, &v).sqrt();
        if n > 1e-12 {
            basis.push(v.iter().map(|x| x / n).collect());
        }
    }
    let base = base_operator(mesh, phi);
    let m = mesh.len();
    let mut min_q = f64::INFINITY;
    for t in 0..trials {
        let mut v = random_pair(mesh, seed, t, kind == Coercivity::Lr2);
        for b in &basis {
            let s = pair_inner(mesh, &v, b);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= s * y);
        }
        let y = op.to_coords(&v)?;
        let num = (&op.matrix * &y).dot(&y);
        let mut den = 0.0;
        for c in 0..2 {
            let yc = y.rows(c * m, m).into_owned();
            den += (&base * &yc).dot(&yc);
        }
        if den > 0.0 {
            min_q = min_q.min(num / den);
        }
    }
    Ok(CoercivityReport {
        kind,
        trials,
        min_quotient: min_q,
    })
}

// ---------------------------------------------------------------------------
// export

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub operator: String,
    pub omega: f64,
    pub dim: usize,
    pub boundary: Boundary,
    pub grid: Option<GridSpec>,
    pub mesh_points: usize,
    pub params: OperatorParams,
    pub eigenvalues: Vec<f64>,
    pub negative_count: usize,
    pub kernel_dim: usize,
    pub residuals: Vec<f64>,
}

/// Parameters identifying an operator; unused entries are `None`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct OperatorParams {
    pub a: Option<f64>,
    pub kappa: Option<f64>,
    pub gamma: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
}

impl SpectrumReport {
    pub fn new(operator: &str, mesh: &Mesh, omega: f64, params: OperatorParams, s: &OperatorSpectrum) -> Self {
        SpectrumReport {
            operator: operator.to_string(),
            omega,
            dim: mesh.dim,
            boundary: mesh.boundary,
            grid: mesh.grid,
            mesh_points: mesh.len(),
            params,
            eigenvalues: s.eigenvalues.clone(),
            negative_count: s.negative_count,
            kernel_dim: s.kernel_dim,
            residuals: s.residuals.clone(),
        }
    }
}

/// Smallest eigenvalue of `L_a` at unit frequency in 1-D, from the exactly
/// solvable `sech²` well.
pub fn poschl_teller_ground(a: f64) -> f64 {
    let l = (-1.0 + (1.0 + 24.0 * a).sqrt()) / 2.0;
    0.25 * (4.0 - l * l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ground_state::{phi_closed_form_1d, phi_radial};
    use crate::grid::Grid;
    use crate::model;

    fn phi(n: usize) -> ScalarProfile {
        phi_closed_form_1d(1.0, &Grid::new(1, n, 80.0).unwrap()).unwrap()
    }

    #[test]
    fn poschl_teller_levels() {
        let phi = phi(512);
        let l2 = eig_low(&assemble_la(2.0, &phi, Discretization::Periodic).unwrap(), 3).unwrap();
        for (got, want) in l2.eigenvalues.iter().zip([-1.25, 0.0, 0.75]) {
            assert!((got - want).abs() < 1e-6, "{:?}", l2.eigenvalues);
        }
        assert_eq!((l2.negative_count, l2.kernel_dim), (1, 1));
        let l1 = eig_low(&assemble_la(1.0, &phi, Discretization::Periodic).unwrap(), 2).unwrap();
        assert_eq!((l1.negative_count, l1.kernel_dim), (0, 1));
        let v = &l1.eigenvectors[0];
        let m = &assemble_la(1.0, &phi, Discretization::Periodic).unwrap().mesh;
        let corr = m.inner(v, &phi.values).abs() / (m.inner(v, v) * m.inner(&phi.values, &phi.values)).sqrt();
        assert!(corr > 0.9999, "{corr}");
        for a in [0.5, 1.5] {
            let s = eig_low(&assemble_la(a, &phi, Discretization::Periodic).unwrap(), 1).unwrap();
            assert!((s.eigenvalues[0] - poschl_teller_ground(a)).abs() < 1e-6);
        }
    }

    #[test]
    fn kernel_and_quadratic_form() {
        let phi = phi(512);
        let l1 = assemble_la(1.0, &phi, Discretization::Periodic).unwrap();
        let r = l1.apply(&phi.values).unwrap();
        let n = l1.mesh.inner(&r, &r).sqrt() / l1.mesh.inner(&phi.values, &phi.values).sqrt();
        assert!(n < 1e-8, "{n}");
        assert!(quadratic_form(&assemble_la(1.5, &phi, Discretization::Periodic).unwrap(), &phi.values).unwrap() < 0.0);
    }

    #[test]
    fn branch_kernels_and_diagonalization() {
        let phi = phi(256);
        for (k, g) in [(0.0, 2.0), (1.0, 1.0), (0.5, 0.8), (-0.3, 0.6)] {
            let p = CouplingParams::new(k, g).unwrap();
            for bp in model::branch_points(&p).unwrap() {
                let (lr, li) = assemble_blocks(&bp, &p, &phi, Discretization::Periodic).unwrap();
                let d = directions(&lr.mesh, bp.alpha, bp.beta, &phi);
                for (op, v) in [(&lr, d.grad_phi.clone().unwrap()), (&li, d.phi2.clone())] {
                    let r = op.apply(&v).unwrap();
                    let rel = (pair_inner(&op.mesh, &r, &r) / pair_inner(&op.mesh, &v, &v)).sqrt();
                    assert!(rel < 1e-7, "({k},{g}) {:?}: {rel}", op.kind);
                }
                if bp.alpha > 0.0 {
                    let rep = verify_diagonalization(&bp, &p, &phi, Discretization::Periodic, 6).unwrap();
                    assert!(rep.orthogonality_error < 1e-14);
                    assert!(rep.offdiag_real < 1e-10 && rep.offdiag_imag < 1e-10, "{rep:?}");
                    assert!(rep.eig_gap_real < 1e-8 && rep.eig_gap_imag < 1e-8, "{rep:?}");
                }
            }
        }
    }

    #[test]
    fn semitrivial_blocks_decouple() {
        let phi = phi(256);
        let p = CouplingParams::new(0.3, 1.0).unwrap();
        let (lr, li) = assemble_blocks(&BranchPoint::semitrivial(&p), &p, &phi, Discretization::Periodic).unwrap();
        assert_eq!(lr.potentials, [[1.0, 0.0], [0.0, 2.0]]);
        assert_eq!(li.potentials, [[-1.0, 0.0], [0.0, 1.0]]);
    }

    #[test]
    fn coercivity_examples() {
        let phi = phi(256);
        let p = CouplingParams::new(0.0, 2.0).unwrap();
        let bp = model::branch_points(&p).unwrap()[0];
        let r = coercivity_probe(Coercivity::Li1, &bp, &p, &phi, Discretization::Periodic, 200, 1).unwrap();
        assert!(r.min_quotient > 0.0, "{r:?}");
        let p = CouplingParams::new(1.0, 1.0).unwrap();
        let bp = model::plus_minus_point(&p).unwrap().unwrap();
        let r = coercivity_probe(Coercivity::Lr1, &bp, &p, &phi, Discretization::Periodic, 100, 1).unwrap();
        assert!(r.min_quotient > 0.0, "{r:?}");
        assert!(coercivity_probe(Coercivity::Lr2, &bp, &p, &phi, Discretization::Periodic, 10, 1).is_err());
        let p = CouplingParams::new(1.0, 0.8).unwrap();
        let bp = model::minus_plus_point(&p).unwrap().unwrap();
        let r = coercivity_probe(Coercivity::Lr2, &bp, &p, &phi, Discretization::Periodic, 100, 1).unwrap();
        assert!(r.min_quotient > 0.0, "{r:?}");
        // the instability witness at the same point
        let (lr, _) = assemble_blocks(&bp, &p, &phi, Discretization::Periodic).unwrap();
        let d = directions(&lr.mesh, bp.alpha, bp.beta, &phi);
        assert!(quadratic_form(&lr, &d.phi1).unwrap() < 0.0);
    }

    #[test]
    fn radial_operators() {
        for dim in [2, 3] {
            let g = Grid::new(dim, 64, 20.0).unwrap();
            let phi = phi_radial(1.0, dim, &g).unwrap();
            let disc = Discretization::Radial { points: 600, r_max: 30.0 };
            let l1 = assemble_la(1.0, &phi, disc).unwrap();
            let asym = (&l1.matrix - l1.matrix.transpose()).abs().max();
            assert!(asym <= 1e-12);
            let s = eig_low(&l1, 2).unwrap();
            // second-order differences: kernel shifted by O(dr²)
            assert!(s.eigenvalues[0].abs() < 2e-3, "dim {dim}: {:?}", s.eigenvalues);
            let l2 = eig_low(&assemble_la(2.0, &phi, disc).unwrap(), 2).unwrap();
            assert!(l2.eigenvalues[0] < -0.1 && l2.eigenvalues[1] > 0.0, "{:?}", l2.eigenvalues);
        }
    }
}
