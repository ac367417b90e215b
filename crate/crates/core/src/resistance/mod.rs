//! Exact linear-algebra quantities on a [`ResistanceNetwork`].
//!
//! Conventions: the generator of the walk with speed measure `mu` is
//! `Delta f(x) = mu(x)^-1 sum_y c(x,y) (f(y) - f(x))`, i.e. `Delta = -M^-1 L`
//! with `L` the weighted Laplacian and `M = diag(mu)`. Densities are taken
//! with respect to `mu`, so the resolvent and heat kernels below are
//! symmetric matrices.

mod solver;

use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{bail, Result};
use crate::network::ResistanceNetwork;

pub use solver::{laplacian, GroundedSolver, CG_TOLERANCE, DENSE_LIMIT};
pub(crate) use solver::{cholesky, submatrix};

/// Off-diagonal Schur entries within this (relative) distance of zero are
/// treated as zero; slightly negative ones are counted as clamped.
pub const SCHUR_CLAMP_TOLERANCE: f64 = 1e-12;

/// Effective resistance between `x` and `y`.
///
/// Grounds `y`, solves `L v = e_x` on the rest and returns `v(x)`.
pub fn effective_resistance(net: &ResistanceNetwork, x: usize, y: usize) -> Result<f64> {
    net.check_vertex(x)?;
    net.check_vertex(y)?;
    if x == y {
        return Ok(0.0);
    }
    let solver = GroundedSolver::new(net, y)?;
    let mut rhs = vec![0.0; net.vertex_count()];
    rhs[x] = 1.0;
    Ok(solver.solve(&rhs)?[x])
}

/// All-pairs effective resistances. Symmetric, zero diagonal, a metric.
#[derive(Clone, Debug, PartialEq)]
pub struct ResistanceMatrix {
    matrix: DMatrix<f64>,
}

impl ResistanceMatrix {
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.matrix[(x, y)]
    }

    pub fn len(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.nrows() == 0
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn diameter(&self) -> f64 {
        self.matrix.max()
    }

    /// Resistance matrix scaled by `factor` (e.g. `a_n R_n`).
    pub fn scaled(&self, factor: f64) -> Self {
        Self { matrix: &self.matrix * factor }
    }
}

/// All-pairs effective resistances from the Moore-Penrose inverse of `L`,
/// obtained as `(L + J/n)^-1` on a connected network.
pub fn resistance_matrix(net: &ResistanceNetwork) -> Result<ResistanceMatrix> {
    let n = net.vertex_count();
    let pinv = if n <= DENSE_LIMIT {
        let mut k = laplacian(net);
        k.add_scalar_mut(1.0 / n as f64);
        cholesky(k, "regularized Laplacian")?.inverse()
    } else {
        // The grounded Green function differs from L^+ by terms that cancel in R.
        let solver = GroundedSolver::new(net, net.root())?;
        let inv = solver.inverse()?;
        DMatrix::from_fn(n, n, |x, y| match (solver.slot(x), solver.slot(y)) {
            (Some(i), Some(j)) => inv[(i, j)],
            _ => 0.0,
        })
    };
    let matrix = DMatrix::from_fn(n, n, |x, y| {
        if x == y {
            0.0
        } else {
            (pinv[(x, x)] + pinv[(y, y)] - 2.0 * pinv[(x, y)]).max(0.0)
        }
    });
    Ok(ResistanceMatrix { matrix })
}

/// Result of tracing a network onto a vertex subset.
#[derive(Clone, Debug)]
pub struct SchurTrace {
    pub network: ResistanceNetwork,
    /// Original ids of the kept vertices; vertex `i` of `network` is `kept[i]`.
    pub kept: Vec<usize>,
    /// Slightly negative off-diagonal entries that were set to zero.
    pub clamped: usize,
}

/// Trace of the network on `keep`: conductances are read off the Schur
/// complement of the Laplacian eliminating the other vertices, and
/// `new_measure` (indexed like `keep`) becomes the vertex measure.
///
/// The traced network has the same effective resistances between kept
/// vertices. The root is kept if possible, otherwise the first kept vertex.
pub fn schur_trace(net: &ResistanceNetwork, keep: &[usize], new_measure: &[f64]) -> Result<SchurTrace> {
    if keep.is_empty() {
        bail!(InvalidArgument, "cannot trace onto an empty set");
    }
    if new_measure.len() != keep.len() {
        bail!(InvalidArgument, "{} masses for {} kept vertices", new_measure.len(), keep.len());
    }
    if new_measure.iter().any(|m| !(*m > 0.0) || !m.is_finite()) {
        bail!(InvalidArgument, "trace measure must be strictly positive");
    }
    let n = net.vertex_count();
    let mut is_kept = vec![false; n];
    for &x in keep {
        net.check_vertex(x)?;
        if is_kept[x] {
            bail!(InvalidArgument, "vertex {x} listed twice");
        }
        is_kept[x] = true;
    }
    let eliminated: Vec<usize> = (0..n).filter(|x| !is_kept[*x]).collect();
    let l = laplacian(net);
    let mut schur = submatrix(&l, keep, keep);
    if !eliminated.is_empty() {
        let l_uu = submatrix(&l, &eliminated, &eliminated);
        let l_uk = submatrix(&l, &eliminated, keep);
        let chol = cholesky(l_uu, "eliminated block")
            .expect("the eliminated block of a connected positive network is definite");
        let x = chol.solve(&l_uk);
        schur -= l_uk.transpose() * x;
    }

    let k = keep.len();
    let scale = (0..k).map(|i| schur[(i, i)].abs()).fold(0.0, f64::max);
    let tol = SCHUR_CLAMP_TOLERANCE * scale.max(f64::MIN_POSITIVE);
    let mut edges = Vec::new();
    let mut clamped = 0;
    for i in 0..k {
        for j in i + 1..k {
            let c = -0.5 * (schur[(i, j)] + schur[(j, i)]);
            if c > tol {
                edges.push((i, j, c));
            } else if c < -tol {
                bail!(Numerical, "Schur complement has a negative conductance {c:e} between {} and {}", keep[i], keep[j]);
            } else if c < 0.0 {
                clamped += 1;
            }
        }
    }
    if clamped > 0 {
        log::warn!("schur_trace clamped {clamped} slightly negative conductances to zero");
    }
    let root = keep.iter().position(|x| *x == net.root()).unwrap_or(0);
    let mut traced = ResistanceNetwork::new(k, edges, new_measure.to_vec(), root)?;
    if let Some(coords) = net.coords() {
        traced = traced.with_coords(keep.iter().map(|x| coords[*x].clone()).collect())?;
    }
    Ok(SchurTrace { network: traced, kept: keep.to_vec(), clamped })
}

/// Green function of the walk killed on hitting `kill`, as a full matrix whose
/// `kill` row and column are zero. `g(x, x) = R(kill, x)`.
pub fn green_killed(net: &ResistanceNetwork, kill: usize) -> Result<DMatrix<f64>> {
    let solver = GroundedSolver::new(net, kill)?;
    let inv = solver.inverse()?;
    let n = net.vertex_count();
    Ok(DMatrix::from_fn(n, n, |x, y| match (solver.slot(x), solver.slot(y)) {
        (Some(i), Some(j)) => inv[(i, j)],
        _ => 0.0,
    }))
}

/// One-potential density `u(x,y) = [(I - Delta)^-1]_{xy} / mu(y)`.
///
/// Since `I - Delta = M^-1 (M + L)`, this is the symmetric matrix
/// `(M + L)^-1`. The hitting-time transform is `E_x e^{-tau_y} = u(x,y)/u(y,y)`.
pub fn potential_density(net: &ResistanceNetwork) -> Result<DMatrix<f64>> {
    net.require_full_support()?;
    if net.edge_count() == 0 {
        bail!(InvalidArgument, "potential density needs at least one edge");
    }
    let mut m = laplacian(net);
    for (x, mu) in net.measure().iter().enumerate() {
        m[(x, x)] += mu;
    }
    Ok(cholesky(m, "resolvent")?.inverse())
}

/// `E_x[exp(-tau_y)]` for all `x`, from the potential density.
pub fn hitting_laplace_transform(u: &DMatrix<f64>, y: usize) -> Vec<f64> {
    (0..u.nrows()).map(|x| u[(x, y)] / u[(y, y)]).collect()
}

/// Spectral representation of the heat kernel `p_t(x,y) = [exp(t Delta)]_{xy} / mu(y)`.
///
/// Uses the eigendecomposition of the symmetrized generator
/// `S = M^-1/2 L M^-1/2`, so `p_t(x,y) = sum_k e^{-t l_k} v_k(x) v_k(y) / sqrt(mu(x) mu(y))`.
#[derive(Clone, Debug)]
pub struct HeatKernel {
    inv_sqrt_mu: Vec<f64>,
    sqrt_mu: Vec<f64>,
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
}

impl HeatKernel {
    pub fn new(net: &ResistanceNetwork) -> Result<Self> {
        net.require_full_support()?;
        Self::with_measure(net, net.measure())
    }

    /// Heat kernel of the walk on `net` with speed measure `measure` in place of its own.
    pub fn with_measure(net: &ResistanceNetwork, measure: &[f64]) -> Result<Self> {
        if measure.len() != net.vertex_count() || measure.iter().any(|m| !(*m > 0.0)) {
            bail!(InvalidArgument, "speed measure must be strictly positive on every vertex");
        }
        let sqrt_mu: Vec<f64> = measure.iter().map(|m| m.sqrt()).collect();
        let inv_sqrt_mu: Vec<f64> = sqrt_mu.iter().map(|s| 1.0 / s).collect();
        let mut s = laplacian(net);
        let n = s.nrows();
        for i in 0..n {
            for j in 0..n {
                s[(i, j)] *= inv_sqrt_mu[i] * inv_sqrt_mu[j];
            }
        }
        let eig = SymmetricEigen::new(s);
        Ok(Self {
            inv_sqrt_mu,
            sqrt_mu,
            eigenvalues: eig.eigenvalues.iter().map(|l| l.max(0.0)).collect(),
            eigenvectors: eig.eigenvectors,
        })
    }

    fn check_time(t: f64) -> Result<()> {
        if !(t >= 0.0) || !t.is_finite() {
            bail!(InvalidArgument, "time must be finite and nonnegative, got {t}");
        }
        Ok(())
    }

    /// Full density matrix at time `t`.
    pub fn density(&self, t: f64) -> Result<DMatrix<f64>> {
        Self::check_time(t)?;
        let n = self.eigenvalues.len();
        let mut scaled = self.eigenvectors.clone();
        for (k, l) in self.eigenvalues.iter().enumerate() {
            let w = (-t * l).exp();
            scaled.column_mut(k).scale_mut(w);
        }
        let mut p = scaled * self.eigenvectors.transpose();
        for i in 0..n {
            for j in 0..n {
                p[(i, j)] *= self.inv_sqrt_mu[i] * self.inv_sqrt_mu[j];
            }
        }
        Ok(p)
    }

    /// Law of `X_t` under `P_x`: `p_t(x, y) mu(y)`, clipped at zero.
    pub fn distribution(&self, x: usize, t: f64) -> Result<Vec<f64>> {
        Self::check_time(t)?;
        let n = self.eigenvalues.len();
        let weights: Vec<f64> = self
            .eigenvalues
            .iter()
            .enumerate()
            .map(|(k, l)| (-t * l).exp() * self.eigenvectors[(x, k)])
            .collect();
        Ok((0..n)
            .map(|y| {
                let s: f64 = weights
                    .iter()
                    .enumerate()
                    .map(|(k, w)| w * self.eigenvectors[(y, k)])
                    .sum();
                (s * self.inv_sqrt_mu[x] * self.sqrt_mu[y]).max(0.0)
            })
            .collect())
    }
}

/// Heat kernel density matrix at a single time.
pub fn heat_kernel(net: &ResistanceNetwork, t: f64) -> Result<DMatrix<f64>> {
    HeatKernel::check_time(t)?;
    HeatKernel::new(net)?.density(t)
}

/// Mean hitting times `E_x[tau_target]` for every starting vertex.
///
/// Solves `L h = mu` with `h(target) = 0`, i.e. `h(x) = sum_z g(x,z) mu(z)`
/// for the Green function killed at `target`.
pub fn mean_hitting_times(net: &ResistanceNetwork, target: usize) -> Result<Vec<f64>> {
    let solver = GroundedSolver::new(net, target)?;
    solver.solve(net.measure())
}

/// `(E_x tau_y, E_y tau_x)`; their sum equals `R(x,y) mu(F)`.
pub fn exact_commute_time(net: &ResistanceNetwork, x: usize, y: usize) -> Result<(f64, f64)> {
    net.check_vertex(x)?;
    net.check_vertex(y)?;
    if x == y {
        return Ok((0.0, 0.0));
    }
    let to_y = mean_hitting_times(net, y)?[x];
    let to_x = mean_hitting_times(net, x)?[y];
    Ok((to_y, to_x))
}

/// Writes a square matrix as CSV with a header row of vertex ids.
pub fn write_matrix_csv<W: Write>(m: &DMatrix<f64>, mut out: W) -> Result<()> {
    write!(out, "vertex")?;
    for j in 0..m.ncols() {
        write!(out, ",{j}")?;
    }
    writeln!(out)?;
    for i in 0..m.nrows() {
        write!(out, "{i}")?;
        for j in 0..m.ncols() {
            write!(out, ",{:?}", m[(i, j)])?;
        }
        writeln!(out)?;
    }
    Ok(())
}
