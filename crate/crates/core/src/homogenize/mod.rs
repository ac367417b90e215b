//! Renormalization of conductance matrices on finitely ramified fractals.
//!
//! A [`QMatrix`] on the boundary `V_0` describes one cell. Placing a copy on
//! every n-cell and tracing the assembled network back to `V_0` gives the
//! unscaled map; multiplying by the eigenvalue `rho` gives the renormalization
//! map `Phi`. Random cell matrices homogenize under iteration of `Phi`.

mod qmatrix;

use std::collections::VecDeque;

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::environments::{ConductanceLaw, SamplingMode};
use crate::error::{bail, Error, Result};
use crate::network::{build_fractal_graph, CellAddress, FractalGraph, FractalScheme};
use crate::rng::stream;

pub use qmatrix::{QMatrix, MEMBERSHIP_TOLERANCE};

/// Largest tolerated fraction of rejected samples in [`random_iterate`].
pub const MAX_REJECTION_RATE: f64 = 1e-3;

/// The boundary-point network of the n-cells: vertices are `V_n`, each cell
/// contributes a complete graph on its copy of `V_0`.
#[derive(Clone, Debug)]
pub struct CellAssembly {
    level: usize,
    boundary_count: usize,
    vertex_count: usize,
    addresses: Vec<CellAddress>,
    /// Per cell, the `V_n` ids of `Psi_w(a_0), ..., Psi_w(a_{k-1})`.
    cells: Vec<Vec<usize>>,
    /// `V_n` ids of `a_0, ..., a_{k-1}`.
    boundary: Vec<usize>,
    interior: Vec<usize>,
}

impl CellAssembly {
    pub fn new(scheme: &FractalScheme, level: usize) -> Result<Self> {
        let g = build_fractal_graph(scheme, level)?;
        let index = g.cell_index();
        let k = scheme.boundary_count;
        let mut compact = vec![usize::MAX; g.network.vertex_count()];
        let mut vertex_count = 0;
        let cells: Vec<Vec<usize>> = index
            .points
            .iter()
            .map(|pts| {
                pts[..k]
                    .iter()
                    .map(|&v| {
                        if compact[v] == usize::MAX {
                            compact[v] = vertex_count;
                            vertex_count += 1;
                        }
                        compact[v]
                    })
                    .collect()
            })
            .collect();
        let boundary: Vec<usize> = g.boundary_vertices().iter().map(|v| compact[*v]).collect();
        let interior = (0..vertex_count).filter(|v| !boundary.contains(v)).collect();
        Ok(Self {
            level,
            boundary_count: k,
            vertex_count,
            addresses: index.addresses.clone(),
            cells,
            boundary,
            interior,
        })
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    /// `|V_n|`.
    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn addresses(&self) -> &[CellAddress] {
        &self.addresses
    }

    fn check_assignment(&self, qs: &[QMatrix]) -> Result<()> {
        if qs.len() != self.cells.len() {
            bail!(InvalidArgument, "{} matrices for {} cells", qs.len(), self.cells.len());
        }
        for (q, w) in qs.iter().zip(&self.addresses) {
            if q.size() != self.boundary_count {
                bail!(InvalidArgument, "cell {w} has a {}x{} matrix, expected size {}", q.size(), q.size(), self.boundary_count);
            }
            if !q.in_qm() {
                bail!(InvalidArgument, "matrix on cell {w} is not in Q_M");
            }
        }
        Ok(())
    }

    /// Laplacian of the assembled network.
    fn laplacian(&self, qs: &[QMatrix]) -> DMatrix<f64> {
        let mut l = DMatrix::zeros(self.vertex_count, self.vertex_count);
        for (q, ids) in qs.iter().zip(&self.cells) {
            for i in 0..self.boundary_count {
                for j in 0..self.boundary_count {
                    l[(ids[i], ids[j])] -= q.get(i, j);
                }
            }
        }
        l
    }

    fn connected(&self, l: &DMatrix<f64>) -> bool {
        let n = self.vertex_count;
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(x) = queue.pop_front() {
            for y in 0..n {
                if !seen[y] && l[(x, y)] < 0.0 {
                    seen[y] = true;
                    queue.push_back(y);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Traces the assembly with cell matrices `qs` (in address order) onto `V_0`.
    ///
    /// Off-diagonal results in `(-tol, 0)` are clamped to zero and counted; a
    /// more negative entry is a numerical failure.
    pub fn trace(&self, qs: &[QMatrix]) -> Result<Traced> {
        self.check_assignment(qs)?;
        let l = self.laplacian(qs);
        if !self.connected(&l) {
            bail!(InvalidArgument, "assembled level-{} network is disconnected", self.level);
        }
        let b = &self.boundary;
        let u = &self.interior;
        let sub = |rows: &[usize], cols: &[usize]| DMatrix::from_fn(rows.len(), cols.len(), |i, j| l[(rows[i], cols[j])]);
        let mut s = sub(b, b);
        if !u.is_empty() {
            let l_ub = sub(u, b);
            let chol = sub(u, u)
                .cholesky()
                .ok_or_else(|| Error::Numerical("interior block of the assembly is not definite".into()))?;
            s -= l_ub.transpose() * chol.solve(&l_ub);
        }
        let k = self.boundary_count;
        let mut q = -(&s + s.transpose()) * 0.5;
        let scale = (0..k).map(|i| q[(i, i)].abs()).fold(0.0, f64::max);
        let tol = MEMBERSHIP_TOLERANCE * scale;
        let mut clamped = 0;
        for i in 0..k {
            for j in 0..k {
                if i == j || q[(i, j)] >= 0.0 {
                    continue;
                }
                if q[(i, j)] < -tol {
                    bail!(Numerical, "traced conductance {:e} between a{i} and a{j} is negative", q[(i, j)]);
                }
                clamped += 1;
                q[(i, i)] += q[(i, j)];
                q[(i, j)] = 0.0;
            }
        }
        Ok(Traced { q: QMatrix::new(q)?.balanced(), clamped: clamped / 2 })
    }

    /// Harmonic extension from `V_0` to `V_n` with every cell carrying `q`:
    /// a `|V_n| x |V_0|` matrix whose boundary rows are unit vectors.
    fn harmonic_extension(&self, q: &QMatrix) -> Result<DMatrix<f64>> {
        let qs = vec![q.clone(); self.cells.len()];
        self.check_assignment(&qs)?;
        let l = self.laplacian(&qs);
        let k = self.boundary_count;
        let mut ext = DMatrix::zeros(self.vertex_count, k);
        for (j, &b) in self.boundary.iter().enumerate() {
            ext[(b, j)] = 1.0;
        }
        if !self.interior.is_empty() {
            let u = &self.interior;
            let l_uu = DMatrix::from_fn(u.len(), u.len(), |i, j| l[(u[i], u[j])]);
            let l_ub = DMatrix::from_fn(u.len(), k, |i, j| l[(u[i], self.boundary[j])]);
            let chol = l_uu
                .cholesky()
                .ok_or_else(|| Error::InvalidArgument("Q is reducible: harmonic extension is singular".into()))?;
            let h = -chol.solve(&l_ub);
            for (i, &x) in u.iter().enumerate() {
                for j in 0..k {
                    ext[(x, j)] = h[(i, j)];
                }
            }
        }
        Ok(ext)
    }
}

/// Outcome of [`CellAssembly::trace`].
#[derive(Clone, Debug)]
pub struct Traced {
    pub q: QMatrix,
    /// Conductances clamped from tiny negative values to zero.
    pub clamped: usize,
}

/// Unscaled trace of the level-n assembly; `assignment` is indexed in
/// lexicographic address order, as in [`CellAddress::all`].
pub fn trace_to_boundary(scheme: &FractalScheme, level: usize, assignment: &[QMatrix]) -> Result<QMatrix> {
    Ok(CellAssembly::new(scheme, level)?.trace(assignment)?.q)
}

/// The unscaled one-step map `Q -> trace of the level-1 assembly of copies of Q`.
#[derive(Clone, Debug)]
pub struct Renormalizer {
    assembly: CellAssembly,
}

impl Renormalizer {
    pub fn new(scheme: &FractalScheme) -> Result<Self> {
        Ok(Self { assembly: CellAssembly::new(scheme, 1)? })
    }

    pub fn map_count(&self) -> usize {
        self.assembly.cell_count()
    }

    /// Unscaled map applied to `q`.
    pub fn apply(&self, q: &QMatrix) -> Result<QMatrix> {
        Ok(self.assembly.trace(&vec![q.clone(); self.assembly.cell_count()])?.q)
    }

    /// `Phi(q) = rho * apply(q)`.
    pub fn renormalize(&self, q: &QMatrix, rho: f64) -> Result<QMatrix> {
        if !(rho > 0.0) || !rho.is_finite() {
            bail!(InvalidArgument, "rho must be positive, got {rho}");
        }
        if !q.in_qm() {
            bail!(InvalidArgument, "Q is not in Q_M");
        }
        Ok(self.apply(q)?.scaled(rho))
    }
}

/// `rho * trace_to_boundary(scheme, 1, [q; N])`.
pub fn renormalize(q: &QMatrix, scheme: &FractalScheme, rho: f64) -> Result<QMatrix> {
    Renormalizer::new(scheme)?.renormalize(q, rho)
}

/// A normalized fixed point `rho * Phi~(Q) = Q`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FixedPoint {
    /// Normalized to unit trace norm.
    pub q: QMatrix,
    pub rho: f64,
    pub iterations: usize,
    /// `||rho_k Phi~(Q_k) - Q_k||_F` per iteration.
    pub residuals: Vec<f64>,
}

/// Power iteration of the unscaled map with trace-norm normalization.
pub fn fixed_point(scheme: &FractalScheme, q_init: &QMatrix, tol: f64, max_iter: usize) -> Result<FixedPoint> {
    if !q_init.is_irreducible() {
        bail!(InvalidArgument, "initial Q must be irreducible");
    }
    if q_init.size() != scheme.boundary_count {
        bail!(InvalidArgument, "initial Q has size {}, scheme boundary has {}", q_init.size(), scheme.boundary_count);
    }
    let phi = Renormalizer::new(scheme)?;
    let mut q = q_init.scaled(1.0 / q_init.trace_norm());
    let mut residuals = Vec::new();
    for it in 1..=max_iter {
        let p = phi.apply(&q)?;
        let rho = 1.0 / p.trace_norm();
        let next = p.scaled(rho);
        let r = next.distance(&q);
        residuals.push(r);
        if r <= tol {
            return Ok(FixedPoint { q, rho, iterations: it, residuals });
        }
        q = next;
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual: *residuals.last().unwrap_or(&f64::NAN),
        history: residuals,
    })
}

/// Hitting distributions `(A_k)_{ij} = P_{Psi_k(a_i)}(first hit of V_0 is a_j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct HarmonicMatrices(Vec<DMatrix<f64>>);

impl HarmonicMatrices {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, k: usize) -> &DMatrix<f64> {
        &self.0[k]
    }

    pub fn iter(&self) -> impl Iterator<Item = &DMatrix<f64>> {
        self.0.iter()
    }
}

/// Computes `A_k` for every map from the harmonic extension on the level-1 network.
pub fn harmonic_matrices(scheme: &FractalScheme, q_star: &QMatrix) -> Result<HarmonicMatrices> {
    if !q_star.is_irreducible() {
        bail!(InvalidArgument, "Q must be irreducible");
    }
    let assembly = CellAssembly::new(scheme, 1)?;
    let ext = assembly.harmonic_extension(q_star)?;
    let k = scheme.boundary_count;
    Ok(HarmonicMatrices(
        assembly
            .cells
            .iter()
            .map(|ids| DMatrix::from_fn(k, k, |i, j| ext[(ids[i], j)]))
            .collect(),
    ))
}

/// `H(Q) = rho * sum_k A_k^T Q A_k`.
pub fn linearized_map(q: &QMatrix, a: &HarmonicMatrices, rho: f64) -> Result<QMatrix> {
    let mut out = DMatrix::zeros(q.size(), q.size());
    for ak in a.iter() {
        if ak.nrows() != q.size() {
            bail!(InvalidArgument, "harmonic matrix of size {} for Q of size {}", ak.nrows(), q.size());
        }
        out += ak.transpose() * q.matrix() * ak;
    }
    Ok(QMatrix::new(out * rho)?.balanced())
}

/// Draws one cell matrix: the template network with random edge conductances
/// traced onto the template boundary. `PerCellShared` uses one draw for all
/// template edges; the other modes draw each edge independently.
pub fn sample_cell_q<R: Rng + ?Sized>(
    scheme: &FractalScheme,
    law: &ConductanceLaw,
    mode: SamplingMode,
    rng: &mut R,
) -> Result<QMatrix> {
    let shared = law.sample(rng);
    let weights: Vec<f64> = scheme
        .template_edges
        .iter()
        .map(|_| if mode == SamplingMode::PerCellShared { shared } else { law.sample(rng) })
        .collect();
    template_q(scheme, &weights)
}

/// Trace of the template network with the given edge conductances onto `V_0`.
pub fn template_q(scheme: &FractalScheme, weights: &[f64]) -> Result<QMatrix> {
    let m = scheme.template_points.len();
    let k = scheme.boundary_count;
    if weights.len() != scheme.template_edges.len() {
        bail!(InvalidArgument, "{} weights for {} template edges", weights.len(), scheme.template_edges.len());
    }
    let mut l = DMatrix::zeros(m, m);
    for (&(a, b), &c) in scheme.template_edges.iter().zip(weights) {
        l[(a, b)] -= c;
        l[(b, a)] -= c;
        l[(a, a)] += c;
        l[(b, b)] += c;
    }
    if m == k {
        return QMatrix::from_laplacian(&l);
    }
    let l_bb = l.view((0, 0), (k, k)).into_owned();
    let l_ub = l.view((k, 0), (m - k, k)).into_owned();
    let l_uu = l.view((k, k), (m - k, m - k)).into_owned();
    let chol = l_uu
        .cholesky()
        .ok_or_else(|| Error::InvalidArgument("template interior is not connected to the boundary".into()))?;
    QMatrix::from_laplacian(&(l_bb - l_ub.transpose() * chol.solve(&l_ub)))
}

/// Empirical law of `rho^n * trace_to_boundary(scheme, n, random cells)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RandomIterate {
    pub level: usize,
    pub rho: f64,
    pub mean: QMatrix,
    /// Sample covariance of the conductance vector `(Q_ij)_{i<j}`.
    pub covariance: Vec<Vec<f64>>,
    /// Frobenius norm of each accepted sample.
    pub norms: Vec<f64>,
    pub accepted: usize,
    pub rejected: usize,
    pub clamped: usize,
}

impl RandomIterate {
    /// Per-entry variances of the centred iterates.
    pub fn variances(&self) -> Vec<f64> {
        (0..self.covariance.len()).map(|i| self.covariance[i][i]).collect()
    }

    pub fn rejection_rate(&self) -> f64 {
        self.rejected as f64 / (self.accepted + self.rejected) as f64
    }
}

/// Samples `samples` independent level-n iterates, replica `i` using stream `(seed, i)`.
///
/// `rho` is the eigenvalue of the scheme's fixed point. Samples whose trace
/// leaves Q_M beyond the clamp tolerance are rejected; a rejection rate above
/// [`MAX_REJECTION_RATE`] fails the run.
pub fn random_iterate(
    scheme: &FractalScheme,
    level: usize,
    law: &ConductanceLaw,
    mode: SamplingMode,
    rho: f64,
    samples: usize,
    seed: u64,
) -> Result<RandomIterate> {
    law.validate()?;
    if samples < 2 {
        bail!(InvalidArgument, "need at least two samples");
    }
    if mode == SamplingMode::PerEdge {
        bail!(InvalidArgument, "cell matrices are drawn per cell; use per_cell or per_cell_shared");
    }
    let assembly = CellAssembly::new(scheme, level)?;
    let factor = rho.powi(level as i32);
    let draws: Vec<Result<Option<Traced>>> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, i as u64);
            let cells = (0..assembly.cell_count())
                .map(|_| sample_cell_q(scheme, law, mode, &mut rng))
                .collect::<Result<Vec<_>>>()?;
            match assembly.trace(&cells) {
                Ok(t) => Ok(Some(t)),
                Err(Error::Numerical(msg)) => {
                    log::debug!("sample {i} rejected: {msg}");
                    Ok(None)
                }
                Err(e) => Err(e),
            }
        })
        .collect();
    let mut accepted = Vec::new();
    let mut rejected = 0;
    let mut clamped = 0;
    for d in draws {
        match d? {
            Some(t) => {
                clamped += t.clamped;
                accepted.push(t.q.scaled(factor));
            }
            None => rejected += 1,
        }
    }
    let rate = rejected as f64 / samples as f64;
    if rate > MAX_REJECTION_RATE {
        bail!(Numerical, "{rejected} of {samples} samples left Q_M (rate {rate:.4} > {MAX_REJECTION_RATE})");
    }
    if accepted.len() < 2 {
        bail!(Numerical, "fewer than two accepted samples");
    }
    let n = accepted.len() as f64;
    let k = scheme.boundary_count;
    let mut mean = DMatrix::zeros(k, k);
    for q in &accepted {
        mean += q.matrix();
    }
    mean /= n;
    let mean = QMatrix::new(mean)?;
    let m = mean.conductances();
    let vectors: Vec<Vec<f64>> = accepted.iter().map(|q| q.conductances()).collect();
    let d = m.len();
    let covariance = (0..d)
        .map(|a| {
            (0..d)
                .map(|b| vectors.iter().map(|v| (v[a] - m[a]) * (v[b] - m[b])).sum::<f64>() / (n - 1.0))
                .collect()
        })
        .collect();
    Ok(RandomIterate {
        level,
        rho,
        norms: accepted.iter().map(|q| q.frobenius()).collect(),
        mean,
        covariance,
        accepted: accepted.len(),
        rejected,
        clamped,
    })
}

/// Minimal length of a chain of n-cells joining `x` to `y`, consecutive cells
/// sharing a vertex. Cells contain their interior template points.
pub fn cell_chain_distance(graph: &FractalGraph, x: usize, y: usize) -> Result<usize> {
    graph.network.check_vertex(x)?;
    graph.network.check_vertex(y)?;
    let index = graph.cell_index();
    let n = graph.network.vertex_count();
    let mut cells_of: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (c, pts) in index.points.iter().enumerate() {
        for &v in pts {
            cells_of[v].push(c);
        }
    }
    let mut dist = vec![usize::MAX; index.len()];
    let mut queue = VecDeque::new();
    for &c in &cells_of[x] {
        dist[c] = 1;
        queue.push_back(c);
    }
    while let Some(c) = queue.pop_front() {
        if index.points[c].contains(&y) {
            return Ok(dist[c]);
        }
        for &v in &index.points[c] {
            for &d in &cells_of[v] {
                if dist[d] == usize::MAX {
                    dist[d] = dist[c] + 1;
                    queue.push_back(d);
                }
            }
        }
    }
    bail!(Numerical, "no cell chain joins {x} and {y}")
}

/// `min_{a != b in V_0} h_n(a, b)`.
pub fn min_corner_chain_distance(graph: &FractalGraph) -> Result<usize> {
    let v0 = graph.boundary_vertices();
    let mut best = usize::MAX;
    for (i, &a) in v0.iter().enumerate() {
        for &b in &v0[i + 1..] {
            best = best.min(cell_chain_distance(graph, a, b)?);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests;
