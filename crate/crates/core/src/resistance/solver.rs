//! Linear solves with the grounded Laplacian.
//!
//! Removing one row and column of a connected network's Laplacian leaves a
//! symmetric positive definite matrix. Small systems are factored densely by
//! Cholesky; large ones use Jacobi-preconditioned conjugate gradients.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{bail, Error, Result};
use crate::network::ResistanceNetwork;

/// Largest vertex count handled by dense factorization.
pub const DENSE_LIMIT: usize = 5_000;

/// Relative residual at which conjugate gradients stops.
pub const CG_TOLERANCE: f64 = 1e-12;

/// Dense weighted Laplacian `L(x,x) = sum_y c(x,y)`, `L(x,y) = -c(x,y)`.
pub fn laplacian(net: &ResistanceNetwork) -> DMatrix<f64> {
    let n = net.vertex_count();
    let mut l = DMatrix::zeros(n, n);
    for e in net.edges() {
        l[(e.u, e.v)] -= e.conductance;
        l[(e.v, e.u)] -= e.conductance;
        l[(e.u, e.u)] += e.conductance;
        l[(e.v, e.v)] += e.conductance;
    }
    l
}

/// Principal submatrix on `rows` (in the given order).
pub(crate) fn submatrix(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

pub(crate) fn cholesky(m: DMatrix<f64>, what: &str) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(m).ok_or_else(|| Error::Numerical(format!("{what} is not positive definite")))
}

/// Sparse symmetric matrix in compressed rows.
struct Csr {
    offsets: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl Csr {
    fn mul(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.offsets[i]..self.offsets[i + 1] {
                s += self.vals[k] * x[self.cols[k]];
            }
            *o = s;
        }
    }
}

enum Backend {
    Dense(Cholesky<f64, Dyn>),
    Cg { matrix: Csr, diag: Vec<f64> },
}

/// Solver for `(L + diag(shift))` restricted to every vertex except `ground`.
///
/// With a zero shift this is the Laplacian killed at `ground`; its inverse is
/// the Green function of the walk killed on hitting `ground`.
pub struct GroundedSolver {
    ground: Option<usize>,
    /// Position of each network vertex in the reduced system.
    slot: Vec<Option<usize>>,
    size: usize,
    backend: Backend,
}

impl GroundedSolver {
    pub fn new(net: &ResistanceNetwork, ground: usize) -> Result<Self> {
        net.check_vertex(ground)?;
        Self::build(net, Some(ground), None)
    }

    /// Solver for `L + diag(shift)` on all vertices; `shift` must make it definite.
    pub fn shifted(net: &ResistanceNetwork, shift: &[f64]) -> Result<Self> {
        if shift.len() != net.vertex_count() || shift.iter().all(|s| *s <= 0.0) {
            bail!(InvalidArgument, "shift must be nonnegative and not identically zero");
        }
        Self::build(net, None, Some(shift))
    }

    fn build(net: &ResistanceNetwork, ground: Option<usize>, shift: Option<&[f64]>) -> Result<Self> {
        let n = net.vertex_count();
        let mut slot = vec![None; n];
        let mut size = 0;
        for (x, s) in slot.iter_mut().enumerate() {
            if Some(x) != ground {
                *s = Some(size);
                size += 1;
            }
        }
        let diag_of = |x: usize| net.conductance_sum(x) + shift.map_or(0.0, |s| s[x]);
        let backend = if n <= DENSE_LIMIT {
            let mut m = DMatrix::zeros(size, size);
            for x in 0..n {
                let Some(i) = slot[x] else { continue };
                m[(i, i)] = diag_of(x);
                for &(y, c) in net.neighbors(x) {
                    if let Some(j) = slot[y] {
                        m[(i, j)] = -c;
                    }
                }
            }
            Backend::Dense(cholesky(m, "grounded Laplacian")?)
        } else {
            let mut offsets = vec![0];
            let mut cols = Vec::new();
            let mut vals = Vec::new();
            let mut diag = Vec::with_capacity(size);
            for x in 0..n {
                let Some(i) = slot[x] else { continue };
                cols.push(i);
                vals.push(diag_of(x));
                diag.push(diag_of(x));
                for &(y, c) in net.neighbors(x) {
                    if let Some(j) = slot[y] {
                        cols.push(j);
                        vals.push(-c);
                    }
                }
                offsets.push(cols.len());
            }
            Backend::Cg { matrix: Csr { offsets, cols, vals }, diag }
        };
        Ok(Self { ground, slot, size, backend })
    }

    pub fn ground(&self) -> Option<usize> {
        self.ground
    }

    /// Solves with a right-hand side indexed by network vertices. The entry at
    /// the ground vertex is ignored and the returned potential vanishes there.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let mut b = vec![0.0; self.size];
        for (x, s) in self.slot.iter().enumerate() {
            if let Some(i) = s {
                b[*i] = rhs[x];
            }
        }
        let reduced = match &self.backend {
            Backend::Dense(chol) => chol.solve(&DVector::from_vec(b)).as_slice().to_vec(),
            Backend::Cg { matrix, diag } => conjugate_gradient(matrix, diag, &b)?,
        };
        Ok(self
            .slot
            .iter()
            .map(|s| s.map_or(0.0, |i| reduced[i]))
            .collect())
    }

    /// Full inverse of the reduced matrix, indexed by reduced slots.
    pub(crate) fn inverse(&self) -> Result<DMatrix<f64>> {
        match &self.backend {
            Backend::Dense(chol) => Ok(chol.inverse()),
            Backend::Cg { .. } => {
                let mut inv = DMatrix::zeros(self.size, self.size);
                let verts: Vec<usize> = (0..self.slot.len()).filter(|x| self.slot[*x].is_some()).collect();
                for &x in &verts {
                    let mut e = vec![0.0; self.slot.len()];
                    e[x] = 1.0;
                    let col = self.solve(&e)?;
                    let j = self.slot[x].unwrap();
                    for &y in &verts {
                        inv[(self.slot[y].unwrap(), j)] = col[y];
                    }
                }
                Ok(inv)
            }
        }
    }

    pub(crate) fn slot(&self, x: usize) -> Option<usize> {
        self.slot[x]
    }
}

fn conjugate_gradient(a: &Csr, diag: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    let n = b.len();
    let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(x);
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let max_iter = 10 * n + 100;
    let mut history = Vec::new();
    for _ in 0..max_iter {
        a.mul(&p, &mut ap);
        let alpha = rz / p.iter().zip(&ap).map(|(a, b)| a * b).sum::<f64>();
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rel = r.iter().map(|v| v * v).sum::<f64>().sqrt() / bnorm;
        history.push(rel);
        if rel <= CG_TOLERANCE {
            return Ok(x);
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual: *history.last().unwrap_or(&f64::NAN),
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::random_connected;

    #[test]
    fn cg_matches_dense() {
        let mut rng = crate::rng::stream(1, 0);
        let net = random_connected(60, 80, &mut rng).unwrap();
        let dense = GroundedSolver::new(&net, 5).unwrap();
        let n = net.vertex_count();
        let mut slot = vec![None; n];
        let mut size = 0;
        for (x, s) in slot.iter_mut().enumerate() {
            if x != 5 {
                *s = Some(size);
                size += 1;
            }
        }
        let mut offsets = vec![0];
        let (mut cols, mut vals, mut diag) = (vec![], vec![], vec![]);
        for x in 0..n {
            let Some(i) = slot[x] else { continue };
            cols.push(i);
            vals.push(net.conductance_sum(x));
            diag.push(net.conductance_sum(x));
            for &(y, c) in net.neighbors(x) {
                if let Some(j) = slot[y] {
                    cols.push(j);
                    vals.push(-c);
                }
            }
            offsets.push(cols.len());
        }
        let cg = GroundedSolver {
            ground: Some(5),
            slot,
            size,
            backend: Backend::Cg { matrix: Csr { offsets, cols, vals }, diag },
        };
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let a = dense.solve(&rhs).unwrap();
        let b = cg.solve(&rhs).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-9 * (1.0 + x.abs()));
        }
        assert_eq!(a[5], 0.0);
    }
}
