use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};

/// Tolerance, relative to the largest entry, for the membership predicates.
pub const MEMBERSHIP_TOLERANCE: f64 = 1e-10;

/// Symmetric matrix on `V_0` with zero row sums; off-diagonal entries are
/// conductances, so `-Q` is the Laplacian of a network on `V_0`.
#[derive(Clone, Debug, PartialEq)]
pub struct QMatrix(DMatrix<f64>);

#[derive(Serialize, Deserialize)]
struct QDocument {
    labels: Vec<String>,
    entries: Vec<f64>,
}

impl Serialize for QMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let n = self.size();
        QDocument {
            labels: (0..n).map(|i| format!("a{i}")).collect(),
            entries: (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| self.0[(i, j)]).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for QMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let doc = QDocument::deserialize(d)?;
        let n = doc.labels.len();
        if doc.entries.len() != n * n {
            return Err(serde::de::Error::custom(format!("{} entries for {n} labels", doc.entries.len())));
        }
        Ok(Self(DMatrix::from_row_slice(n, n, &doc.entries)))
    }
}

impl QMatrix {
    /// Wraps a square matrix; membership in the Q-space is checked separately.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() < 2 {
            bail!(InvalidArgument, "Q must be square of size at least 2, got {}x{}", m.nrows(), m.ncols());
        }
        Ok(Self(m))
    }

    /// Builds Q from conductances `(i, j, c)`; repeated pairs add up.
    pub fn from_conductances(size: usize, conductances: &[(usize, usize, f64)]) -> Result<Self> {
        let mut m = DMatrix::zeros(size, size);
        for &(i, j, c) in conductances {
            if i >= size || j >= size || i == j {
                bail!(InvalidArgument, "bad conductance index ({i}, {j}) for size {size}");
            }
            m[(i, j)] += c;
            m[(j, i)] += c;
            m[(i, i)] -= c;
            m[(j, j)] -= c;
        }
        Self::new(m)
    }

    /// Complete graph on `size` points with every conductance `c`.
    pub fn uniform(size: usize, c: f64) -> Result<Self> {
        let pairs: Vec<_> = (0..size).flat_map(|i| (i + 1..size).map(move |j| (i, j, c))).collect();
        Self::from_conductances(size, &pairs)
    }

    /// `-L` for a Laplacian `L`.
    pub fn from_laplacian(l: &DMatrix<f64>) -> Result<Self> {
        Self::new(-l)
    }

    pub fn size(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    /// Off-diagonal entries `Q_ij`, `i < j`, in row order.
    pub fn conductances(&self) -> Vec<f64> {
        let n = self.size();
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).map(|(i, j)| self.0[(i, j)]).collect()
    }

    fn tolerance(&self) -> f64 {
        MEMBERSHIP_TOLERANCE * self.0.amax().max(f64::MIN_POSITIVE)
    }

    /// Symmetric with zero row sums.
    pub fn in_q(&self) -> bool {
        let tol = self.tolerance();
        let n = self.size();
        (0..n).all(|i| (0..n).all(|j| (self.0[(i, j)] - self.0[(j, i)]).abs() <= tol))
            && (0..n).all(|i| self.0.row(i).sum().abs() <= tol * n as f64)
    }

    /// In Q and all off-diagonal entries nonnegative.
    pub fn in_qm(&self) -> bool {
        let tol = self.tolerance();
        self.in_q() && self.conductances().iter().all(|c| *c >= -tol)
    }

    /// In Q and all off-diagonal entries positive.
    pub fn in_interior(&self) -> bool {
        let tol = self.tolerance();
        self.in_q() && self.conductances().iter().all(|c| *c > tol)
    }

    /// In Q_M and the form vanishes only on constants, i.e. the graph of
    /// positive conductances is connected.
    pub fn is_irreducible(&self) -> bool {
        if !self.in_qm() {
            return false;
        }
        let tol = self.tolerance();
        let n = self.size();
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..n {
                if !seen[j] && self.0[(i, j)] > tol {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.iter().all(|s| *s)
    }

    /// `S_Q(xi) = -xi^T Q xi = 1/2 sum_ij Q_ij (xi_i - xi_j)^2`.
    pub fn form(&self, xi: &[f64]) -> f64 {
        let n = self.size();
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s -= self.0[(i, j)] * xi[i] * xi[j];
            }
        }
        s
    }

    /// `-trace(Q)`, twice the sum of conductances; positive on Q_M minus zero.
    pub fn trace_norm(&self) -> f64 {
        -self.0.trace()
    }

    pub fn frobenius(&self) -> f64 {
        self.0.norm()
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self(&self.0 * a)
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Self {
        Self(&self.0 * a + &other.0 * b)
    }

    pub fn distance(&self, other: &Self) -> f64 {
        (&self.0 - &other.0).norm()
    }

    /// Symmetrizes and resets the diagonal to minus the off-diagonal row sums,
    /// removing rounding drift that the renormalization maps would otherwise amplify.
    pub fn balanced(mut self) -> Self {
        let n = self.size();
        self.0 = (&self.0 + self.0.transpose()) * 0.5;
        for i in 0..n {
            let off: f64 = (0..n).filter(|j| *j != i).map(|j| self.0[(i, j)]).sum();
            self.0[(i, i)] = -off;
        }
        self
    }
}
