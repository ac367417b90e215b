use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::pareto;
use crate::error::{bail, Result};

/// Atoms of a Poisson point process with intensity `alpha v^(-1-alpha) dv mu(dx)`,
/// keeping only weights of at least `v_min` and summing atoms per vertex.
#[derive(Clone, Debug, PartialEq)]
pub struct FinMeasure {
    /// `(vertex, summed weight)` for every vertex that received an atom, ascending.
    pub atoms: Vec<(usize, f64)>,
    pub vertex_count: usize,
    pub metadata: FinMetadata,
}

/// Sidecar describing the truncation of a [`FinMeasure`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinMetadata {
    pub alpha: f64,
    pub v_min: f64,
    /// Expected mass of the discarded atoms below `v_min`: `mu(F) alpha v_min^(1-alpha) / (1-alpha)`.
    pub bias: f64,
    /// Number of atoms drawn before per-vertex summation.
    pub atom_count: usize,
}

pub fn fin_measure<R: Rng + ?Sized>(base: &[f64], alpha: f64, v_min: f64, rng: &mut R) -> Result<FinMeasure> {
    if !(alpha > 0.0 && alpha < 1.0) {
        bail!(InvalidArgument, "FIN index must lie in (0, 1), got {alpha}");
    }
    if !(v_min > 0.0) || !v_min.is_finite() {
        bail!(InvalidArgument, "truncation level must be positive, got {v_min}");
    }
    if let Some(x) = base.iter().position(|m| !(*m >= 0.0) || !m.is_finite()) {
        bail!(InvalidArgument, "base measure must be nonnegative, vertex {x} has {}", base[x]);
    }
    let rate = v_min.powf(-alpha);
    let mut atoms = Vec::new();
    let mut atom_count = 0;
    for (x, &m) in base.iter().enumerate() {
        if m == 0.0 {
            continue;
        }
        let count = Poisson::new(m * rate)
            .map_err(|e| crate::Error::Numerical(format!("Poisson intensity {}: {e}", m * rate)))?
            .sample(rng) as usize;
        if count == 0 {
            continue;
        }
        atom_count += count;
        let w: f64 = (0..count).map(|_| v_min * pareto(rng, alpha)).sum();
        atoms.push((x, w));
    }
    let total: f64 = base.iter().sum();
    let bias = total * alpha * v_min.powf(1.0 - alpha) / (1.0 - alpha);
    Ok(FinMeasure { atoms, vertex_count: base.len(), metadata: FinMetadata { alpha, v_min, bias, atom_count } })
}

impl FinMeasure {
    /// Dense per-vertex weights.
    pub fn weights(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.vertex_count];
        for &(x, v) in &self.atoms {
            w[x] = v;
        }
        w
    }

    pub fn total(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum()
    }

    /// Mass of a vertex set.
    pub fn mass_of(&self, set: &[usize]) -> f64 {
        self.atoms.iter().filter(|(x, _)| set.contains(x)).map(|a| a.1).sum()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        super::write_measure_csv(&self.weights(), out)
    }

    pub fn write_sidecar<W: Write>(&self, mut out: W) -> Result<()> {
        serde_json::to_writer_pretty(&mut out, &self.metadata)?;
        writeln!(out)?;
        Ok(())
    }
}

/// `E exp(-lambda nu(B)) = exp(-lambda^alpha Gamma(1-alpha) mu(B))` for the untruncated measure.
pub fn fin_laplace_transform(lambda: f64, alpha: f64, mass: f64) -> f64 {
    (-lambda.powf(alpha) * statrs::function::gamma::gamma(1.0 - alpha) * mass).exp()
}
