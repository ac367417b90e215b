//! Random environments: conductances, trap landscapes, Gaussian free fields,
//! Liouville measures and Poisson FIN measures.

mod fin;
mod gff;

use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::network::ResistanceNetwork;
use crate::rng::open01;

pub use fin::{fin_measure, fin_laplace_transform, FinMeasure, FinMetadata};
pub use gff::{liouville_measure, GffSample, GffSampler};

/// Law of a single conductance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum ConductanceLaw {
    Constant { value: f64 },
    /// `P(w > u) = u^-alpha` on `[1, inf)`.
    Pareto { alpha: f64 },
    /// `floor + exp(N(log_mean, log_sd^2))`, bounded below by `floor`.
    Lognormal { log_mean: f64, log_sd: f64, floor: f64 },
}

impl ConductanceLaw {
    pub fn pareto(alpha: f64) -> Self {
        Self::Pareto { alpha }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Constant { value } if !(value > 0.0) || !value.is_finite() => {
                bail!(InvalidArgument, "constant conductance must be positive, got {value}")
            }
            Self::Pareto { alpha } if !(alpha > 0.0) || !alpha.is_finite() => {
                bail!(InvalidArgument, "pareto index must be positive, got {alpha}")
            }
            Self::Lognormal { log_sd, floor, log_mean } if !(log_sd >= 0.0) || !(floor > 0.0) || !log_mean.is_finite() => {
                bail!(InvalidArgument, "lognormal law needs log_sd >= 0 and floor > 0")
            }
            _ => Ok(()),
        }
    }

    /// Positive lower bound of the support.
    pub fn lower_bound(&self) -> f64 {
        match *self {
            Self::Constant { value } => value,
            Self::Pareto { .. } => 1.0,
            Self::Lognormal { floor, .. } => floor,
        }
    }

    pub fn has_finite_mean(&self) -> bool {
        !matches!(*self, Self::Pareto { alpha } if alpha <= 1.0)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::Constant { value } => value,
            Self::Pareto { alpha } => pareto(rng, alpha),
            Self::Lognormal { log_mean, log_sd, floor } => {
                let z: f64 = Normal::new(log_mean, log_sd).expect("validated").sample(rng);
                floor + z.exp()
            }
        }
    }
}

/// Pareto variate on `[1, inf)` with tail index `alpha`, by inversion `U^(-1/alpha)`.
pub fn pareto<R: Rng + ?Sized>(rng: &mut R, alpha: f64) -> f64 {
    open01(rng).powf(-1.0 / alpha)
}

/// How conductances are drawn on a fractal network.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    /// One independent draw per edge.
    PerEdge,
    /// Each cell draws its template edges independently.
    PerCell,
    /// Each cell draws once and uses the value on all its template edges.
    PerCellShared,
}

/// Replaces the conductances of `net` by random ones.
///
/// In the per-cell modes an edge lying in several cells (possible only for
/// schemes whose cells share edges, like the carpet) receives the sum of its
/// cells' draws, matching how such edges are merged when the graph is built.
pub fn sample_conductances<R: Rng + ?Sized>(
    net: &ResistanceNetwork,
    law: &ConductanceLaw,
    mode: SamplingMode,
    rng: &mut R,
) -> Result<ResistanceNetwork> {
    law.validate()?;
    let c = match mode {
        SamplingMode::PerEdge => (0..net.edge_count()).map(|_| law.sample(rng)).collect(),
        SamplingMode::PerCell | SamplingMode::PerCellShared => {
            let Some(cells) = net.cell_index() else {
                bail!(InvalidArgument, "per-cell sampling needs a network built from a fractal scheme");
            };
            let mut c = vec![0.0; net.edge_count()];
            for edges in &cells.edges {
                let shared = law.sample(rng);
                for &e in edges {
                    c[e] += if mode == SamplingMode::PerCell { law.sample(rng) } else { shared };
                }
            }
            c
        }
    };
    net.with_conductances(&c)
}

/// I.i.d. pareto(`alpha`) trap depths, one per vertex.
pub fn trap_landscape<R: Rng + ?Sized>(net: &ResistanceNetwork, alpha: f64, rng: &mut R) -> Result<Vec<f64>> {
    if !(alpha > 0.0 && alpha < 1.0) {
        bail!(InvalidArgument, "trap index must lie in (0, 1), got {alpha}");
    }
    Ok((0..net.vertex_count()).map(|_| pareto(rng, alpha)).collect())
}

/// `nu(x) = sum_y c(x,y)`.
pub fn degree_measure(net: &ResistanceNetwork) -> Vec<f64> {
    (0..net.vertex_count()).map(|x| net.conductance_sum(x)).collect()
}

/// Hill estimate of the tail index from the `k` largest samples.
pub fn hill_estimator(samples: &[f64], k: usize) -> Result<f64> {
    if k == 0 || k >= samples.len() {
        bail!(InvalidArgument, "need 0 < k < {} order statistics", samples.len());
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let threshold = sorted[k].ln();
    let mean = sorted[..k].iter().map(|x| x.ln() - threshold).sum::<f64>() / k as f64;
    Ok(1.0 / mean)
}

/// Monte Carlo estimate of `E[1/w]` and its standard error.
pub fn mean_inverse<R: Rng + ?Sized>(law: &ConductanceLaw, samples: usize, rng: &mut R) -> Result<(f64, f64)> {
    law.validate()?;
    if samples < 2 {
        bail!(InvalidArgument, "need at least two samples");
    }
    let draws: Vec<f64> = (0..samples).map(|_| 1.0 / law.sample(rng)).collect();
    let mean = draws.iter().sum::<f64>() / samples as f64;
    let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (samples - 1) as f64;
    Ok((mean, (var / samples as f64).sqrt()))
}

/// Writes a vertex measure as CSV `vertex,weight`.
pub fn write_measure_csv<W: Write>(weights: &[f64], mut out: W) -> Result<()> {
    writeln!(out, "vertex,weight")?;
    for (x, w) in weights.iter().enumerate() {
        writeln!(out, "{x},{w:?}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests;
