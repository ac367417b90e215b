use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{bail, Result};
use crate::network::ResistanceNetwork;
use crate::resistance::laplacian;

/// Jitter added to the diagonal, relative to its largest entry, if the first
/// factorization fails.
const JITTER: f64 = 1e-12;

/// Samples the free field pinned at the root: centred Gaussian with covariance
/// the Green function killed at the root, so `E(g(x) - g(y))^2 = R(x,y)`.
///
/// With `K = C C^T` the Cholesky factor of the killed Laplacian, `C^-T z` has
/// covariance `K^-1`.
#[derive(Clone, Debug)]
pub struct GffSampler {
    root: usize,
    factor: DMatrix<f64>,
    variance: Arc<[f64]>,
    jitter: f64,
}

/// One field realization and the pointwise variances `g(x,x)`.
#[derive(Clone, Debug)]
pub struct GffSample {
    pub values: Vec<f64>,
    pub variance: Arc<[f64]>,
}

impl GffSample {
    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
}

impl GffSampler {
    pub fn new(net: &ResistanceNetwork) -> Result<Self> {
        let n = net.vertex_count();
        let root = net.root();
        if n < 2 {
            bail!(InvalidArgument, "the pinned field needs at least two vertices");
        }
        let keep: Vec<usize> = (0..n).filter(|x| *x != root).collect();
        let l = laplacian(net);
        let k = DMatrix::from_fn(n - 1, n - 1, |i, j| l[(keep[i], keep[j])]);
        let (chol, jitter) = match k.clone().cholesky() {
            Some(c) => (c, 0.0),
            None => {
                let scale = (0..n - 1).map(|i| k[(i, i)]).fold(0.0, f64::max);
                let jitter = JITTER * scale;
                log::warn!("killed Laplacian not definite; retrying with jitter {jitter:e}");
                let mut kj = k;
                for i in 0..n - 1 {
                    kj[(i, i)] += jitter;
                }
                match kj.cholesky() {
                    Some(c) => (c, jitter),
                    None => bail!(Numerical, "killed Laplacian is not positive definite"),
                }
            }
        };
        let inv = chol.inverse();
        let mut variance = vec![0.0; n];
        for (i, &x) in keep.iter().enumerate() {
            variance[x] = inv[(i, i)];
        }
        Ok(Self { root, factor: chol.l(), variance: variance.into(), jitter })
    }

    /// `g(x,x) = R(root, x)`.
    pub fn variance(&self) -> &[f64] {
        &self.variance
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> GffSample {
        let m = self.factor.nrows();
        let z = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = self.factor.tr_solve_lower_triangular(&z).expect("nonzero Cholesky diagonal");
        let mut values = Vec::with_capacity(m + 1);
        values.extend_from_slice(&y.as_slice()[..self.root]);
        values.push(0.0);
        values.extend_from_slice(&y.as_slice()[self.root..]);
        GffSample { values, variance: Arc::clone(&self.variance) }
    }
}

/// `nu(x) = exp(kappa gamma(x) - kappa^2 g(x,x) / 2) mu(x)`, which has mean `mu(x)`.
pub fn liouville_measure(gff: &GffSample, kappa: f64, base: &[f64]) -> Result<Vec<f64>> {
    if !(kappa >= 0.0) || !kappa.is_finite() {
        bail!(InvalidArgument, "kappa must be nonnegative, got {kappa}");
    }
    if base.len() != gff.values.len() {
        bail!(InvalidArgument, "base measure has {} entries for {} vertices", base.len(), gff.values.len());
    }
    Ok(gff
        .values
        .iter()
        .zip(gff.variance.iter())
        .zip(base)
        .map(|((g, v), m)| (kappa * g - 0.5 * kappa * kappa * v).exp() * m)
        .collect())
}
