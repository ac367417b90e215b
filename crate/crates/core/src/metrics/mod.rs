//! Convergence diagnostics for sequences of measured metric spaces.
//!
//! Every comparison here happens inside a common ambient space supplied by
//! the caller, so the Gromov-Hausdorff-type gauges are upper bounds: no
//! optimization over embeddings is attempted.

mod flow;

use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{bail, Error, Result};
use crate::network::ResistanceNetwork;
use crate::resistance::ResistanceMatrix;
use crate::simulate::LocalTimeField;
use flow::FlowNetwork;

/// A finite rooted measured subset of an ambient finite metric space.
///
/// The ambient space is a distance matrix shared between every space that
/// came from it; comparisons require both sides to share it.
#[derive(Clone, Debug)]
pub struct EmbeddedSpace {
    ambient: Arc<DMatrix<f64>>,
    points: Vec<usize>,
    masses: Vec<f64>,
    root: usize,
}

impl EmbeddedSpace {
    /// Points in R^d with the Euclidean metric; the ambient space is the point set itself.
    pub fn euclidean(coords: &[Vec<f64>], masses: Vec<f64>, root: usize) -> Result<Self> {
        let n = coords.len();
        if let Some(p) = coords.iter().find(|p| p.len() != coords[0].len()) {
            bail!(InvalidArgument, "mixed dimensions {} and {}", coords[0].len(), p.len());
        }
        let d = DMatrix::from_fn(n, n, |i, j| euclid(&coords[i], &coords[j]));
        Self::new(Arc::new(d), (0..n).collect(), masses, root)
    }

    /// `points` are ambient indices, `root` is an index into `points`.
    pub fn new(ambient: Arc<DMatrix<f64>>, points: Vec<usize>, masses: Vec<f64>, root: usize) -> Result<Self> {
        if points.is_empty() {
            bail!(InvalidArgument, "embedded space needs at least one point");
        }
        if points.len() != masses.len() {
            bail!(InvalidArgument, "{} points but {} masses", points.len(), masses.len());
        }
        if let Some(p) = points.iter().find(|p| **p >= ambient.nrows()) {
            bail!(InvalidArgument, "point {p} outside an ambient space of {}", ambient.nrows());
        }
        if let Some(m) = masses.iter().find(|m| !(**m >= 0.0) || !m.is_finite()) {
            bail!(InvalidArgument, "masses must be finite and nonnegative, got {m}");
        }
        if root >= points.len() {
            bail!(InvalidArgument, "root {root} outside {} points", points.len());
        }
        Ok(Self { ambient, points, masses, root })
    }

    /// A network with its own measure and root, metrized by `r`.
    pub fn from_resistance(net: &ResistanceNetwork, r: &ResistanceMatrix) -> Result<Self> {
        if r.len() != net.vertex_count() {
            bail!(InvalidArgument, "resistance matrix of size {} for {} vertices", r.len(), net.vertex_count());
        }
        Self::new(Arc::new(r.matrix().clone()), (0..r.len()).collect(), net.measure().to_vec(), net.root())
    }

    /// A network with its planar (or other) coordinates and Euclidean distances.
    pub fn from_coords(net: &ResistanceNetwork) -> Result<Self> {
        let coords = net.coords().ok_or_else(|| Error::InvalidArgument("network has no coordinates".into()))?;
        Self::euclidean(coords, net.measure().to_vec(), net.root())
    }

    /// Another subset of the same ambient space.
    pub fn subspace(&self, points: Vec<usize>, masses: Vec<f64>, root: usize) -> Result<Self> {
        Self::new(self.ambient.clone(), points, masses, root)
    }

    pub fn ambient(&self) -> &Arc<DMatrix<f64>> {
        &self.ambient
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[usize] {
        &self.points
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    /// Ambient index of the root.
    pub fn root_point(&self) -> usize {
        self.points[self.root]
    }

    /// Distance between the `i`-th and `j`-th points.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.ambient[(self.points[i], self.points[j])]
    }

    pub fn diameter(&self) -> f64 {
        let n = self.len();
        (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| self.distance(i, j)).fold(0.0, f64::max)
    }

    /// Smallest positive distance between distinct points, `r_0`.
    pub fn min_separation(&self) -> f64 {
        let n = self.len();
        (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| self.distance(i, j))
            .filter(|d| *d > 0.0)
            .fold(f64::INFINITY, f64::min)
    }

    /// Same points with masses multiplied by `factor`.
    pub fn scale_masses(&self, factor: f64) -> Result<Self> {
        self.subspace(self.points.clone(), self.masses.iter().map(|m| m * factor).collect(), self.root)
    }

    /// Restriction of points and mass to the closed ball of radius `r` about the root.
    pub fn restricted(&self, r: f64) -> Self {
        let keep: Vec<usize> = (0..self.len()).filter(|i| self.distance(self.root, *i) <= r).collect();
        let root = keep.iter().position(|i| *i == self.root).expect("root lies in every ball");
        Self {
            ambient: self.ambient.clone(),
            points: keep.iter().map(|i| self.points[*i]).collect(),
            masses: keep.iter().map(|i| self.masses[*i]).collect(),
            root,
        }
    }

    fn check_common(&self, other: &Self) -> Result<()> {
        if !Arc::ptr_eq(&self.ambient, &other.ambient) && self.ambient != other.ambient {
            bail!(InvalidArgument, "spaces live in different ambient spaces");
        }
        Ok(())
    }
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Hausdorff distance between the point sets.
pub fn hausdorff_distance(a: &EmbeddedSpace, b: &EmbeddedSpace) -> Result<f64> {
    a.check_common(b)?;
    let d = &a.ambient;
    let directed = |from: &[usize], to: &[usize]| {
        from.iter()
            .map(|p| to.iter().map(|q| d[(*p, *q)]).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    Ok(directed(&a.points, &b.points).max(directed(&b.points, &a.points)))
}

/// Prohorov distance between the measures of two spaces.
///
/// Uses closed neighbourhoods, so the infimum is attained. By the max-flow
/// min-cut theorem `sup_A mu(A) - nu(A^eps)` equals `mu(F)` minus the largest
/// transport of mu into nu along pairs at distance at most `eps`, and that
/// flow only changes at pairwise distances. The answer is therefore either a
/// pairwise distance or a mass gap at one, found by bisection.
pub fn prohorov_distance(a: &EmbeddedSpace, b: &EmbeddedSpace) -> Result<f64> {
    a.check_common(b)?;
    let sa: Vec<(usize, f64)> = a.points.iter().zip(&a.masses).filter(|(_, m)| **m > 0.0).map(|(p, m)| (*p, *m)).collect();
    let sb: Vec<(usize, f64)> = b.points.iter().zip(&b.masses).filter(|(_, m)| **m > 0.0).map(|(p, m)| (*p, *m)).collect();
    let top = a.total_mass().max(b.total_mass());
    if sa.is_empty() || sb.is_empty() {
        return Ok(top);
    }
    let d = &a.ambient;
    let mut radii: Vec<f64> = sa.iter().flat_map(|(p, _)| sb.iter().map(move |(q, _)| d[(*p, *q)])).collect();
    radii.push(0.0);
    radii.sort_by(f64::total_cmp);
    radii.dedup();

    let gap = |eps: f64| -> f64 {
        let (n, m) = (sa.len(), sb.len());
        let (s, t) = (n + m, n + m + 1);
        let mut g = FlowNetwork::new(n + m + 2);
        for (i, (p, mp)) in sa.iter().enumerate() {
            g.add(s, i, *mp);
            for (j, (q, _)) in sb.iter().enumerate() {
                if d[(*p, *q)] <= eps {
                    g.add(i, n + j, f64::INFINITY);
                }
            }
        }
        for (j, (_, mq)) in sb.iter().enumerate() {
            g.add(n + j, t, *mq);
        }
        top - g.max_flow(s, t)
    };

    // smallest k with gap(radii[k]) <= radii[k]; gap is nonincreasing, radii increasing
    let (mut lo, mut hi) = (0, radii.len() - 1);
    let mut gaps = vec![f64::NAN; radii.len()];
    let eval = |k: usize, gaps: &mut Vec<f64>| {
        if gaps[k].is_nan() {
            gaps[k] = gap(radii[k]);
        }
        gaps[k]
    };
    if eval(hi, &mut gaps) > radii[hi] {
        // beyond the largest distance the flow is saturated and only the mass gap remains
        return Ok(gaps[hi]);
    }
    while lo < hi {
        let mid = (lo + hi) / 2;
        if eval(mid, &mut gaps) <= radii[mid] {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let mut best = radii[lo];
    if lo > 0 {
        best = best.min(eval(lo - 1, &mut gaps));
    }
    Ok(best)
}

/// `d_H + d_P + d(root, root')`: the summand of the Gromov-Hausdorff-Prohorov
/// distance for this particular embedding, hence an upper bound for it.
pub fn common_embedding_gap(a: &EmbeddedSpace, b: &EmbeddedSpace) -> Result<f64> {
    let h = hausdorff_distance(a, b)?;
    let p = prohorov_distance(a, b)?;
    Ok(h + p + a.ambient[(a.root_point(), b.root_point())])
}

/// `int_0^{r_max} e^{-r} (1 ∧ gap(a^(r), b^(r))) dr` with `r_max` the last grid point.
///
/// Restrictions are to closed balls about the roots, so the integrand is a
/// right-continuous step function that only jumps where a ball picks up a
/// point. It is integrated exactly between those radii; the grid only sets
/// the upper limit, and refining it does not change the value.
pub fn gh_vague_gap(a: &EmbeddedSpace, b: &EmbeddedSpace, r_grid: &[f64]) -> Result<f64> {
    a.check_common(b)?;
    if r_grid.is_empty() || r_grid.iter().any(|r| !(*r >= 0.0)) || r_grid.windows(2).any(|w| w[1] < w[0]) {
        bail!(InvalidArgument, "radius grid must be nonempty, nonnegative and ascending");
    }
    let r_max = *r_grid.last().unwrap();
    let mut breaks: Vec<f64> = (0..a.len())
        .map(|i| a.distance(a.root, i))
        .chain((0..b.len()).map(|i| b.distance(b.root, i)))
        .filter(|r| *r < r_max)
        .collect();
    breaks.push(0.0);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let pieces = breaks
        .par_iter()
        .enumerate()
        .map(|(k, &r)| {
            let end = breaks.get(k + 1).copied().unwrap_or(r_max);
            let g = common_embedding_gap(&a.restricted(r), &b.restricted(r))?;
            Ok(g.min(1.0) * ((-r).exp() - (-end).exp()))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(pieces.iter().sum())
}

/// Result of pushing a space onto an ordered list of centers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetProjection {
    /// For every point, the index of the center it is sent to.
    pub assignment: Vec<usize>,
    /// Pushed-forward mass per center.
    pub masses: Vec<f64>,
    /// `sup_x d(x, phi(x))`.
    pub max_displacement: f64,
}

/// Sends each point to the first center, in the given order, whose closed
/// `eps`-ball contains it. `centers` are ambient indices.
pub fn net_projection(space: &EmbeddedSpace, centers: &[usize], eps: f64) -> Result<NetProjection> {
    if !(eps >= 0.0) {
        bail!(InvalidArgument, "eps must be nonnegative, got {eps}");
    }
    if let Some(c) = centers.iter().find(|c| **c >= space.ambient.nrows()) {
        bail!(InvalidArgument, "center {c} outside the ambient space");
    }
    let d = &space.ambient;
    let mut assignment = Vec::with_capacity(space.len());
    let mut uncovered = Vec::new();
    let mut masses = vec![0.0; centers.len()];
    let mut max_displacement: f64 = 0.0;
    for (i, &p) in space.points.iter().enumerate() {
        match centers.iter().position(|c| d[(p, *c)] <= eps) {
            Some(k) => {
                assignment.push(k);
                masses[k] += space.masses[i];
                max_displacement = max_displacement.max(d[(p, centers[k])]);
            }
            None => uncovered.push(i),
        }
    }
    if !uncovered.is_empty() {
        bail!(InvalidArgument, "centers do not cover points {uncovered:?} within {eps}");
    }
    Ok(NetProjection { assignment, masses, max_displacement })
}

/// Ball masses `mu(B(x, r))` with open balls, for sampled centers and radii.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VolumeProfile {
    /// Indices into the space's points.
    pub centers: Vec<usize>,
    pub radii: Vec<f64>,
    /// `table[c][k] = mu(B(centers[c], radii[k]))`.
    pub table: Vec<Vec<f64>>,
    pub r0: f64,
    pub r_inf: f64,
    /// Geometric mean over centers per radius.
    pub profile: Vec<f64>,
    /// `max_{x, r} mu(B(x, 2r)) / mu(B(x, r))` over radii with nonempty balls.
    pub doubling: f64,
    /// `max_r max_x mu(B(x, r)) / min_x mu(B(x, r))`.
    pub spread: f64,
}

impl VolumeProfile {
    /// Both two-sided volume bounds hold with ratio at most `bound`.
    pub fn is_uvd_plausible(&self, bound: f64) -> bool {
        self.spread <= bound && self.doubling <= bound
    }

    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        write!(out, "center")?;
        for r in &self.radii {
            write!(out, ",{r:?}")?;
        }
        writeln!(out)?;
        for (c, row) in self.centers.iter().zip(&self.table) {
            write!(out, "{c}")?;
            for v in row {
                write!(out, ",{v:?}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

pub fn volume_profile(space: &EmbeddedSpace, centers: &[usize], radii: &[f64]) -> Result<VolumeProfile> {
    if radii.windows(2).any(|w| w[1] < w[0]) || radii.iter().any(|r| !(*r >= 0.0)) {
        bail!(InvalidArgument, "radii must be nonnegative and ascending");
    }
    if let Some(c) = centers.iter().find(|c| **c >= space.len()) {
        bail!(InvalidArgument, "center {c} outside {} points", space.len());
    }
    if centers.is_empty() {
        bail!(InvalidArgument, "need at least one center");
    }
    let ball = |x: usize, r: f64| -> f64 {
        (0..space.len()).filter(|y| space.distance(x, *y) < r).map(|y| space.masses[y]).sum()
    };
    let rows: Vec<(Vec<f64>, f64)> = centers
        .par_iter()
        .map(|&x| {
            let row: Vec<f64> = radii.iter().map(|r| ball(x, *r)).collect();
            let doubling = radii
                .iter()
                .zip(&row)
                .filter(|(_, v)| **v > 0.0)
                .map(|(r, v)| ball(x, 2.0 * r) / v)
                .fold(1.0, f64::max);
            (row, doubling)
        })
        .collect();
    let doubling = rows.iter().map(|r| r.1).fold(1.0, f64::max);
    let table: Vec<Vec<f64>> = rows.into_iter().map(|r| r.0).collect();
    let mut profile = Vec::with_capacity(radii.len());
    let mut spread: f64 = 1.0;
    for k in 0..radii.len() {
        let col: Vec<f64> = table.iter().map(|row| row[k]).collect();
        let (lo, hi) = col.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
        if lo > 0.0 {
            spread = spread.max(hi / lo);
            profile.push((col.iter().map(|v| v.ln()).sum::<f64>() / col.len() as f64).exp());
        } else {
            if hi > 0.0 {
                spread = f64::INFINITY;
            }
            profile.push(0.0);
        }
    }
    Ok(VolumeProfile {
        centers: centers.to_vec(),
        radii: radii.to_vec(),
        table,
        r0: space.min_separation(),
        r_inf: space.diameter(),
        profile,
        doubling,
        spread,
    })
}

/// Sup-distance between the empirical distribution functions.
pub fn ks_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        bail!(InvalidArgument, "KS distance needs two nonempty samples");
    }
    if a.iter().chain(b).any(|x| x.is_nan()) {
        bail!(InvalidArgument, "samples contain NaN");
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut best: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        best = best.max((i as f64 / n - j as f64 / m).abs());
    }
    Ok(best)
}

/// KS distance between two discrete laws given as `(value, weight)` atoms.
/// Weights are normalized; atoms with equal values merge.
pub fn ks_distance_weighted(a: &[(f64, f64)], b: &[(f64, f64)]) -> Result<f64> {
    let total = |s: &[(f64, f64)]| -> Result<f64> {
        if s.iter().any(|(x, w)| x.is_nan() || !(*w >= 0.0) || !w.is_finite()) {
            bail!(InvalidArgument, "atoms need real values and finite nonnegative weights");
        }
        let t: f64 = s.iter().map(|p| p.1).sum();
        if !(t > 0.0) {
            bail!(InvalidArgument, "law has no mass");
        }
        Ok(t)
    };
    let (ta, tb) = (total(a)?, total(b)?);
    let mut atoms: Vec<(f64, f64)> = a.iter().map(|(x, w)| (*x, w / ta)).chain(b.iter().map(|(x, w)| (*x, -w / tb))).collect();
    atoms.sort_by(|p, q| p.0.total_cmp(&q.0));
    let mut diff = 0.0;
    let mut best: f64 = 0.0;
    for (k, (x, w)) in atoms.iter().enumerate() {
        diff += w;
        if atoms.get(k + 1).is_none_or(|next| next.0 != *x) {
            best = best.max(diff.abs());
        }
    }
    Ok(best)
}

/// Asymptotic two-sample KS critical value at level `alpha`.
pub fn ks_critical_value(n: usize, m: usize, alpha: f64) -> f64 {
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    c * ((n + m) as f64 / (n as f64 * m as f64)).sqrt()
}

/// `sup_{R(y,z) <= delta} sup_{t <= t_max} |L_t(y) - L_t(z)|` for each `delta`.
pub fn local_time_modulus(ltf: &LocalTimeField, r: &ResistanceMatrix, deltas: &[f64], t_max: f64) -> Result<Vec<(f64, f64)>> {
    let n = ltf.vertex_count();
    if r.len() != n {
        bail!(InvalidArgument, "resistance matrix of size {} for {n} vertices", r.len());
    }
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .into_par_iter()
        .flat_map_iter(|y| (y + 1..n).map(move |z| (y, z)))
        .map(|(y, z)| Ok((r.get(y, z), ltf.sup_difference(y, z, t_max)?)))
        .collect::<Result<_>>()?;
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(deltas
        .iter()
        .map(|&delta| {
            let m = pairs.iter().take_while(|p| p.0 <= delta).map(|p| p.1).fold(0.0, f64::max);
            (delta, m)
        })
        .collect())
}

#[cfg(test)]
mod tests;
