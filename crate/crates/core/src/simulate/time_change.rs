use rand::Rng;

use super::{local_times, JumpChain, LocalTimeField, Trajectory};
use crate::error::{bail, Result};
use crate::network::ResistanceNetwork;

/// `A_t = sum_x L_t(x) nu(x)`, stored as a continuous piecewise-linear function
/// with kinks at the jump times of the underlying path.
#[derive(Clone, Debug)]
pub struct AdditiveFunctional {
    starts: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
    horizon: f64,
    total: f64,
}

/// Additive functional of `nu` along the path recorded in `ltf`.
pub fn additive_functional(ltf: &LocalTimeField, nu: &[f64]) -> Result<AdditiveFunctional> {
    if nu.len() != ltf.vertex_count() {
        bail!(InvalidArgument, "measure has {} entries for {} vertices", nu.len(), ltf.vertex_count());
    }
    if let Some(x) = nu.iter().position(|v| !(*v >= 0.0) || !v.is_finite()) {
        bail!(InvalidArgument, "measure must be nonnegative and finite, vertex {x} has {}", nu[x]);
    }
    let (times, states) = ltf.path();
    let mu = ltf.measure();
    let mut values = Vec::with_capacity(times.len());
    let mut slopes = Vec::with_capacity(times.len());
    let mut a = 0.0;
    for (i, &x) in states.iter().enumerate() {
        let end = times.get(i + 1).copied().unwrap_or(ltf.horizon());
        let slope = nu[x] / mu[x];
        values.push(a);
        slopes.push(slope);
        a += slope * (end - times[i]);
    }
    Ok(AdditiveFunctional { starts: times.to_vec(), values, slopes, horizon: ltf.horizon(), total: a })
}

impl AdditiveFunctional {
    /// `A_t` for `0 <= t <= horizon`.
    pub fn value(&self, t: f64) -> Result<f64> {
        if !(0.0..=self.horizon).contains(&t) {
            bail!(InvalidArgument, "time {t} outside [0, {}]", self.horizon);
        }
        let i = self.starts.partition_point(|s| *s <= t) - 1;
        Ok(self.values[i] + self.slopes[i] * (t - self.starts[i]))
    }

    /// `A` at the horizon.
    pub fn total(&self) -> f64 {
        self.total
    }

    /// Right-continuous inverse `tau(a) = inf{s : A_s > a}`; `None` once `a >= A_T`.
    pub fn inverse(&self, a: f64) -> Option<f64> {
        if !(a >= 0.0) || a >= self.total {
            return None;
        }
        // first segment whose end value exceeds a; flat segments never qualify
        let mut lo = 0;
        let mut hi = self.values.len();
        while lo < hi {
            let mid = (lo + hi) / 2;
            let end = self.values.get(mid + 1).copied().unwrap_or(self.total);
            if end > a {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        let i = lo;
        Some((self.starts[i] + (a - self.values[i]) / self.slopes[i]).max(self.starts[i]))
    }
}

/// Time-changed path with a flag for running out of the original path.
#[derive(Clone, Debug)]
pub struct TimeChanged {
    pub trajectory: Trajectory,
    /// The requested horizon exceeded `A_T`; the output stops at `A_T`.
    pub truncated: bool,
}

/// `X^nu_t = X_{tau(t)}` with `tau` the right-continuous inverse of `A`.
///
/// Time spent outside the support of `nu` is removed, so excursions there
/// collapse into jumps between support points. With `horizon = None` the full
/// time-changed path up to `A_T` is returned.
pub fn time_change(traj: &Trajectory, ltf: &LocalTimeField, nu: &[f64], horizon: Option<f64>) -> Result<TimeChanged> {
    if ltf.path().0 != traj.jump_times() || ltf.path().1 != traj.states() {
        bail!(InvalidArgument, "local-time field belongs to a different path");
    }
    if nu.iter().all(|v| *v == 0.0) {
        bail!(InvalidArgument, "time change by the zero measure");
    }
    let a = additive_functional(ltf, nu)?;
    if a.total == 0.0 {
        bail!(InvalidArgument, "path never visits the support of the measure");
    }
    let target = match horizon {
        Some(h) if !(h > 0.0) || !h.is_finite() => bail!(InvalidArgument, "horizon must be positive, got {h}"),
        Some(h) => h,
        None => a.total,
    };
    let end = target.min(a.total);
    let mut times = Vec::new();
    let mut states: Vec<usize> = Vec::new();
    for (i, &x) in traj.states().iter().enumerate() {
        if a.slopes[i] == 0.0 || a.values[i] >= end {
            continue;
        }
        let next = a.values.get(i + 1).copied().unwrap_or(a.total);
        if next == a.values[i] {
            continue;
        }
        if states.last() != Some(&x) {
            times.push(a.values[i]);
            states.push(x);
        }
    }
    Ok(TimeChanged { trajectory: Trajectory::new(times, states, end)?, truncated: target > a.total })
}

/// Constant-speed walk simulated directly: unit-mean holds scaled by the
/// degree measure, i.e. speed measure `nu(x) = sum_y c(x,y)`.
pub fn csrw<R: Rng + ?Sized>(net: &ResistanceNetwork, start: usize, horizon: f64, rng: &mut R) -> Result<Trajectory> {
    let degree: Vec<f64> = (0..net.vertex_count()).map(|x| net.conductance_sum(x)).collect();
    JumpChain::new(net, &degree)?.trajectory(start, horizon, rng)
}

/// Constant-speed walk as the time change of the counting-measure VSRW by the
/// degree measure. The VSRW horizon is doubled until it covers `horizon`.
pub fn csrw_by_time_change<R: Rng + Clone>(net: &ResistanceNetwork, start: usize, horizon: f64, rng: &mut R) -> Result<Trajectory> {
    let n = net.vertex_count();
    let counting = net.with_measure(vec![1.0; n])?;
    let degree: Vec<f64> = (0..n).map(|x| net.conductance_sum(x)).collect();
    let chain = JumpChain::vsrw(&counting)?;
    let min_degree = degree.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut base = horizon / min_degree;
    loop {
        let mut r = rng.clone();
        let path = chain.trajectory(start, base, &mut r)?;
        let ltf = local_times(&path, &counting)?;
        let out = time_change(&path, &ltf, &degree, Some(horizon))?;
        if !out.truncated {
            *rng = r;
            return Ok(out.trajectory);
        }
        base *= 2.0;
    }
}
