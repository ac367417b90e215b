use std::io::Write;

use super::Trajectory;
use crate::error::{bail, Result};
use crate::network::ResistanceNetwork;

/// Local times `L_t(x) = |{s <= t : X_s = x}| / mu(x)` of one path.
///
/// Each vertex keeps its visit intervals and their running total, so a query
/// at any `t` is a binary search.
#[derive(Clone, Debug)]
pub struct LocalTimeField {
    measure: Vec<f64>,
    /// Per vertex: visit start times, visit end times, occupation before each visit.
    enter: Vec<Vec<f64>>,
    leave: Vec<Vec<f64>>,
    before: Vec<Vec<f64>>,
    horizon: f64,
    jump_times: Vec<f64>,
    states: Vec<usize>,
}

/// Builds the local-time field of `traj` with respect to the measure of `net`.
pub fn local_times(traj: &Trajectory, net: &ResistanceNetwork) -> Result<LocalTimeField> {
    traj.check_against(net)?;
    net.require_full_support()?;
    let n = net.vertex_count();
    let mut enter = vec![Vec::new(); n];
    let mut leave = vec![Vec::new(); n];
    let mut before = vec![Vec::new(); n];
    let mut total = vec![0.0; n];
    for (x, a, b) in traj.segments() {
        enter[x].push(a);
        leave[x].push(b);
        before[x].push(total[x]);
        total[x] += b - a;
    }
    Ok(LocalTimeField {
        measure: net.measure().to_vec(),
        enter,
        leave,
        before,
        horizon: traj.horizon(),
        jump_times: traj.jump_times().to_vec(),
        states: traj.states().to_vec(),
    })
}

impl LocalTimeField {
    pub fn vertex_count(&self) -> usize {
        self.measure.len()
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn measure(&self) -> &[f64] {
        &self.measure
    }

    pub(crate) fn path(&self) -> (&[f64], &[usize]) {
        (&self.jump_times, &self.states)
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !(0.0..=self.horizon).contains(&t) {
            bail!(InvalidArgument, "time {t} outside [0, {}]", self.horizon);
        }
        Ok(())
    }

    /// Lebesgue time spent at `x` during `[0, t]`.
    pub fn occupation(&self, x: usize, t: f64) -> Result<f64> {
        self.check_time(t)?;
        Ok(self.occupation_unchecked(x, t))
    }

    fn occupation_unchecked(&self, x: usize, t: f64) -> f64 {
        let k = self.enter[x].partition_point(|a| *a < t);
        if k == 0 {
            return 0.0;
        }
        let i = k - 1;
        self.before[x][i] + (t.min(self.leave[x][i]) - self.enter[x][i])
    }

    /// `L_t(x)`.
    pub fn local_time(&self, x: usize, t: f64) -> Result<f64> {
        Ok(self.occupation(x, t)? / self.measure[x])
    }

    /// `L_t` at every vertex.
    pub fn at(&self, t: f64) -> Result<Vec<f64>> {
        self.check_time(t)?;
        Ok((0..self.vertex_count())
            .map(|x| self.occupation_unchecked(x, t) / self.measure[x])
            .collect())
    }

    /// `sum_{x in set} L_t(x) mu(x)`, the time spent in `set` up to `t`.
    pub fn occupation_of(&self, set: &[usize], t: f64) -> Result<f64> {
        self.check_time(t)?;
        Ok(set.iter().map(|x| self.occupation_unchecked(*x, t)).sum())
    }

    /// `sup_{s <= t_max} |L_s(y) - L_s(z)|`.
    ///
    /// The difference is piecewise linear with kinks only where the path enters
    /// or leaves `y` or `z`, so the supremum is attained at one of those times.
    pub fn sup_difference(&self, y: usize, z: usize, t_max: f64) -> Result<f64> {
        self.check_time(t_max)?;
        let mut best: f64 = 0.0;
        for v in [y, z] {
            for (a, b) in self.enter[v].iter().zip(&self.leave[v]) {
                for s in [*a, *b] {
                    if s <= t_max {
                        let d = self.occupation_unchecked(y, s) / self.measure[y]
                            - self.occupation_unchecked(z, s) / self.measure[z];
                        best = best.max(d.abs());
                    }
                }
            }
        }
        let d = self.occupation_unchecked(y, t_max) / self.measure[y] - self.occupation_unchecked(z, t_max) / self.measure[z];
        Ok(best.max(d.abs()))
    }

    /// CSV with header `vertex,<t_1>,...`, one row of local times per vertex.
    pub fn write_csv<W: Write>(&self, grid: &[f64], mut out: W) -> Result<()> {
        let columns = grid.iter().map(|t| self.at(*t)).collect::<Result<Vec<_>>>()?;
        write!(out, "vertex")?;
        for t in grid {
            write!(out, ",{t:?}")?;
        }
        writeln!(out)?;
        for x in 0..self.vertex_count() {
            write!(out, "{x}")?;
            for col in &columns {
                write!(out, ",{:?}", col[x])?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}
