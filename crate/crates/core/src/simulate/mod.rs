//! Event-driven simulation of the variable-speed walk and its time changes.
//!
//! The walk attached to a network with speed measure `mu` holds at `x` for an
//! exponential time of rate `sum_y c(x,y) / mu(x)` and then jumps to `y` with
//! probability proportional to `c(x,y)`. Paths are exact step functions, so
//! local times, additive functionals and their inverses are computed exactly
//! from the jump times.

mod local_time;
mod time_change;

use std::io::Write;

use rand::Rng;

use crate::error::{bail, Error, Result};
use crate::network::ResistanceNetwork;
use crate::rng::exponential;

pub use local_time::{local_times, LocalTimeField};
pub use time_change::{additive_functional, csrw, csrw_by_time_change, time_change, AdditiveFunctional, TimeChanged};

/// Largest number of jumps stored in a [`Trajectory`].
pub const EVENT_CAP: usize = 100_000_000;

/// Right-continuous path: `states[i]` is occupied on `[jump_times[i], jump_times[i+1])`,
/// the last state until `horizon`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    jump_times: Vec<f64>,
    states: Vec<usize>,
    horizon: f64,
}

impl Trajectory {
    pub fn new(jump_times: Vec<f64>, states: Vec<usize>, horizon: f64) -> Result<Self> {
        if jump_times.is_empty() || jump_times.len() != states.len() {
            bail!(InvalidArgument, "a trajectory needs one state per jump time");
        }
        if jump_times[0] != 0.0 {
            bail!(InvalidArgument, "trajectory must start at time 0");
        }
        if jump_times.windows(2).any(|w| !(w[1] > w[0])) {
            bail!(InvalidArgument, "jump times must be strictly increasing");
        }
        if !(horizon >= *jump_times.last().unwrap()) {
            bail!(InvalidArgument, "horizon {horizon} precedes the last jump");
        }
        Ok(Self { jump_times, states, horizon })
    }

    pub fn jump_times(&self) -> &[f64] {
        &self.jump_times
    }

    pub fn states(&self) -> &[usize] {
        &self.states
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn jump_count(&self) -> usize {
        self.states.len() - 1
    }

    /// Segments `(state, start, end)` in time order.
    pub fn segments(&self) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        (0..self.states.len()).map(move |i| {
            let end = self.jump_times.get(i + 1).copied().unwrap_or(self.horizon);
            (self.states[i], self.jump_times[i], end)
        })
    }

    /// State at time `t`, for `0 <= t <= horizon`.
    pub fn state_at(&self, t: f64) -> Result<usize> {
        if !(0.0..=self.horizon).contains(&t) {
            bail!(InvalidArgument, "time {t} outside [0, {}]", self.horizon);
        }
        let k = self.jump_times.partition_point(|s| *s <= t);
        Ok(self.states[k - 1])
    }

    /// First time the path is at `target`, if before the horizon.
    pub fn hitting_time(&self, target: usize) -> Option<f64> {
        self.states.iter().position(|s| *s == target).map(|i| self.jump_times[i])
    }

    /// Checks that every state is a vertex and consecutive states are adjacent.
    pub fn check_against(&self, net: &ResistanceNetwork) -> Result<()> {
        for s in &self.states {
            net.check_vertex(*s)?;
        }
        for w in self.states.windows(2) {
            if !net.neighbors(w[0]).iter().any(|(y, _)| *y == w[1]) {
                bail!(InvalidArgument, "trajectory jumps between non-adjacent vertices {} and {}", w[0], w[1]);
            }
        }
        Ok(())
    }

    /// CSV with header `time,vertex`: one row per jump, then a closing row at the horizon.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "time,vertex")?;
        for (t, s) in self.jump_times.iter().zip(&self.states) {
            writeln!(out, "{t:?},{s}")?;
        }
        writeln!(out, "{:?},{}", self.horizon, self.states.last().unwrap())?;
        Ok(())
    }
}

/// Holding rates and jump distributions of the walk with a given speed measure.
#[derive(Clone, Debug)]
pub struct JumpChain {
    rate: Vec<f64>,
    targets: Vec<Vec<usize>>,
    /// Cumulative conductances, last entry is the total.
    cumulative: Vec<Vec<f64>>,
}

impl JumpChain {
    /// Walk on `net` with speed measure `speed`, which must be positive everywhere.
    pub fn new(net: &ResistanceNetwork, speed: &[f64]) -> Result<Self> {
        if speed.len() != net.vertex_count() {
            bail!(InvalidArgument, "speed measure has {} entries for {} vertices", speed.len(), net.vertex_count());
        }
        if let Some(x) = speed.iter().position(|m| !(*m > 0.0) || !m.is_finite()) {
            bail!(InvalidArgument, "speed measure must be positive and finite, vertex {x} has {}", speed[x]);
        }
        let n = net.vertex_count();
        let mut rate = Vec::with_capacity(n);
        let mut targets = Vec::with_capacity(n);
        let mut cumulative = Vec::with_capacity(n);
        for x in 0..n {
            let mut acc = 0.0;
            let (t, c): (Vec<usize>, Vec<f64>) = net
                .neighbors(x)
                .iter()
                .map(|&(y, c)| {
                    acc += c;
                    (y, acc)
                })
                .unzip();
            rate.push(acc / speed[x]);
            targets.push(t);
            cumulative.push(c);
        }
        Ok(Self { rate, targets, cumulative })
    }

    /// The variable-speed walk of `net` (its own measure as speed measure).
    pub fn vsrw(net: &ResistanceNetwork) -> Result<Self> {
        Self::new(net, net.measure())
    }

    pub fn vertex_count(&self) -> usize {
        self.rate.len()
    }

    pub fn holding_rate(&self, x: usize) -> f64 {
        self.rate[x]
    }

    /// Draws the holding time at `x` and the next state.
    pub fn step<R: Rng + ?Sized>(&self, x: usize, rng: &mut R) -> (f64, usize) {
        let rate = self.rate[x];
        if rate == 0.0 {
            return (f64::INFINITY, x);
        }
        let hold = exponential(rng, rate);
        let cum = &self.cumulative[x];
        let u = rng.random::<f64>() * cum[cum.len() - 1];
        let k = cum.partition_point(|c| *c <= u).min(cum.len() - 1);
        (hold, self.targets[x][k])
    }

    /// Runs the chain from `start` up to `horizon`, reporting each visit
    /// `(state, enter, leave)` to `observer`. Returns the number of jumps.
    pub fn run<R: Rng + ?Sized>(
        &self,
        start: usize,
        horizon: f64,
        rng: &mut R,
        observer: &mut impl FnMut(usize, f64, f64),
    ) -> usize {
        let mut t = 0.0;
        let mut x = start;
        let mut jumps = 0;
        loop {
            let (hold, next) = self.step(x, rng);
            let leave = t + hold;
            if leave >= horizon {
                observer(x, t, horizon);
                return jumps;
            }
            observer(x, t, leave);
            t = leave;
            x = next;
            jumps += 1;
        }
    }

    /// Samples the hitting time of `target` from `start`.
    pub fn hitting_time<R: Rng + ?Sized>(&self, start: usize, target: usize, rng: &mut R) -> Result<f64> {
        let mut t = 0.0;
        let mut x = start;
        for _ in 0..EVENT_CAP {
            if x == target {
                return Ok(t);
            }
            let (hold, next) = self.step(x, rng);
            t += hold;
            x = next;
        }
        Err(Error::EventCap(EVENT_CAP))
    }

    fn check_start(&self, start: usize, horizon: f64) -> Result<()> {
        if start >= self.vertex_count() {
            return Err(Error::VertexOutOfRange { vertex: start, count: self.vertex_count() });
        }
        if !(horizon > 0.0) || !horizon.is_finite() {
            bail!(InvalidArgument, "horizon must be positive and finite, got {horizon}");
        }
        Ok(())
    }

    /// Stored path up to `horizon`; fails with [`Error::EventCap`] past [`EVENT_CAP`] jumps.
    pub fn trajectory<R: Rng + ?Sized>(&self, start: usize, horizon: f64, rng: &mut R) -> Result<Trajectory> {
        match self.record(start, horizon, rng, EVENT_CAP)? {
            Recorded::Path(p) => Ok(p),
            Recorded::Aggregate(_) => Err(Error::EventCap(EVENT_CAP)),
        }
    }

    /// Like [`JumpChain::trajectory`] but switches to online occupation totals
    /// once more than `cap` jumps occur.
    pub fn record<R: Rng + ?Sized>(&self, start: usize, horizon: f64, rng: &mut R, cap: usize) -> Result<Recorded> {
        self.check_start(start, horizon)?;
        let mut times = vec![];
        let mut states = vec![];
        let mut occupation: Option<Vec<f64>> = None;
        let mut last = start;
        let n = self.vertex_count();
        let jumps = self.run(start, horizon, rng, &mut |x, enter, leave| {
            last = x;
            match &mut occupation {
                Some(occ) => occ[x] += leave - enter,
                None if times.len() > cap => {
                    let mut occ = vec![0.0; n];
                    for (i, &s) in states.iter().enumerate() {
                        let end = if i + 1 < times.len() { times[i + 1] } else { enter };
                        occ[s] += end - times[i];
                    }
                    occ[x] += leave - enter;
                    times = vec![];
                    states = vec![];
                    occupation = Some(occ);
                }
                None => {
                    times.push(enter);
                    states.push(x);
                }
            }
        });
        Ok(match occupation {
            Some(occupation) => Recorded::Aggregate(OccupationTotals { occupation, jumps, final_state: last, horizon }),
            None => Recorded::Path(Trajectory { jump_times: times, states, horizon }),
        })
    }
}

/// Output of [`JumpChain::record`].
#[derive(Clone, Debug)]
pub enum Recorded {
    Path(Trajectory),
    Aggregate(OccupationTotals),
}

/// Per-vertex time spent up to the horizon, kept when a path is too long to store.
#[derive(Clone, Debug)]
pub struct OccupationTotals {
    pub occupation: Vec<f64>,
    pub jumps: usize,
    pub final_state: usize,
    pub horizon: f64,
}

/// Exact simulation of the variable-speed walk of `net` up to `horizon`.
pub fn simulate_vsrw<R: Rng + ?Sized>(net: &ResistanceNetwork, start: usize, horizon: f64, rng: &mut R) -> Result<Trajectory> {
    JumpChain::vsrw(net)?.trajectory(start, horizon, rng)
}
