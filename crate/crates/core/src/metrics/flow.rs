//! Dinic max-flow on small dense bipartite transport problems.

use std::collections::VecDeque;

struct Arc {
    to: usize,
    cap: f64,
}

pub(crate) struct FlowNetwork {
    arcs: Vec<Arc>,
    out: Vec<Vec<usize>>,
}

impl FlowNetwork {
    pub fn new(nodes: usize) -> Self {
        Self { arcs: Vec::new(), out: vec![Vec::new(); nodes] }
    }

    pub fn add(&mut self, from: usize, to: usize, cap: f64) {
        self.out[from].push(self.arcs.len());
        self.arcs.push(Arc { to, cap });
        self.out[to].push(self.arcs.len());
        self.arcs.push(Arc { to: from, cap: 0.0 });
    }

    fn levels(&self, s: usize, t: usize) -> Option<Vec<usize>> {
        let mut level = vec![usize::MAX; self.out.len()];
        level[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            for &a in &self.out[v] {
                let w = self.arcs[a].to;
                if self.arcs[a].cap > 0.0 && level[w] == usize::MAX {
                    level[w] = level[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        (level[t] != usize::MAX).then_some(level)
    }

    fn push(&mut self, v: usize, t: usize, limit: f64, level: &[usize], next: &mut [usize]) -> f64 {
        if v == t {
            return limit;
        }
        while next[v] < self.out[v].len() {
            let a = self.out[v][next[v]];
            let w = self.arcs[a].to;
            if self.arcs[a].cap > 0.0 && level[w] == level[v] + 1 {
                let pushed = self.push(w, t, limit.min(self.arcs[a].cap), level, next);
                if pushed > 0.0 {
                    self.arcs[a].cap -= pushed;
                    self.arcs[a ^ 1].cap += pushed;
                    return pushed;
                }
            }
            next[v] += 1;
        }
        0.0
    }

    /// Maximum flow value from `s` to `t`; consumes the capacities.
    pub fn max_flow(&mut self, s: usize, t: usize) -> f64 {
        let mut total = 0.0;
        while let Some(level) = self.levels(s, t) {
            let mut next = vec![0; self.out.len()];
            loop {
                let f = self.push(s, t, f64::INFINITY, &level, &mut next);
                if f <= 0.0 {
                    break;
                }
                total += f;
            }
        }
        total
    }
}
