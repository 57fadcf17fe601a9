//! Dinic max-flow over real capacities.

use std::collections::VecDeque;

/// Residual capacities at or below this (relative to the largest finite
/// capacity) count as saturated.
const RESIDUAL_RTOL: f64 = 1e-14;

#[derive(Debug, Clone)]
struct Arc {
    to: usize,
    cap: f64,
    rev: usize,
}

#[derive(Debug, Clone)]
pub struct FlowNetwork {
    adj: Vec<Vec<Arc>>,
    scale: f64,
}

impl FlowNetwork {
    pub fn new(nodes: usize) -> Self {
        Self {
            adj: vec![Vec::new(); nodes],
            scale: 0.0,
        }
    }

    /// Directed arc `from → to`. Returns its handle for [`Self::flow_on`].
    pub fn add_arc(&mut self, from: usize, to: usize, cap: f64) -> (usize, usize) {
        self.add(from, to, cap, 0.0)
    }

    /// Undirected edge of capacity `cap` in both directions.
    pub fn add_edge(&mut self, a: usize, b: usize, cap: f64) -> (usize, usize) {
        self.add(a, b, cap, cap)
    }

    fn add(&mut self, a: usize, b: usize, cap_ab: f64, cap_ba: f64) -> (usize, usize) {
        if cap_ab.is_finite() {
            self.scale = self.scale.max(cap_ab);
        }
        let ia = self.adj[a].len();
        let ib = self.adj[b].len() + usize::from(a == b);
        self.adj[a].push(Arc {
            to: b,
            cap: cap_ab,
            rev: ib,
        });
        self.adj[b].push(Arc {
            to: a,
            cap: cap_ba,
            rev: ia,
        });
        (a, ia)
    }

    /// Net flow pushed along the arc with the given handle, given its
    /// original forward capacity.
    pub fn flow_on(&self, handle: (usize, usize), original_cap: f64) -> f64 {
        original_cap - self.adj[handle.0][handle.1].cap
    }

    fn eps(&self) -> f64 {
        RESIDUAL_RTOL * self.scale.max(1.0)
    }

    fn levels(&self, s: usize) -> Vec<Option<usize>> {
        let eps = self.eps();
        let mut level = vec![None; self.adj.len()];
        level[s] = Some(0);
        let mut queue = VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            let next = level[v].map(|l| l + 1);
            for a in &self.adj[v] {
                if a.cap > eps && level[a.to].is_none() {
                    level[a.to] = next;
                    queue.push_back(a.to);
                }
            }
        }
        level
    }

    fn augment(&mut self, v: usize, t: usize, pushed: f64, level: &[Option<usize>], it: &mut [usize]) -> f64 {
        if v == t {
            return pushed;
        }
        let eps = self.eps();
        while it[v] < self.adj[v].len() {
            let Arc { to, cap, rev } = self.adj[v][it[v]];
            if cap > eps && level[to] == level[v].map(|l| l + 1) {
                let got = self.augment(to, t, pushed.min(cap), level, it);
                if got > 0.0 {
                    self.adj[v][it[v]].cap -= got;
                    self.adj[to][rev].cap += got;
                    return got;
                }
            }
            it[v] += 1;
        }
        0.0
    }

    /// Maximum `s → t` flow value; the network keeps the residual state.
    pub fn max_flow(&mut self, s: usize, t: usize) -> f64 {
        let mut total = 0.0;
        loop {
            let level = self.levels(s);
            if level[t].is_none() {
                return total;
            }
            let mut it = vec![0; self.adj.len()];
            loop {
                let got = self.augment(s, t, f64::INFINITY, &level, &mut it);
                if got <= 0.0 {
                    break;
                }
                total += got;
            }
        }
    }

    /// Nodes reachable from `s` in the residual network (the source side of
    /// a minimum cut after [`Self::max_flow`]).
    pub fn source_side(&self, s: usize) -> Vec<bool> {
        self.levels(s).iter().map(Option::is_some).collect()
    }
}
