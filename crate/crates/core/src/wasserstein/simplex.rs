//! Primal network simplex for the balanced, uncapacitated transportation
//! problem.
//!
//! The spanning-tree bookkeeping (parent/thread/successor counts, block
//! search pricing, strongly feasible leaving-arc rule) follows the classical
//! design used by LEMON. Real arcs are implicit: arc `e < m·n` joins source
//! `e / n` to sink `m + e % n` and its cost is evaluated on demand.

use crate::error::{Error, Result};

const STATE_TREE: i8 = 0;
const STATE_LOWER: i8 = 1;
const DIR_UP: i8 = 1;
const DIR_DOWN: i8 = -1;

/// Optimal basic solution of a transportation problem.
#[derive(Debug, Clone)]
pub struct SimplexSolution {
    /// Total cost `Σ σᵢⱼ cᵢⱼ`.
    pub cost: f64,
    /// Nonzero flows `(i, j, σᵢⱼ)` of the basis, sorted by `(i, j)`.
    pub flows: Vec<(usize, usize, f64)>,
    /// Dual potentials with `uᵢ + vⱼ ≤ cᵢⱼ`.
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub pivots: usize,
}

struct Solver<'a, C: Fn(usize, usize) -> f64> {
    m: usize,
    n: usize,
    cost: &'a C,
    arc_num: usize,
    // artificial arcs, indexed by node
    art_source: Vec<usize>,
    art_target: Vec<usize>,
    art_cost: Vec<f64>,
    flow: Vec<f64>,
    state: Vec<i8>,
    pi: Vec<f64>,
    parent: Vec<usize>,
    pred: Vec<usize>,
    pred_dir: Vec<i8>,
    thread: Vec<usize>,
    rev_thread: Vec<usize>,
    succ_num: Vec<usize>,
    last_succ: Vec<usize>,
    dirty_revs: Vec<usize>,
    next_arc: usize,
    block_size: usize,
    tolerance: f64,
    // pivot scratch
    in_arc: usize,
    join: usize,
    u_in: usize,
    v_in: usize,
    u_out: usize,
    delta: f64,
}

const NONE: usize = usize::MAX;

impl<'a, C: Fn(usize, usize) -> f64> Solver<'a, C> {
    fn source(&self, e: usize) -> usize {
        if e < self.arc_num {
            e / self.n
        } else {
            self.art_source[e - self.arc_num]
        }
    }

    fn target(&self, e: usize) -> usize {
        if e < self.arc_num {
            self.m + e % self.n
        } else {
            self.art_target[e - self.arc_num]
        }
    }

    fn arc_cost(&self, e: usize) -> f64 {
        if e < self.arc_num {
            (self.cost)(e / self.n, e % self.n)
        } else {
            self.art_cost[e - self.arc_num]
        }
    }

    fn new(supply: &[f64], demand: &[f64], cost: &'a C, max_cost: f64) -> Self {
        let m = supply.len();
        let n = demand.len();
        let nodes = m + n;
        let arc_num = m * n;
        let root = nodes;
        let art_cost_value = (max_cost + 1.0) * (nodes as f64 + 1.0);
        let mut s = Self {
            m,
            n,
            cost,
            arc_num,
            art_source: vec![0; nodes],
            art_target: vec![0; nodes],
            art_cost: vec![0.0; nodes],
            flow: vec![0.0; arc_num + nodes],
            state: vec![STATE_LOWER; arc_num + nodes],
            pi: vec![0.0; nodes + 1],
            parent: vec![NONE; nodes + 1],
            pred: vec![NONE; nodes + 1],
            pred_dir: vec![0; nodes + 1],
            thread: vec![0; nodes + 1],
            rev_thread: vec![0; nodes + 1],
            succ_num: vec![0; nodes + 1],
            last_succ: vec![0; nodes + 1],
            dirty_revs: Vec::new(),
            next_arc: 0,
            block_size: ((arc_num as f64).sqrt() as usize).max(10),
            tolerance: 1e-14 * (max_cost + 1.0) * (nodes as f64).sqrt().max(1.0),
            in_arc: 0,
            join: 0,
            u_in: 0,
            v_in: 0,
            u_out: 0,
            delta: 0.0,
        };
        s.thread[root] = 0;
        s.rev_thread[0] = root;
        s.succ_num[root] = nodes + 1;
        s.last_succ[root] = root - 1;
        for u in 0..nodes {
            let e = arc_num + u;
            let sup = if u < m { supply[u] } else { -demand[u - m] };
            s.parent[u] = root;
            s.pred[u] = e;
            s.thread[u] = u + 1;
            s.rev_thread[u + 1] = u;
            s.succ_num[u] = 1;
            s.last_succ[u] = u;
            s.state[e] = STATE_TREE;
            if sup >= 0.0 {
                s.pred_dir[u] = DIR_UP;
                s.pi[u] = 0.0;
                s.art_source[u] = u;
                s.art_target[u] = root;
                s.flow[e] = sup;
                s.art_cost[u] = 0.0;
            } else {
                s.pred_dir[u] = DIR_DOWN;
                s.pi[u] = art_cost_value;
                s.art_source[u] = root;
                s.art_target[u] = u;
                s.flow[e] = -sup;
                s.art_cost[u] = art_cost_value;
            }
        }
        s
    }

    fn reduced(&self, e: usize) -> f64 {
        let (i, j) = (e / self.n, e % self.n);
        (self.cost)(i, j) + self.pi[i] - self.pi[self.m + j]
    }

    /// Block search pricing over the real arcs.
    fn find_entering_arc(&mut self) -> bool {
        let mut min = -self.tolerance;
        let mut found = false;
        let mut cnt = self.block_size;
        let total = self.arc_num;
        let mut e = self.next_arc;
        for _ in 0..total {
            let st = self.state[e];
            if st != STATE_TREE {
                let c = st as f64 * self.reduced(e);
                if c < min {
                    min = c;
                    self.in_arc = e;
                    found = true;
                }
            }
            e += 1;
            if e == total {
                e = 0;
            }
            cnt -= 1;
            if cnt == 0 {
                if found {
                    self.next_arc = e;
                    return true;
                }
                cnt = self.block_size;
            }
        }
        if found {
            self.next_arc = e;
        }
        found
    }

    fn find_join_node(&mut self) {
        let mut u = self.source(self.in_arc);
        let mut v = self.target(self.in_arc);
        while u != v {
            if self.succ_num[u] < self.succ_num[v] {
                u = self.parent[u];
            } else {
                v = self.parent[v];
            }
        }
        self.join = u;
    }

    fn find_leaving_arc(&mut self) -> bool {
        let (first, second) = if self.state[self.in_arc] == STATE_LOWER {
            (self.source(self.in_arc), self.target(self.in_arc))
        } else {
            (self.target(self.in_arc), self.source(self.in_arc))
        };
        self.delta = f64::INFINITY;
        let mut result = 0;
        let mut u = first;
        while u != self.join {
            let e = self.pred[u];
            let d = if self.pred_dir[u] == DIR_DOWN {
                f64::INFINITY
            } else {
                self.flow[e]
            };
            if d < self.delta {
                self.delta = d;
                self.u_out = u;
                result = 1;
            }
            u = self.parent[u];
        }
        let mut u = second;
        while u != self.join {
            let e = self.pred[u];
            let d = if self.pred_dir[u] == DIR_UP {
                f64::INFINITY
            } else {
                self.flow[e]
            };
            if d <= self.delta {
                self.delta = d;
                self.u_out = u;
                result = 2;
            }
            u = self.parent[u];
        }
        if result == 1 {
            self.u_in = first;
            self.v_in = second;
        } else {
            self.u_in = second;
            self.v_in = first;
        }
        result != 0
    }

    fn change_flow(&mut self) {
        let in_arc = self.in_arc;
        if self.delta > 0.0 {
            let val = self.state[in_arc] as f64 * self.delta;
            self.flow[in_arc] += val;
            let mut u = self.source(in_arc);
            while u != self.join {
                let e = self.pred[u];
                self.flow[e] -= self.pred_dir[u] as f64 * val;
                u = self.parent[u];
            }
            let mut u = self.target(in_arc);
            while u != self.join {
                let e = self.pred[u];
                self.flow[e] += self.pred_dir[u] as f64 * val;
                u = self.parent[u];
            }
        }
        let out = self.pred[self.u_out];
        self.flow[out] = 0.0;
        self.state[in_arc] = STATE_TREE;
        self.state[out] = STATE_LOWER;
    }

    fn update_tree_structure(&mut self) {
        let u_in = self.u_in;
        let v_in = self.v_in;
        let u_out = self.u_out;
        let join = self.join;
        let in_arc = self.in_arc;
        let old_rev_thread = self.rev_thread[u_out];
        let old_succ_num = self.succ_num[u_out];
        let old_last_succ = self.last_succ[u_out];
        let v_out = self.parent[u_out];

        if u_in == u_out {
            self.parent[u_in] = v_in;
            self.pred[u_in] = in_arc;
            self.pred_dir[u_in] = if u_in == self.source(in_arc) {
                DIR_UP
            } else {
                DIR_DOWN
            };
            if self.thread[v_in] != u_out {
                let mut after = self.thread[old_last_succ];
                self.thread[old_rev_thread] = after;
                self.rev_thread[after] = old_rev_thread;
                after = self.thread[v_in];
                self.thread[v_in] = u_out;
                self.rev_thread[u_out] = v_in;
                self.thread[old_last_succ] = after;
                self.rev_thread[after] = old_last_succ;
            }
        } else {
            let thread_continue = if old_rev_thread == v_in {
                self.thread[old_last_succ]
            } else {
                self.thread[v_in]
            };
            let mut stem = u_in;
            let mut par_stem = v_in;
            let mut last = self.last_succ[u_in];
            let mut after = self.thread[last];
            self.thread[v_in] = u_in;
            self.dirty_revs.clear();
            self.dirty_revs.push(v_in);
            while stem != u_out {
                let next_stem = self.parent[stem];
                self.thread[last] = next_stem;
                self.dirty_revs.push(last);
                let before = self.rev_thread[stem];
                self.thread[before] = after;
                self.rev_thread[after] = before;
                self.parent[stem] = par_stem;
                par_stem = stem;
                stem = next_stem;
                last = if self.last_succ[stem] == self.last_succ[par_stem] {
                    self.rev_thread[par_stem]
                } else {
                    self.last_succ[stem]
                };
                after = self.thread[last];
            }
            self.parent[u_out] = par_stem;
            self.thread[last] = thread_continue;
            self.rev_thread[thread_continue] = last;
            self.last_succ[u_out] = last;
            if old_rev_thread != v_in {
                self.thread[old_rev_thread] = after;
                self.rev_thread[after] = old_rev_thread;
            }
            for k in 0..self.dirty_revs.len() {
                let u = self.dirty_revs[k];
                let t = self.thread[u];
                self.rev_thread[t] = u;
            }
            let mut tmp_sc = 0isize;
            let tmp_ls = self.last_succ[u_out];
            let mut u = u_out;
            while u != u_in {
                let p = self.parent[u];
                self.pred[u] = self.pred[p];
                self.pred_dir[u] = -self.pred_dir[p];
                tmp_sc += self.succ_num[u] as isize - self.succ_num[p] as isize;
                self.succ_num[u] = tmp_sc as usize;
                self.last_succ[p] = tmp_ls;
                u = p;
            }
            self.pred[u_in] = in_arc;
            self.pred_dir[u_in] = if u_in == self.source(in_arc) {
                DIR_UP
            } else {
                DIR_DOWN
            };
            self.succ_num[u_in] = old_succ_num;
        }

        let up_limit_out = if self.last_succ[join] == v_in {
            join
        } else {
            NONE
        };
        let last_succ_out = self.last_succ[u_out];
        let mut u = v_in;
        while u != NONE && self.last_succ[u] == v_in {
            self.last_succ[u] = last_succ_out;
            u = self.parent[u];
        }
        if join != old_rev_thread && v_in != old_rev_thread {
            let mut u = v_out;
            while u != up_limit_out && u != NONE && self.last_succ[u] == old_last_succ {
                self.last_succ[u] = old_rev_thread;
                u = self.parent[u];
            }
        } else if last_succ_out != old_last_succ {
            let mut u = v_out;
            while u != up_limit_out && u != NONE && self.last_succ[u] == old_last_succ {
                self.last_succ[u] = last_succ_out;
                u = self.parent[u];
            }
        }
        let mut u = v_in;
        while u != join {
            self.succ_num[u] += old_succ_num;
            u = self.parent[u];
        }
        let mut u = v_out;
        while u != join {
            self.succ_num[u] -= old_succ_num;
            u = self.parent[u];
        }
    }

    fn update_potential(&mut self) {
        let u_in = self.u_in;
        let c = self.arc_cost(self.in_arc);
        let sigma =
            self.pi[self.v_in] - self.pi[u_in] - if self.pred_dir[u_in] == DIR_UP { c } else { -c };
        let end = self.thread[self.last_succ[u_in]];
        let mut u = u_in;
        while u != end {
            self.pi[u] += sigma;
            u = self.thread[u];
        }
    }
}

/// Solves `min Σ σᵢⱼ c(i, j)` over couplings of `supply` and `demand`
/// (both nonnegative with equal totals).
pub fn transport_simplex(
    supply: &[f64],
    demand: &[f64],
    cost: impl Fn(usize, usize) -> f64,
    max_pivots: usize,
) -> Result<SimplexSolution> {
    let m = supply.len();
    let n = demand.len();
    if m == 0 || n == 0 {
        return Err(Error::InvalidArgument(
            "empty transportation problem".into(),
        ));
    }
    let mut max_cost = 0.0f64;
    for i in 0..m {
        for j in 0..n {
            let c = cost(i, j);
            if !c.is_finite() {
                return Err(Error::NumericalDomain(format!(
                    "non-finite cost at ({i}, {j})"
                )));
            }
            max_cost = max_cost.max(c.abs());
        }
    }
    let mut s = Solver::new(supply, demand, &cost, max_cost);
    let mut pivots = 0usize;
    while s.find_entering_arc() {
        if pivots >= max_pivots {
            let (primal, dual) = bounds(&s, supply, demand);
            return Err(Error::Solver {
                message: format!("pivot cap {max_pivots} reached"),
                lower: dual,
                upper: primal,
            });
        }
        s.find_join_node();
        if !s.find_leaving_arc() {
            return Err(Error::Solver {
                message: "unbounded pivot".into(),
                lower: f64::NEG_INFINITY,
                upper: f64::INFINITY,
            });
        }
        s.change_flow();
        s.update_tree_structure();
        s.update_potential();
        pivots += 1;
    }
    let mut flows = Vec::new();
    let mut total = 0.0;
    for u in 0..m + n {
        let e = s.pred[u];
        if e < s.arc_num && s.flow[e] > 0.0 {
            let (i, j) = (e / n, e % n);
            flows.push((i, j, s.flow[e]));
            total += s.flow[e] * cost(i, j);
        }
    }
    flows.sort_by_key(|a| (a.0, a.1));
    let u = (0..m).map(|i| -s.pi[i]).collect();
    let v = (0..n).map(|j| s.pi[m + j]).collect();
    Ok(SimplexSolution {
        cost: total,
        flows,
        u,
        v,
        pivots,
    })
}

fn bounds<C: Fn(usize, usize) -> f64>(s: &Solver<C>, supply: &[f64], demand: &[f64]) -> (f64, f64) {
    let mut primal = 0.0;
    for e in 0..s.arc_num {
        if s.flow[e] > 0.0 {
            primal += s.flow[e] * (s.cost)(e / s.n, e % s.n);
        }
    }
    // dual bound from potentials made feasible by lowering each uᵢ
    let mut dual = 0.0;
    for (i, a) in supply.iter().enumerate() {
        let ui = (0..s.n)
            .map(|j| (s.cost)(i, j) - s.pi[s.m + j])
            .fold(f64::INFINITY, f64::min);
        dual += a * ui;
    }
    for (j, b) in demand.iter().enumerate() {
        dual += b * s.pi[s.m + j];
    }
    (primal, dual)
}
