//! Exact solver for the dense transportation problem
//!
//! ```text
//! min Σ_ij ω_ij C_ij   s.t.  Σ_j ω_ij = p_i,  Σ_i ω_ij = q_j,  ω ≥ 0
//! ```
//!
//! The problem is treated as uncapacitated min-cost flow on the bipartite graph
//! rows → columns and solved with the primal network simplex method. The
//! initial basis hangs every node off an artificial root through big-cost
//! artificial arcs. Bases are kept strongly feasible (every zero-flow tree arc
//! points towards the root) and the leaving arc is the last blocking arc met
//! when walking the pivot cycle from its apex, which rules out cycling under
//! degeneracy. Entering arcs are priced in blocks of about `sqrt(m·n)` arcs.
//!
//! The tree is stored as per-node adjacency lists. After a pivot only the
//! subtree cut off by the leaving arc changes parent pointers, depths and
//! potentials, and it is relabelled by a breadth-first walk.

use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

const NONE: usize = usize::MAX;

struct Network<T> {
    m: usize,
    n: usize,
    /// Row-major copy of the cost matrix.
    cost: Vec<T>,
    art_cost: T,
    /// Flow on real arcs `i*n + j`, then one artificial arc per node.
    flow: Vec<T>,
    in_tree: Vec<bool>,
    /// Direction of each artificial arc: `true` means node → root.
    art_to_root: Vec<bool>,
    adj: Vec<Vec<usize>>,
    parent: Vec<usize>,
    parent_arc: Vec<usize>,
    depth: Vec<usize>,
    pi: Vec<T>,
    queue: Vec<usize>,
}

impl<T: Scalar> Network<T> {
    fn root(&self) -> usize {
        self.m + self.n
    }

    fn n_real(&self) -> usize {
        self.m * self.n
    }

    fn tail(&self, arc: usize) -> usize {
        if arc < self.n_real() {
            arc / self.n
        } else {
            let v = arc - self.n_real();
            if self.art_to_root[v] { v } else { self.root() }
        }
    }

    fn head(&self, arc: usize) -> usize {
        if arc < self.n_real() {
            self.m + arc % self.n
        } else {
            let v = arc - self.n_real();
            if self.art_to_root[v] { self.root() } else { v }
        }
    }

    fn arc_cost(&self, arc: usize) -> T {
        if arc < self.n_real() {
            self.cost[arc]
        } else {
            self.art_cost
        }
    }

    fn new(p: ArrayView1<'_, T>, q: ArrayView1<'_, T>, cost: ArrayView2<'_, T>) -> Self {
        let (m, n) = cost.dim();
        let nodes = m + n + 1;
        let max_cost = cost.iter().fold(T::zero(), |acc, c| acc.max(c.abs()));
        let art_cost = (max_cost + T::one()) * T::from_count(nodes);
        let n_arcs = m * n + m + n;
        let mut net = Network {
            m,
            n,
            cost: cost.iter().copied().collect(),
            art_cost,
            flow: vec![T::zero(); n_arcs],
            in_tree: vec![false; n_arcs],
            art_to_root: vec![true; m + n],
            adj: vec![Vec::new(); nodes],
            parent: vec![NONE; nodes],
            parent_arc: vec![NONE; nodes],
            depth: vec![0; nodes],
            pi: vec![T::zero(); nodes],
            queue: Vec::with_capacity(nodes),
        };
        let root = net.root();
        for v in 0..m + n {
            let arc = m * n + v;
            // Supply nodes and zero-demand columns point at the root, positive
            // demands are fed from it; zero-flow arcs therefore face the root.
            let amount = if v < m { p[v] } else { q[v - m] };
            net.art_to_root[v] = v < m || amount <= T::zero();
            net.flow[arc] = amount.max(T::zero());
            net.in_tree[arc] = true;
            net.adj[v].push(arc);
            net.adj[root].push(arc);
        }
        net.rebuild_tree();
        net
    }

    /// Recomputes parent, depth and potentials from the root. Potentials satisfy
    /// `c_a + π_tail − π_head = 0` on tree arcs.
    fn rebuild_tree(&mut self) {
        let root = self.root();
        self.parent[root] = NONE;
        self.parent_arc[root] = NONE;
        self.depth[root] = 0;
        self.pi[root] = T::zero();
        self.relabel_from(root);
        debug_assert_eq!(self.queue.len(), self.m + self.n + 1, "basis is not a spanning tree");
    }

    /// Breadth-first pass below `start`, whose own parent data must be set.
    fn relabel_from(&mut self, start: usize) {
        self.queue.clear();
        self.queue.push(start);
        let mut head = 0;
        while head < self.queue.len() {
            let u = self.queue[head];
            head += 1;
            for idx in 0..self.adj[u].len() {
                let arc = self.adj[u][idx];
                if arc == self.parent_arc[u] {
                    continue;
                }
                let (t, h) = (self.tail(arc), self.head(arc));
                let v = if t == u { h } else { t };
                self.hang(v, u, arc);
                self.queue.push(v);
            }
        }
    }

    fn hang(&mut self, v: usize, u: usize, arc: usize) {
        self.parent[v] = u;
        self.parent_arc[v] = arc;
        self.depth[v] = self.depth[u] + 1;
        let c = self.arc_cost(arc);
        self.pi[v] = if self.tail(arc) == u { self.pi[u] + c } else { self.pi[u] - c };
    }

    fn detach(&mut self, arc: usize) {
        for node in [self.tail(arc), self.head(arc)] {
            let list = &mut self.adj[node];
            let pos = list.iter().position(|&a| a == arc).expect("tree arc in adjacency");
            list.swap_remove(pos);
        }
        self.in_tree[arc] = false;
    }

    fn attach(&mut self, arc: usize) {
        let (t, h) = (self.tail(arc), self.head(arc));
        self.adj[t].push(arc);
        self.adj[h].push(arc);
        self.in_tree[arc] = true;
    }

    /// Walks the cycle closed by `entering`, pushes the maximal flow around it
    /// and swaps the leaving arc out of the tree. Returns the flow pushed.
    fn pivot(&mut self, entering: usize) -> Result<T> {
        let first = self.tail(entering);
        let second = self.head(entering);
        let join = {
            let (mut a, mut b) = (first, second);
            while a != b {
                if self.depth[a] >= self.depth[b] {
                    a = self.parent[a];
                } else {
                    b = self.parent[b];
                }
            }
            a
        };

        // Flow travels join → … → first → second → … → join. On the first leg
        // an arc is backward when it points up (tail == child); on the second
        // leg when it points down (head == child).
        let mut delta = T::infinity();
        let mut leaving = NONE;
        let mut leaving_on_first = true;
        let mut u = first;
        while u != join {
            let arc = self.parent_arc[u];
            if self.tail(arc) == u && self.flow[arc] < delta {
                delta = self.flow[arc];
                leaving = arc;
            }
            u = self.parent[u];
        }
        let mut u = second;
        while u != join {
            let arc = self.parent_arc[u];
            if self.head(arc) == u && self.flow[arc] <= delta {
                delta = self.flow[arc];
                leaving = arc;
                leaving_on_first = false;
            }
            u = self.parent[u];
        }
        if leaving == NONE {
            return Err(Error::numerical("transport", "unbounded pivot cycle"));
        }

        if delta > T::zero() {
            self.flow[entering] += delta;
            let mut u = first;
            while u != join {
                let arc = self.parent_arc[u];
                if self.tail(arc) == u {
                    self.flow[arc] -= delta;
                } else {
                    self.flow[arc] += delta;
                }
                u = self.parent[u];
            }
            let mut u = second;
            while u != join {
                let arc = self.parent_arc[u];
                if self.head(arc) == u {
                    self.flow[arc] -= delta;
                } else {
                    self.flow[arc] += delta;
                }
                u = self.parent[u];
            }
        }
        self.flow[leaving] = T::zero();
        self.detach(leaving);
        self.attach(entering);
        // Only the subtree cut off by the leaving arc moves; it now hangs from
        // the entering arc's endpoint on the other side.
        let (inside, outside) = if leaving_on_first { (first, second) } else { (second, first) };
        self.hang(inside, outside, entering);
        self.relabel_from(inside);
        Ok(delta)
    }
}

/// Block-search pricing over real arcs.
struct Pricing {
    next: usize,
    block: usize,
}

impl Pricing {
    fn new(n_arcs: usize) -> Self {
        let block = ((n_arcs as f64).sqrt().ceil() as usize).max(10).min(n_arcs.max(1));
        Self { next: 0, block }
    }

    /// Most negative reduced cost in the first block (cyclically from where the
    /// last search stopped) that contains a candidate. Tree arcs have zero
    /// reduced cost up to rounding and are skipped.
    fn find<T: Scalar>(&mut self, net: &Network<T>, tol: T) -> Option<usize> {
        let (m, n) = (net.m, net.n);
        let total = m * n;
        let (pi_rows, pi_cols) = net.pi.split_at(m);
        let mut best = NONE;
        let mut best_rc = -tol;
        let mut arc = self.next;
        let (mut i, mut j) = (arc / n, arc % n);
        for scanned in 1..=total {
            let rc = net.cost[arc] + pi_rows[i] - pi_cols[j];
            if rc < best_rc && !net.in_tree[arc] {
                best_rc = rc;
                best = arc;
            }
            arc += 1;
            j += 1;
            if j == n {
                j = 0;
                i += 1;
                if i == m {
                    i = 0;
                    arc = 0;
                }
            }
            if (scanned % self.block == 0 || scanned == total) && best != NONE {
                self.next = arc;
                return Some(best);
            }
        }
        None
    }
}

/// Optimal basic plan for the transportation problem with marginals `p`, `q`
/// and cost matrix `cost` (shape `p.len() × q.len()`). Marginals must be
/// nonnegative with equal totals; the caller validates that.
pub(crate) fn solve<T: Scalar>(
    p: ArrayView1<'_, T>,
    q: ArrayView1<'_, T>,
    cost: ArrayView2<'_, T>,
) -> Result<Array2<T>> {
    let (m, n) = cost.dim();
    debug_assert_eq!((m, n), (p.len(), q.len()));
    let mut net = Network::new(p, q, cost);
    let tol = net.art_cost * T::epsilon() * T::lit(16.0);
    let mut pricing = Pricing::new(m * n);
    let max_pivots = 50 * (m * n + m + n) + 10_000;
    let mut pivots = 0;
    while let Some(entering) = pricing.find(&net, tol) {
        net.pivot(entering)?;
        pivots += 1;
        if pivots > max_pivots {
            return Err(Error::numerical("transport", format!("no convergence after {pivots} pivots")));
        }
    }

    // Flow left on artificial arcs means the real arcs could not route the
    // supply; for balanced inputs only rounding-level residue remains.
    let total: T = p.iter().copied().sum();
    let residual: T = net.flow[m * n..].iter().copied().sum();
    let slack = T::lit(1e-9).max(T::epsilon() * T::lit(1e3)) * (T::one() + total);
    if residual > slack {
        return Err(Error::numerical(
            "transport",
            format!("infeasible marginals: {residual} of {total} left unrouted"),
        ));
    }
    let omega = Array2::from_shape_fn((m, n), |(i, j)| net.flow[i * n + j].max(T::zero()));
    Ok(omega)
}
