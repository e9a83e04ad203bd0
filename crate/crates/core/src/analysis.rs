//! Graph attributes of a DAG task: reachability, length, width, and the
//! per-node timing and parallelism attributes derived from them.

use crate::bitmatrix::{max_plus, min_plus, BoolMatrix};
use crate::matching::{grow_dense, hopcroft_karp, restrict, vertex_set, Matching};
use crate::task::{DagTask, Ticks};

/// Earliest/latest start and finish times of every node for a deadline `D`.
/// Signed because latest times go negative when the critical path exceeds `D`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Timing {
    pub est: Vec<i64>,
    pub eft: Vec<i64>,
    pub lst: Vec<i64>,
    pub lft: Vec<i64>,
}

/// A minimum chain decomposition of the reachability order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PathCover {
    /// Chains ordered by their first node; nodes within a chain are in
    /// reachability order.
    pub chains: Vec<Vec<usize>>,
    pub matching: Matching,
}

impl PathCover {
    pub fn width(&self) -> usize {
        self.chains.len()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Parallelism {
    /// Lateral width: width after removing the node with its ancestors and descendants.
    pub lw: Vec<usize>,
    /// In-width: width after removing the node and its descendants.
    pub iw: Vec<usize>,
    /// Out-width: width after removing the node and its ancestors.
    pub ow: Vec<usize>,
}

/// Every attribute the scheduler consults, computed for one graph state.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GraphAnalysis {
    pub tc: BoolMatrix,
    pub length: Ticks,
    pub critical_path: Vec<usize>,
    pub width: usize,
    pub timing: Timing,
    pub parallelism: Parallelism,
    pub path_cover: PathCover,
}

impl GraphAnalysis {
    pub fn new(task: &DagTask) -> Self {
        Self::with_closure(task, transitive_closure(task))
    }

    /// Analysis of `task`, which must equal the previously analysed graph
    /// plus the edge `(from, to)`. The closure is updated incrementally; the
    /// remaining attributes are recomputed.
    pub fn after_edge(&self, task: &DagTask, from: usize, to: usize) -> Self {
        Self::with_closure(task, closure_with_edge(&self.tc, from, to))
    }

    fn with_closure(task: &DagTask, tc: BoolMatrix) -> Self {
        let (length, critical_path) = dag_length(task);
        let timing = timing_attributes(task);
        let path_cover = min_path_cover(&tc, Some(task));
        let parallelism = parallelism_attributes(&tc);
        GraphAnalysis {
            tc,
            length,
            critical_path,
            width: path_cover.width(),
            timing,
            parallelism,
            path_cover,
        }
    }

    pub fn est(&self) -> &[i64] {
        &self.timing.est
    }
    pub fn eft(&self) -> &[i64] {
        &self.timing.eft
    }
    pub fn lst(&self) -> &[i64] {
        &self.timing.lst
    }
    pub fn lft(&self) -> &[i64] {
        &self.timing.lft
    }
    pub fn lw(&self) -> &[usize] {
        &self.parallelism.lw
    }
    pub fn iw(&self) -> &[usize] {
        &self.parallelism.iw
    }
    pub fn ow(&self) -> &[usize] {
        &self.parallelism.ow
    }

    /// `L(G) <= D` and `W(G) <= m`.
    pub fn trivially_schedulable_on(&self, task: &DagTask, m: usize) -> bool {
        self.length <= task.deadline() && self.width <= m
    }
}

/// `tc[i][j]` iff node `i` is an ancestor of node `j`.
pub fn transitive_closure(task: &DagTask) -> BoolMatrix {
    task.adjacency().transitive_closure()
}

/// Closure of the graph after inserting `(from, to)`: every node reaching
/// `from` (and `from` itself) now also reaches `to` and everything below it.
pub fn closure_with_edge(tc: &BoolMatrix, from: usize, to: usize) -> BoolMatrix {
    let mut out = tc.clone();
    let n = tc.dim();
    out.set(from, to, true);
    out.or_row_into(to, from);
    for a in 0..n {
        if tc.get(a, from) {
            out.set(a, to, true);
            out.or_row_into(to, a);
        }
    }
    out
}

/// Length of the longest path (sum of WCETs) and one path attaining it,
/// from the source to the sink.
pub fn dag_length(task: &DagTask) -> (Ticks, Vec<usize>) {
    let n = task.n();
    let mut finish = vec![0 as Ticks; n];
    let mut via: Vec<Option<usize>> = vec![None; n];
    for &v in task.topo_order() {
        let mut start = 0;
        for &p in task.preds(v) {
            if via[v].is_none() || finish[p] > start {
                start = finish[p];
                via[v] = Some(p);
            }
        }
        finish[v] = start + task.wcet()[v];
    }
    let sink = task.sink();
    let mut path = vec![sink];
    let mut cur = sink;
    while let Some(p) = via[cur] {
        path.push(p);
        cur = p;
    }
    path.reverse();
    (finish[sink], path)
}

/// Solves the coupled max-plus equations
///
/// ```text
/// eft = est + C        est = max over predecessors of eft   (0 if none)
/// lst = lft - C        lft = min over successors of lst     (D if none)
/// ```
///
/// by fixed-point iteration from `est = 0`, `lft = D`. Converges in at most
/// `n` sweeps.
pub fn timing_attributes(task: &DagTask) -> Timing {
    let n = task.n();
    let c: Vec<i64> = task.wcet().iter().map(|&w| w as i64).collect();
    let d = task.deadline() as i64;
    let adj = task.adjacency();
    let adj_t = adj.transpose();

    let mut est = vec![0i64; n];
    let mut lft = vec![d; n];
    let mut eft: Vec<i64> = est.iter().zip(&c).map(|(s, c)| s + c).collect();
    let mut lst: Vec<i64> = lft.iter().zip(&c).map(|(f, c)| f - c).collect();
    for _ in 0..=n {
        let next_est = max_plus(&adj_t, &eft, 0);
        let next_lft = min_plus(&adj, &lst, d);
        if next_est == est && next_lft == lft {
            break;
        }
        est = next_est;
        lft = next_lft;
        eft = est.iter().zip(&c).map(|(s, c)| s + c).collect();
        lst = lft.iter().zip(&c).map(|(f, c)| f - c).collect();
    }
    Timing { est, eft, lst, lft }
}

/// Minimum path cover of the order given by `tc`, via maximum matching in
/// the bipartite graph with an edge `i -> j` for every `tc[i][j]`. The
/// number of chains equals the width (Dilworth).
///
/// When `task` is given, the matching is seeded greedily with direct edges
/// (node order, lowest successor first), so chains follow the drawn edges
/// where possible.
pub fn min_path_cover(tc: &BoolMatrix, task: Option<&DagTask>) -> PathCover {
    let n = tc.dim();
    let adj: Vec<Vec<usize>> = (0..n).map(|i| tc.row_ones(i).collect()).collect();
    let mut init = Matching::empty(n, n);
    if let Some(task) = task {
        for i in 0..n {
            for &j in task.succs(i) {
                if init.try_pair(i, j) {
                    break;
                }
            }
        }
    }
    let matching = hopcroft_karp(&adj, init);
    let chains = chains_from_matching(&matching);
    PathCover { chains, matching }
}

/// Follows matched pairs from every node that has no matched predecessor.
pub fn chains_from_matching(m: &Matching) -> Vec<Vec<usize>> {
    let n = m.left.len();
    (0..n)
        .filter(|&v| m.right[v].is_none())
        .map(|head| {
            let mut chain = vec![head];
            let mut cur = head;
            while let Some(next) = m.left[cur] {
                chain.push(next);
                cur = next;
            }
            chain
        })
        .collect()
}

/// Width of the order `tc` restricted to `nodes`; 0 for an empty set.
///
/// Restriction is exact for the node sets used here (complements of
/// ancestor/descendant-closed sets): no path between two kept nodes can pass
/// through a removed one.
pub fn width_of_subset(tc: &BoolMatrix, nodes: &[usize]) -> usize {
    let n = tc.dim();
    let mut m = Matching::empty(n, n);
    grow_dense(tc, &vertex_set(n, nodes.iter().copied()), &mut m);
    nodes.len() - m.size()
}

pub fn dag_width(tc: &BoolMatrix) -> usize {
    min_path_cover(tc, None).width()
}

/// Lateral, in- and out-width of every node.
pub fn parallelism_attributes(tc: &BoolMatrix) -> Parallelism {
    let n = tc.dim();
    let tct = tc.transpose();
    let mut global = Matching::empty(n, n);
    grow_dense(tc, &vertex_set(n, 0..n), &mut global);
    let width_of = |keep: Vec<u64>| {
        let size: usize = keep.iter().map(|w| w.count_ones() as usize).sum();
        let mut m = restrict(&global, &keep);
        grow_dense(tc, &keep, &mut m);
        size - m.size()
    };
    let mut lw = vec![0; n];
    let mut iw = vec![0; n];
    let mut ow = vec![0; n];
    let all = vertex_set(n, 0..n);
    for v in 0..n {
        let des = tc.row(v);
        let anc = tct.row(v);
        let mut not_des = all.clone();
        let mut not_anc = all.clone();
        for w in 0..all.len() {
            not_des[w] &= !des[w];
            not_anc[w] &= !anc[w];
        }
        not_des[v / 64] &= !(1 << (v % 64));
        not_anc[v / 64] &= !(1 << (v % 64));
        let unrelated: Vec<u64> = not_des.iter().zip(&not_anc).map(|(a, b)| a & b).collect();
        lw[v] = width_of(unrelated);
        iw[v] = width_of(not_des);
        ow[v] = width_of(not_anc);
    }
    Parallelism { lw, iw, ow }
}
