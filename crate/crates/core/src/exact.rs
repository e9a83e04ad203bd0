//! Exact minimum processor count by branch-and-bound, and export of the
//! equivalent mixed-integer program in CPLEX LP format.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use num_rational::Ratio;
use serde::Serialize;

use crate::analysis::GraphAnalysis;
use crate::dispatch::{partitioned_dispatch, Schedule};
use crate::egs::lower_bound;
use crate::error::{Error, Result};
use crate::task::{DagTask, Ticks};

/// Node limit of the solver (scheduled sets are 64-bit masks).
pub const MAX_NODES: usize = 64;
const MEMO_CAP: usize = 1 << 21;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ExactStatus {
    Optimal,
    TimedOut,
}

#[derive(Clone, Debug)]
pub struct ExactResult {
    /// Proven minimum when `Optimal`, best known upper bound otherwise.
    pub min_processors: usize,
    pub schedule: Schedule,
    pub explored_nodes: u64,
    pub status: ExactStatus,
    pub lower_bound: usize,
    pub width: usize,
}

/// Finds the fewest processors on which `task` meets its deadline.
///
/// Tries `M = lower_bound, ..., W - 1` in turn; `W` itself is always
/// feasible by partitioned dispatch. Each `M` is decided by a depth-first
/// search over serial schedules in nondecreasing start-time order: pick a
/// ready node and a processor, start at the earliest time allowed by its
/// predecessors, the processor and the previous start.
pub fn branch_and_bound(task: &DagTask, time_limit: Option<Duration>) -> Result<ExactResult> {
    let n = task.n();
    if n > MAX_NODES {
        return Err(Error::TooLarge(n, MAX_NODES));
    }
    let analysis = GraphAnalysis::new(task);
    if analysis.length > task.deadline() {
        return Err(Error::InfeasibleDeadline {
            length: analysis.length,
            deadline: task.deadline(),
        });
    }
    let lb = lower_bound(task, &analysis);
    let width = analysis.width;
    let witness = partitioned_dispatch(task, &analysis)?;
    let deadline = time_limit.map(|d| Instant::now() + d);
    let mut explored = 0;
    for m in lb..width {
        let mut search = Search::new(task, &analysis, m, deadline);
        let found = search.run();
        explored += search.explored;
        if search.timed_out {
            return Ok(ExactResult {
                min_processors: width,
                schedule: witness,
                explored_nodes: explored,
                status: ExactStatus::TimedOut,
                lower_bound: lb,
                width,
            });
        }
        if let Some(schedule) = found {
            return Ok(ExactResult {
                min_processors: m,
                schedule,
                explored_nodes: explored,
                status: ExactStatus::Optimal,
                lower_bound: lb,
                width,
            });
        }
    }
    Ok(ExactResult {
        min_processors: width,
        schedule: witness,
        explored_nodes: explored,
        status: ExactStatus::Optimal,
        lower_bound: lb,
        width,
    })
}

struct Search<'a> {
    task: &'a DagTask,
    m: usize,
    n: usize,
    wcet: &'a [Ticks],
    lst: Vec<Ticks>,
    pred_mask: Vec<u64>,
    succ_mask: Vec<u64>,
    topo: &'a [usize],
    d: Ticks,
    start: Vec<Ticks>,
    finish: Vec<Ticks>,
    proc_of: Vec<usize>,
    avail: Vec<Ticks>,
    failed: HashSet<Vec<u64>>,
    deadline: Option<Instant>,
    explored: u64,
    timed_out: bool,
}

impl<'a> Search<'a> {
    fn new(task: &'a DagTask, a: &GraphAnalysis, m: usize, deadline: Option<Instant>) -> Self {
        let n = task.n();
        let mut pred_mask = vec![0u64; n];
        let mut succ_mask = vec![0u64; n];
        for &(i, j) in task.edges() {
            pred_mask[j] |= 1 << i;
            succ_mask[i] |= 1 << j;
        }
        Search {
            task,
            m,
            n,
            wcet: task.wcet(),
            lst: a.lst().iter().map(|&x| x.max(0) as Ticks).collect(),
            pred_mask,
            succ_mask,
            topo: task.topo_order(),
            d: task.deadline(),
            start: vec![0; n],
            finish: vec![0; n],
            proc_of: vec![0; n],
            avail: vec![0; m],
            failed: HashSet::new(),
            deadline,
            explored: 0,
            timed_out: false,
        }
    }

    fn run(&mut self) -> Option<Schedule> {
        let work: Ticks = self.wcet.iter().sum();
        if self.dfs(0, 0, work) {
            let s = Schedule::from_placement(self.task, self.m, self.proc_of.clone(), self.start.clone());
            debug_assert!(s.validate(self.task).is_ok() && s.meets_deadline(self.task));
            Some(s)
        } else {
            None
        }
    }

    fn all_mask(&self) -> u64 {
        if self.n == 64 {
            u64::MAX
        } else {
            (1u64 << self.n) - 1
        }
    }

    /// Propagates earliest starts through the unscheduled nodes, none of
    /// which may start before `last`. False if one misses its latest start.
    fn propagate(&self, done: u64, last: Ticks) -> bool {
        let mut est = vec![0 as Ticks; self.n];
        for &v in self.topo {
            if done >> v & 1 == 1 {
                continue;
            }
            let mut s = last;
            for &p in self.task.preds(v) {
                let f = if done >> p & 1 == 1 {
                    self.finish[p]
                } else {
                    est[p] + self.wcet[p]
                };
                s = s.max(f);
            }
            if s > self.lst[v] {
                return false;
            }
            est[v] = s;
        }
        true
    }

    fn memo_key(&self, done: u64, last: Ticks) -> Vec<u64> {
        let mut key = Vec::with_capacity(2 + self.m + self.n);
        key.push(done);
        key.push(last);
        let mut av: Vec<Ticks> = self.avail.iter().map(|&a| a.max(last)).collect();
        av.sort_unstable();
        key.extend(av);
        let mut bits = done;
        while bits != 0 {
            let v = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            if self.succ_mask[v] & !done != 0 {
                key.push(self.finish[v].max(last));
            }
        }
        key
    }

    fn dfs(&mut self, done: u64, last: Ticks, remaining: Ticks) -> bool {
        if done == self.all_mask() {
            return true;
        }
        self.explored += 1;
        if self.explored % 4096 == 0 {
            if let Some(dl) = self.deadline {
                if Instant::now() >= dl {
                    self.timed_out = true;
                }
            }
        }
        if self.timed_out {
            return false;
        }
        let capacity: Ticks = self
            .avail
            .iter()
            .map(|&a| self.d.saturating_sub(a.max(last)))
            .sum();
        if remaining > capacity || !self.propagate(done, last) {
            return false;
        }
        let key = self.memo_key(done, last);
        if self.failed.contains(&key) {
            return false;
        }

        // (start, lst, node, processor)
        let mut branches: Vec<(Ticks, Ticks, usize, usize)> = Vec::new();
        for v in 0..self.n {
            if done >> v & 1 == 1 || self.pred_mask[v] & !done != 0 {
                continue;
            }
            let ready = self
                .task
                .preds(v)
                .iter()
                .map(|&p| self.finish[p])
                .max()
                .unwrap_or(0);
            let base = ready.max(last);
            // Any processor free by `base` gives the same start; the one
            // freed latest leaves the others for later nodes.
            let fit = (0..self.m)
                .filter(|&p| self.avail[p] <= base)
                .max_by_key(|&p| (self.avail[p], std::cmp::Reverse(p)));
            if let Some(p) = fit {
                if base <= self.lst[v] {
                    branches.push((base, self.lst[v], v, p));
                }
            }
            let mut later: Vec<(Ticks, usize)> = (0..self.m)
                .filter(|&p| self.avail[p] > base && self.avail[p] <= self.lst[v])
                .map(|p| (self.avail[p], p))
                .collect();
            later.sort_unstable();
            later.dedup_by_key(|x| x.0);
            branches.extend(later.into_iter().map(|(a, p)| (a, self.lst[v], v, p)));
        }
        branches.sort_unstable();

        for (s, _, v, p) in branches {
            let prev = self.avail[p];
            let f = s + self.wcet[v];
            self.start[v] = s;
            self.finish[v] = f;
            self.proc_of[v] = p;
            self.avail[p] = f;
            if self.dfs(done | 1 << v, s, remaining - self.wcet[v]) {
                return true;
            }
            self.avail[p] = prev;
            if self.timed_out {
                return false;
            }
        }
        if self.failed.len() >= MEMO_CAP {
            self.failed.clear();
        }
        self.failed.insert(key);
        false
    }
}

/// `(alg - opt) / opt` as an exact fraction.
pub fn verify_optimality_gap(alg_processors: usize, exact: &ExactResult) -> Result<Ratio<i64>> {
    if exact.status != ExactStatus::Optimal {
        return Err(Error::NotOptimal);
    }
    let opt = exact.min_processors as i64;
    Ok(Ratio::new(alg_processors as i64 - opt, opt))
}

/// Big-M constant used for both disjunctive constraint families.
pub fn big_m(task: &DagTask) -> Ticks {
    task.deadline() + task.volume()
}

/// The processor-minimization program over `m = W` processor slots:
/// binaries `x_i_k` (node on processor), `y_k` (processor used), `g_i_j`
/// for `i < j` (`i` runs after `j` on a shared processor) and finish times
/// `f_i`. Rows and variables are emitted in a fixed order.
pub fn export_milp_lp(task: &DagTask) -> String {
    let n = task.n();
    let m = GraphAnalysis::new(task).width;
    let c = task.wcet();
    let d = task.deadline();
    let bm = big_m(task);
    let mut out = String::new();

    let _ = writeln!(out, "\\ processor minimization: {n} nodes, {m} processor slots, deadline {d}");
    out.push_str("Minimize\n obj:");
    for k in 0..m {
        let _ = write!(out, "{} y_{k}", if k == 0 { "" } else { " +" });
    }
    out.push_str("\nSubject To\n");
    for i in 0..n {
        let _ = write!(out, " sole_{i}:");
        for k in 0..m {
            let _ = write!(out, "{} x_{i}_{k}", if k == 0 { "" } else { " +" });
        }
        out.push_str(" = 1\n");
    }
    for i in 0..n {
        for j in i + 1..n {
            for k in 0..m {
                let _ = writeln!(
                    out,
                    " order1_{i}_{j}_{k}: f_{i} - f_{j} - {bm} g_{i}_{j} + {bm} x_{i}_{k} + {bm} x_{j}_{k} <= {}",
                    2 * bm as i64 - c[j] as i64
                );
                let _ = writeln!(
                    out,
                    " order2_{i}_{j}_{k}: f_{j} - f_{i} + {bm} g_{i}_{j} + {bm} x_{i}_{k} + {bm} x_{j}_{k} <= {}",
                    3 * bm as i64 - c[i] as i64
                );
            }
        }
    }
    for i in 0..n {
        let _ = writeln!(out, " start_{i}: f_{i} >= {}", c[i]);
    }
    for i in 0..n {
        let _ = writeln!(out, " finish_{i}: f_{i} <= {d}");
    }
    for &(i, j) in task.edges() {
        let _ = writeln!(out, " prec_{i}_{j}: f_{i} - f_{j} <= -{}", c[j]);
    }
    for i in 0..n {
        for k in 0..m {
            let _ = writeln!(out, " busy_{i}_{k}: x_{i}_{k} - y_{k} <= 0");
        }
    }
    out.push_str("Bounds\n");
    for i in 0..n {
        let _ = writeln!(out, " f_{i} >= 0");
    }
    out.push_str("Binaries\n");
    for i in 0..n {
        for k in 0..m {
            let _ = writeln!(out, " x_{i}_{k}");
        }
    }
    for k in 0..m {
        let _ = writeln!(out, " y_{k}");
    }
    for i in 0..n {
        for j in i + 1..n {
            let _ = writeln!(out, " g_{i}_{j}");
        }
    }
    out.push_str("End\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seven_node() -> DagTask {
        DagTask::new(
            &[0, 5, 4, 3, 3, 1, 0],
            &[(0, 1), (0, 2), (0, 3), (1, 4), (1, 5), (2, 5), (3, 5), (4, 6), (5, 6)],
            8,
        )
        .unwrap()
    }

    fn nine_node() -> DagTask {
        DagTask::new(
            &[0, 1, 2, 2, 2, 1, 2, 2, 0],
            &[
                (0, 1), (0, 2), (0, 3), (1, 4), (2, 4), (3, 4),
                (4, 5), (4, 6), (4, 7), (5, 8), (6, 8), (7, 8),
            ],
            8,
        )
        .unwrap()
    }

    #[test]
    fn worked_examples() {
        for t in [seven_node(), nine_node()] {
            let r = branch_and_bound(&t, None).unwrap();
            assert_eq!(r.min_processors, 2);
            assert_eq!(r.status, ExactStatus::Optimal);
            r.schedule.validate(&t).unwrap();
            assert!(r.schedule.meets_deadline(&t));
        }
        let chain = DagTask::new(&[1, 2, 3], &[(0, 1), (1, 2)], 6).unwrap();
        assert_eq!(branch_and_bound(&chain, None).unwrap().min_processors, 1);
    }

    #[test]
    fn needs_more_than_the_bound() {
        // Three unit jobs in a window of 2 ticks need 2 processors, but with
        // a zero-slack 2-tick node alongside they need 3.
        let t = DagTask::new(&[0, 1, 1, 1, 2, 0], &[(0, 1), (0, 2), (0, 3), (0, 4), (1, 5), (2, 5), (3, 5), (4, 5)], 2)
            .unwrap();
        let r = branch_and_bound(&t, None).unwrap();
        assert_eq!(r.lower_bound, 3);
        assert_eq!(r.min_processors, 3);
        let t = DagTask::new(&[0, 1, 1, 1, 0], &[(0, 1), (0, 2), (0, 3), (1, 4), (2, 4), (3, 4)], 2)
            .unwrap();
        let r = branch_and_bound(&t, None).unwrap();
        assert_eq!((r.lower_bound, r.min_processors, r.width), (2, 2, 3));
    }

    #[test]
    fn rejects_infeasible_and_oversized() {
        let t = DagTask::new(&[3, 3], &[(0, 1)], 5).unwrap();
        assert!(matches!(branch_and_bound(&t, None), Err(Error::InfeasibleDeadline { .. })));
        let big = DagTask::new(&vec![1; 70], &[], 10).unwrap();
        assert!(matches!(branch_and_bound(&big, None), Err(Error::TooLarge(72, 64))));
    }

    #[test]
    fn zero_time_limit_reports_timeout_or_optimum() {
        let r = branch_and_bound(&nine_node(), Some(Duration::ZERO)).unwrap();
        assert!(r.min_processors >= 2 && r.min_processors <= 3);
    }

    #[test]
    fn gaps() {
        let r = branch_and_bound(&seven_node(), None).unwrap();
        assert_eq!(verify_optimality_gap(2, &r).unwrap(), Ratio::new(0, 1));
        assert_eq!(verify_optimality_gap(3, &r).unwrap(), Ratio::new(1, 2));
        let mut timed = r.clone();
        timed.status = ExactStatus::TimedOut;
        assert!(matches!(verify_optimality_gap(2, &timed), Err(Error::NotOptimal)));
    }

    #[test]
    fn lp_shape_for_seven_node_example() {
        let lp = export_milp_lp(&seven_node());
        let binaries: Vec<&str> = lp
            .split("Binaries\n")
            .nth(1)
            .unwrap()
            .lines()
            .take_while(|l| *l != "End")
            .map(str::trim)
            .collect();
        assert_eq!(binaries.iter().filter(|v| v.starts_with("x_")).count(), 21);
        assert_eq!(binaries.iter().filter(|v| v.starts_with("y_")).count(), 3);
        assert_eq!(binaries.iter().filter(|v| v.starts_with("g_")).count(), 21);
        assert_eq!(lp.lines().filter(|l| l.starts_with(" f_") && l.ends_with(">= 0")).count(), 7);
        assert_eq!(lp.lines().filter(|l| l.starts_with(" prec_")).count(), 9);
        assert!(lp.contains("Minimize\n obj: y_0 + y_1 + y_2\n"));
        assert_eq!(export_milp_lp(&seven_node()), lp);
    }
}
