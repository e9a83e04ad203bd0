//! Concrete schedules: partitioned dispatch along a path cover, a global
//! work-conserving simulator, and the conversion of any schedule back into a
//! supergraph.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::GraphAnalysis;
use crate::error::{Error, Result};
use crate::task::{DagTask, Ticks};

/// Non-preemptive single-job schedule on identical processors.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Schedule {
    pub processors: usize,
    /// Nodes of each processor in execution order.
    pub assignment: Vec<Vec<usize>>,
    pub processor_of: Vec<usize>,
    pub start: Vec<Ticks>,
    pub finish: Vec<Ticks>,
    pub makespan: Ticks,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduledJob {
    pub node: usize,
    pub start: Ticks,
    pub finish: Ticks,
}

#[derive(Debug, Serialize, Deserialize)]
struct GanttRow {
    node: usize,
    proc: usize,
    start: Ticks,
    finish: Ticks,
}

impl Schedule {
    /// Builds a schedule from per-node processor and start time.
    pub fn from_placement(
        task: &DagTask,
        processors: usize,
        processor_of: Vec<usize>,
        start: Vec<Ticks>,
    ) -> Self {
        let finish: Vec<Ticks> = start.iter().zip(task.wcet()).map(|(s, c)| s + c).collect();
        let mut rank = vec![0; task.n()];
        for (r, &v) in task.topo_order().iter().enumerate() {
            rank[v] = r;
        }
        let mut assignment = vec![Vec::new(); processors];
        for v in 0..task.n() {
            assignment[processor_of[v]].push(v);
        }
        for seq in &mut assignment {
            seq.sort_by_key(|&v| (start[v], finish[v], rank[v]));
        }
        Schedule {
            processors,
            assignment,
            makespan: finish.iter().copied().max().unwrap_or(0),
            processor_of,
            start,
            finish,
        }
    }

    /// Checks that every node runs exactly once, precedence holds, and no two
    /// jobs on one processor overlap. The deadline is checked separately by
    /// [`Schedule::meets_deadline`].
    pub fn validate(&self, task: &DagTask) -> Result<()> {
        let n = task.n();
        let bad = |msg: String| Err(Error::InfeasibleSchedule(msg));
        if self.start.len() != n || self.finish.len() != n || self.processor_of.len() != n {
            return bad(format!("schedule covers {} of {n} nodes", self.start.len()));
        }
        let mut seen = vec![false; n];
        for (p, seq) in self.assignment.iter().enumerate() {
            for &v in seq {
                if v >= n || seen[v] || self.processor_of[v] != p {
                    return bad(format!("node {v} placed inconsistently"));
                }
                seen[v] = true;
            }
            for w in seq.windows(2) {
                if self.finish[w[0]] > self.start[w[1]] {
                    return bad(format!("nodes {} and {} overlap on processor {p}", w[0], w[1]));
                }
            }
        }
        if let Some(v) = seen.iter().position(|s| !s) {
            return bad(format!("node {v} is not scheduled"));
        }
        for v in 0..n {
            if self.finish[v] != self.start[v] + task.wcet()[v] {
                return bad(format!("node {v} does not run for its WCET"));
            }
        }
        for &(i, j) in task.edges() {
            if self.finish[i] > self.start[j] {
                return bad(format!("edge ({i}, {j}) violated"));
            }
        }
        Ok(())
    }

    pub fn meets_deadline(&self, task: &DagTask) -> bool {
        self.makespan <= task.deadline()
    }

    pub fn jobs_by_processor(&self) -> BTreeMap<usize, Vec<ScheduledJob>> {
        self.assignment
            .iter()
            .enumerate()
            .map(|(p, seq)| {
                let jobs = seq
                    .iter()
                    .map(|&v| ScheduledJob {
                        node: v,
                        start: self.start[v],
                        finish: self.finish[v],
                    })
                    .collect();
                (p, jobs)
            })
            .collect()
    }

    /// `{"<processor>": [{"node", "start", "finish"}, ...], ...}`
    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.jobs_by_processor()).expect("schedule serializes")
    }

    /// Gantt table with header `node,proc,start,finish`, one row per node.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for v in 0..self.start.len() {
            w.serialize(GanttRow {
                node: v,
                proc: self.processor_of[v],
                start: self.start[v],
                finish: self.finish[v],
            })?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv is utf-8"))
    }

    /// Human-readable per-processor listing.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (p, seq) in self.assignment.iter().enumerate() {
            let _ = write!(out, "P{p}:");
            for &v in seq {
                let _ = write!(out, " {v}[{},{})", self.start[v], self.finish[v]);
            }
            out.push('\n');
        }
        out
    }
}

/// Runs path `k` of the minimum path cover on processor `k`, each node at
/// its earliest start time. Needs `L <= D`; uses `W` processors.
pub fn partitioned_dispatch(task: &DagTask, analysis: &GraphAnalysis) -> Result<Schedule> {
    partitioned_dispatch_on(task, analysis, analysis.width)
}

/// As [`partitioned_dispatch`] on a platform of `m >= W` processors; the
/// surplus processors stay idle.
pub fn partitioned_dispatch_on(
    task: &DagTask,
    analysis: &GraphAnalysis,
    m: usize,
) -> Result<Schedule> {
    if analysis.length > task.deadline() || analysis.width > m {
        return Err(Error::NotTriviallySchedulable {
            processors: m,
            width: analysis.width,
            length: analysis.length,
            deadline: task.deadline(),
        });
    }
    let mut processor_of = vec![0; task.n()];
    for (k, chain) in analysis.path_cover.chains.iter().enumerate() {
        for &v in chain {
            processor_of[v] = k;
        }
    }
    let start = analysis.est().iter().map(|&s| s as Ticks).collect();
    let s = Schedule::from_placement(task, m, processor_of, start);
    debug_assert!(s.validate(task).is_ok() && s.meets_deadline(task));
    Ok(s)
}

/// Order among nodes that become ready at the same instant.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TieBreak {
    NodeIndex,
    Shuffled(u64),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Simulation {
    pub schedule: Schedule,
    /// Largest number of started-but-unfinished plus ready-but-waiting jobs
    /// at any instant.
    pub max_active: usize,
    /// Sum over nodes of start time minus ready time.
    pub total_queueing_delay: Ticks,
}

/// Event-driven global dispatch on `m` processors at WCET: ready nodes wait
/// in a FIFO queue (by ready time, then `tie`) and go to the lowest-indexed
/// idle processor.
pub fn global_simulate(task: &DagTask, m: usize, tie: TieBreak) -> Simulation {
    let mut rank: Vec<usize> = (0..task.n()).collect();
    if let TieBreak::Shuffled(seed) = tie {
        rank.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    work_conserving(task, m, |v, ready| (ready, rank[v] as i64))
}

/// Shared engine of the global simulator and the list scheduler. `key`
/// orders waiting nodes (smallest first) given the node and its ready time.
pub(crate) fn work_conserving<K: Ord + Copy>(
    task: &DagTask,
    m: usize,
    key: impl Fn(usize, Ticks) -> K,
) -> Simulation {
    assert!(m >= 1);
    let n = task.n();
    let wcet = task.wcet();
    let mut missing: Vec<usize> = (0..n).map(|v| task.preds(v).len()).collect();
    let mut ready_at = vec![0 as Ticks; n];
    let mut start = vec![0 as Ticks; n];
    let mut processor_of = vec![0; n];
    let mut queue = BinaryHeap::new();
    let mut running: BinaryHeap<Reverse<(Ticks, usize, usize)>> = BinaryHeap::new();
    let mut idle: BTreeSet<usize> = (0..m).collect();
    let mut max_active = 0;
    let mut delay = 0;

    queue.push(Reverse((key(task.source(), 0), task.source())));
    let mut t: Ticks = 0;
    loop {
        while let Some(&Reverse((f, p, v))) = running.peek() {
            if f > t {
                break;
            }
            running.pop();
            idle.insert(p);
            for &s in task.succs(v) {
                missing[s] -= 1;
                if missing[s] == 0 {
                    ready_at[s] = f;
                    queue.push(Reverse((key(s, f), s)));
                }
            }
        }
        while !idle.is_empty() {
            let Some(Reverse((_, v))) = queue.pop() else { break };
            let p = idle.pop_first().unwrap();
            start[v] = t;
            processor_of[v] = p;
            delay += t - ready_at[v];
            running.push(Reverse((t + wcet[v], p, v)));
        }
        let busy = running.iter().filter(|Reverse((f, _, _))| *f > t).count();
        max_active = max_active.max(busy + queue.len());
        match running.peek() {
            None => break,
            Some(&Reverse((f, _, _))) => t = t.max(f),
        }
    }
    debug_assert!(queue.is_empty() && missing.iter().all(|&c| c == 0));
    Simulation {
        schedule: Schedule::from_placement(task, m, processor_of, start),
        max_active,
        total_queueing_delay: delay,
    }
}

/// The task plus edges chaining consecutive jobs of each processor. For a
/// valid schedule meeting the deadline the result has width at most the
/// processor count and length at most `D`.
pub fn schedule_to_supergraph(task: &DagTask, schedule: &Schedule) -> Result<DagTask> {
    schedule.validate(task)?;
    if !schedule.meets_deadline(task) {
        return Err(Error::InfeasibleSchedule(format!(
            "makespan {} exceeds deadline {}",
            schedule.makespan,
            task.deadline()
        )));
    }
    let chain_edges: Vec<(usize, usize)> = schedule
        .assignment
        .iter()
        .flat_map(|seq| seq.windows(2).map(|w| (w[0], w[1])))
        .collect();
    let g = task.with_edges(&chain_edges)?;
    let a = GraphAnalysis::new(&g);
    if a.width > schedule.processors || a.length > g.deadline() {
        return Err(Error::InfeasibleSchedule(format!(
            "supergraph has width {} and length {} for {} processors and deadline {}",
            a.width,
            a.length,
            schedule.processors,
            g.deadline()
        )));
    }
    Ok(g)
}
