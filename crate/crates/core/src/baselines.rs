//! List-scheduling comparators.

use crate::analysis::GraphAnalysis;
use crate::dispatch::{work_conserving, Schedule};
use crate::error::{Error, Result};
use crate::task::DagTask;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PriorityRule {
    /// Length of the longest complete path through the node.
    VertexLength,
    Custom,
}

/// Higher value means more urgent.
#[derive(Clone, Debug, PartialEq)]
pub struct PriorityAssignment {
    pub priority: Vec<f64>,
    pub rule: PriorityRule,
}

impl PriorityAssignment {
    pub fn custom(priority: Vec<f64>) -> Result<Self> {
        if let Some(i) = priority.iter().position(|p| !p.is_finite()) {
            return Err(Error::InvalidTask(format!("priority of node {i} is not finite")));
        }
        Ok(PriorityAssignment {
            priority,
            rule: PriorityRule::Custom,
        })
    }
}

/// `eft[i] + D - lft[i]` for every node.
pub fn vertex_length_priority(task: &DagTask, analysis: &GraphAnalysis) -> PriorityAssignment {
    let d = task.deadline() as i64;
    let priority = analysis
        .eft()
        .iter()
        .zip(analysis.lft())
        .map(|(&e, &l)| (e + d - l) as f64)
        .collect();
    PriorityAssignment {
        priority,
        rule: PriorityRule::VertexLength,
    }
}

/// Work-conserving non-preemptive list scheduling on `m` processors: at
/// every dispatch instant the ready node of highest priority (lowest index
/// on ties) goes to the lowest-indexed idle processor.
pub fn list_schedule(task: &DagTask, m: usize, priorities: &PriorityAssignment) -> Schedule {
    let p = &priorities.priority;
    assert_eq!(p.len(), task.n());
    let mut order: Vec<usize> = (0..task.n()).collect();
    order.sort_by(|&a, &b| p[b].total_cmp(&p[a]).then(a.cmp(&b)));
    let mut rank = vec![0; task.n()];
    for (r, &v) in order.iter().enumerate() {
        rank[v] = r;
    }
    work_conserving(task, m, |v, _| rank[v]).schedule
}

/// Smallest `M` in `1..=n` whose list schedule meets the deadline.
pub fn incremental_search(task: &DagTask, priorities: &PriorityAssignment) -> Result<usize> {
    for m in 1..=task.n() {
        if list_schedule(task, m, priorities).meets_deadline(task) {
            return Ok(m);
        }
    }
    let analysis = GraphAnalysis::new(task);
    Err(Error::InfeasibleDeadline {
        length: analysis.length,
        deadline: task.deadline(),
    })
}
