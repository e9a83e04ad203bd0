use std::time::Duration;

use thiserror::Error;

use crate::task::Ticks;

#[derive(Debug, Error)]
pub enum Error {
    #[error("task graph has no nodes")]
    EmptyGraph,
    #[error("task graph contains a directed cycle through node {0}")]
    CyclicGraph(usize),
    #[error("invalid deadline {deadline} (period {period}): need 0 < D <= T")]
    InvalidDeadline { deadline: Ticks, period: Ticks },
    #[error("invalid task: {0}")]
    InvalidTask(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("critical path length {length} exceeds deadline {deadline}")]
    InfeasibleDeadline { length: Ticks, deadline: Ticks },
    #[error("policy protocol error: {0}")]
    PolicyProtocol(String),
    #[error("policy did not answer within {0:?}")]
    Timeout(Duration),
    #[error("task is not trivially schedulable on {processors} processors (width {width}, length {length}, deadline {deadline})")]
    NotTriviallySchedulable {
        processors: usize,
        width: usize,
        length: Ticks,
        deadline: Ticks,
    },
    #[error("infeasible schedule: {0}")]
    InfeasibleSchedule(String),
    #[error("lower bound requested for an empty node subset")]
    EmptySubset,
    #[error("exact result is not proven optimal")]
    NotOptimal,
    #[error("no task satisfied the generation targets after {0} attempts")]
    GenerationExhausted(usize),
    #[error("instance too large for the exact solver: {0} nodes (max {1})")]
    TooLarge(usize, usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
