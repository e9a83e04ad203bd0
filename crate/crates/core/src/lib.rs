//! Edge generation scheduling for non-preemptive real-time DAG tasks.
//!
//! A DAG task is made trivially schedulable on `M` processors by adding
//! precedence edges until its width is at most `M` while its critical path
//! still fits the deadline. The crate provides the graph attributes, the
//! edge masks and search loop, dispatchers, an exact solver, list-scheduling
//! baselines, a task generator and the benchmark harness.

pub mod analysis;
pub mod baselines;
pub mod bench;
pub mod bitmatrix;
pub mod dispatch;
pub mod egs;
pub mod error;
pub mod exact;
pub mod mask;
pub mod matching;
pub mod protocol;
pub mod task;
pub mod taskgen;

pub use analysis::GraphAnalysis;
pub use bitmatrix::BoolMatrix;
pub use error::{Error, Result};
pub use task::{DagTask, RawTask, Ticks};
