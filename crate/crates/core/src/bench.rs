//! Benchmark harness: runs algorithms over a dataset, persists one CSV
//! record per (task, algorithm) and aggregates records into report tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{dag_length, GraphAnalysis};
use crate::baselines::{incremental_search, vertex_length_priority};
use crate::egs::{egs_run, GreedyPolicy, RandomPolicy};
use crate::error::{Error, Result};
use crate::exact::{branch_and_bound, ExactStatus, MAX_NODES};
use crate::protocol::{timeout_from_env, ExternalPolicy};
use crate::task::{DagTask, Ticks};
use crate::taskgen::Cell;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    EgsGreedy,
    EgsRandom,
    EgsExternal,
    ListVertexLength,
    Exact,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::EgsGreedy,
        Algorithm::EgsRandom,
        Algorithm::EgsExternal,
        Algorithm::ListVertexLength,
        Algorithm::Exact,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::EgsGreedy => "egs-grd",
            Algorithm::EgsRandom => "egs-rnd",
            Algorithm::EgsExternal => "egs-ppo",
            Algorithm::ListVertexLength => "list-vl",
            Algorithm::Exact => "exact",
        }
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown algorithm {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordStatus {
    Ok,
    Optimal,
    TimedOut,
    TooLarge,
    Infeasible,
}

/// One row of the results CSV. `processors` is 0 only for infeasible
/// tasks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub task_id: String,
    pub u_range: String,
    pub dens_range: String,
    pub n: usize,
    pub volume: Ticks,
    pub length: Ticks,
    pub deadline: Ticks,
    pub algorithm: String,
    pub processors: usize,
    pub runtime_ms: Option<f64>,
    pub seed: u64,
    pub status: RecordStatus,
}

/// A task together with its identifier and generation cell.
#[derive(Clone, Debug)]
pub struct DatasetTask {
    pub id: String,
    pub cell: Cell,
    pub task: DagTask,
}

/// Loads `dir/<split>/<cell>/task_<k>.json`, ordered by cell and `k`.
pub fn load_dataset(dir: &Path, split: &str) -> Result<Vec<DatasetTask>> {
    let root = dir.join(split);
    let mut found: Vec<(Cell, usize, PathBuf, String)> = Vec::new();
    for entry in fs::read_dir(&root)? {
        let entry = entry?;
        if !entry.file_type()?.is_dir() {
            continue;
        }
        let label = entry.file_name().to_string_lossy().into_owned();
        let cell = Cell::from_label(&label)?;
        for file in fs::read_dir(entry.path())? {
            let path = file?.path();
            let name = path.file_name().unwrap_or_default().to_string_lossy().into_owned();
            let Some(k) = name
                .strip_prefix("task_")
                .and_then(|s| s.strip_suffix(".json"))
                .and_then(|s| s.parse::<usize>().ok())
            else {
                continue;
            };
            found.push((cell, k, path, format!("{split}/{label}/{name}")));
        }
    }
    found.sort_by_key(|(cell, k, _, _)| (*cell, *k));
    found
        .into_iter()
        .map(|(cell, _, path, id)| {
            Ok(DatasetTask {
                id,
                cell,
                task: DagTask::load(&path)?,
            })
        })
        .collect()
}

#[derive(Clone, Debug, Default)]
pub struct BenchOptions {
    /// The random policy on the `k`-th task uses seed `base_seed + k`.
    pub base_seed: u64,
    pub exact_time_limit: Option<Duration>,
    /// Shell command serving the external policy, one process per task.
    pub policy_cmd: Option<String>,
    pub record_runtime: bool,
    /// Worker threads; `None` uses the global pool.
    pub jobs: Option<usize>,
}

/// Runs one algorithm on one task.
pub fn run_one(item: &DatasetTask, alg: Algorithm, seed: u64, opts: &BenchOptions) -> Result<BenchRecord> {
    let task = &item.task;
    let length = dag_length(task).0;
    let started = Instant::now();
    let (processors, status) = if length > task.deadline() {
        (0, RecordStatus::Infeasible)
    } else {
        match alg {
            Algorithm::EgsGreedy => (egs_run(task, &mut GreedyPolicy, seed)?.processors, RecordStatus::Ok),
            Algorithm::EgsRandom => (egs_run(task, &mut RandomPolicy, seed)?.processors, RecordStatus::Ok),
            Algorithm::EgsExternal => {
                let cmd = opts
                    .policy_cmd
                    .as_deref()
                    .ok_or_else(|| Error::PolicyProtocol("no policy command given".into()))?;
                let mut policy = ExternalPolicy::spawn(cmd, timeout_from_env())?;
                (egs_run(task, &mut policy, seed)?.processors, RecordStatus::Ok)
            }
            Algorithm::ListVertexLength => {
                let prio = vertex_length_priority(task, &GraphAnalysis::new(task));
                (incremental_search(task, &prio)?, RecordStatus::Ok)
            }
            Algorithm::Exact if task.n() > MAX_NODES => {
                (GraphAnalysis::new(task).width, RecordStatus::TooLarge)
            }
            Algorithm::Exact => {
                let r = branch_and_bound(task, opts.exact_time_limit)?;
                let status = match r.status {
                    ExactStatus::Optimal => RecordStatus::Optimal,
                    ExactStatus::TimedOut => RecordStatus::TimedOut,
                };
                (r.min_processors, status)
            }
        }
    };
    let runtime_ms = opts
        .record_runtime
        .then(|| started.elapsed().as_secs_f64() * 1e3);
    Ok(BenchRecord {
        task_id: item.id.clone(),
        u_range: item.cell.u_range_label(),
        dens_range: item.cell.dens_range_label(),
        n: task.n(),
        volume: task.volume(),
        length,
        deadline: task.deadline(),
        algorithm: alg.name().to_string(),
        processors,
        runtime_ms,
        seed,
        status,
    })
}

/// Every algorithm on every task. Records come back ordered by task, then
/// by the order of `algs`, whatever the degree of parallelism.
pub fn run_bench(tasks: &[DatasetTask], algs: &[Algorithm], opts: &BenchOptions) -> Result<Vec<BenchRecord>> {
    let work: Vec<(usize, usize)> = (0..tasks.len())
        .flat_map(|t| (0..algs.len()).map(move |a| (t, a)))
        .collect();
    let run = || {
        work.par_iter()
            .map(|&(t, a)| {
                let seed = match algs[a] {
                    Algorithm::EgsRandom => opts.base_seed.wrapping_add(t as u64),
                    _ => opts.base_seed,
                };
                run_one(&tasks[t], algs[a], seed, opts).map(|r| ((t, a), r))
            })
            .collect::<Result<Vec<_>>>()
    };
    let mut out = match opts.jobs {
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build()
            .map_err(|e| Error::InvalidTask(format!("thread pool: {e}")))?
            .install(run)?,
        None => run()?,
    };
    out.sort_by_key(|(key, _)| *key);
    Ok(out.into_iter().map(|(_, r)| r).collect())
}

pub fn records_to_csv(records: &[BenchRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

pub fn records_from_csv(text: &str) -> Result<Vec<BenchRecord>> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pivot {
    /// One row per (utilization range, density range).
    Utilization,
    /// One row per density range, pooled over utilization.
    Density,
}

/// Population mean and standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn range_lo(label: &str) -> f64 {
    label
        .trim_start_matches('[')
        .split(',')
        .next()
        .and_then(|s| s.parse().ok())
        .unwrap_or(f64::NAN)
}

fn algorithms_in(records: &[BenchRecord]) -> Vec<String> {
    let mut algs: Vec<String> = Vec::new();
    for r in records {
        if !algs.contains(&r.algorithm) {
            algs.push(r.algorithm.clone());
        }
    }
    algs.sort_by_key(|a| Algorithm::from_str(a).map(|x| x as usize).unwrap_or(usize::MAX));
    algs
}

fn fmt2(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x:.2}")
    }
}

/// Mean and standard deviation of processors per group and algorithm,
/// over feasible records.
pub fn processor_table(records: &[BenchRecord], pivot: Pivot) -> String {
    let algs = algorithms_in(records);
    let mut groups: BTreeMap<(u64, u64), (Vec<String>, BTreeMap<&str, Vec<f64>>)> = BTreeMap::new();
    for r in records.iter().filter(|r| r.status != RecordStatus::Infeasible) {
        let (key, labels) = match pivot {
            Pivot::Utilization => (
                (range_lo(&r.u_range).to_bits(), range_lo(&r.dens_range).to_bits()),
                vec![r.u_range.clone(), r.dens_range.clone()],
            ),
            Pivot::Density => ((0, range_lo(&r.dens_range).to_bits()), vec![r.dens_range.clone()]),
        };
        groups
            .entry(key)
            .or_insert_with(|| (labels, BTreeMap::new()))
            .1
            .entry(&r.algorithm)
            .or_default()
            .push(r.processors as f64);
    }
    let mut out = String::new();
    out.push_str(match pivot {
        Pivot::Utilization => "u_range,dens_range",
        Pivot::Density => "dens_range",
    });
    for a in &algs {
        write!(out, ",{a}_mean,{a}_std").unwrap();
    }
    out.push('\n');
    for (labels, by_alg) in groups.values() {
        out.push_str(
            &labels
                .iter()
                .map(|l| format!("\"{l}\""))
                .collect::<Vec<_>>()
                .join(","),
        );
        for a in &algs {
            let (m, s) = mean_std(by_alg.get(a.as_str()).map(Vec::as_slice).unwrap_or(&[]));
            write!(out, ",{},{}", fmt2(m), fmt2(s)).unwrap();
        }
        out.push('\n');
    }
    out
}

/// Share of tasks schedulable on `m` processors, per utilization bin of
/// width 0.1 and algorithm.
pub fn acceptance_table(records: &[BenchRecord], m: usize) -> String {
    let algs = algorithms_in(records);
    let mut bins: BTreeMap<u64, BTreeMap<&str, (usize, usize)>> = BTreeMap::new();
    for r in records {
        let bin = (10 * r.volume as u128 / r.deadline.max(1) as u128) as u64;
        let e = bins.entry(bin).or_default().entry(&r.algorithm).or_default();
        e.1 += 1;
        if r.status != RecordStatus::Infeasible && r.processors <= m {
            e.0 += 1;
        }
    }
    let mut out = String::from("u_bin");
    for a in &algs {
        write!(out, ",{a}").unwrap();
    }
    out.push('\n');
    for (bin, by_alg) in &bins {
        write!(out, "{}.{}", bin / 10, bin % 10).unwrap();
        for a in &algs {
            match by_alg.get(a.as_str()) {
                Some(&(ok, total)) => write!(out, ",{:.3}", ok as f64 / total as f64).unwrap(),
                None => out.push(','),
            }
        }
        out.push('\n');
    }
    out
}

/// `(alg - opt) / opt` per algorithm over the tasks whose exact record is
/// optimal: mean and standard deviation in percent, and the share of tasks
/// on which the algorithm is optimal.
pub fn gap_table(records: &[BenchRecord]) -> String {
    let opt: BTreeMap<&str, usize> = records
        .iter()
        .filter(|r| r.algorithm == Algorithm::Exact.name() && r.status == RecordStatus::Optimal)
        .map(|r| (r.task_id.as_str(), r.processors))
        .collect();
    let mut out = String::from("algorithm,tasks,mean_gap_pct,std_gap_pct,optimal_pct\n");
    for a in algorithms_in(records) {
        if a == Algorithm::Exact.name() {
            continue;
        }
        let gaps: Vec<f64> = records
            .iter()
            .filter(|r| r.algorithm == a && r.status == RecordStatus::Ok)
            .filter_map(|r| opt.get(r.task_id.as_str()).map(|&o| (r.processors as f64 - o as f64) / o as f64))
            .collect();
        let (m, s) = mean_std(&gaps);
        let hits = gaps.iter().filter(|&&g| g == 0.0).count() as f64;
        writeln!(
            out,
            "{a},{},{},{},{}",
            gaps.len(),
            fmt2(100.0 * m),
            fmt2(100.0 * s),
            fmt2(if gaps.is_empty() { f64::NAN } else { 100.0 * hits / gaps.len() as f64 })
        )
        .unwrap();
    }
    out
}
