//! Random DAG tasks: nested fork-join structures whose utilization and
//! density land in prescribed ranges, and dataset generation over a grid of
//! such ranges.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::dag_length;
use crate::error::{Error, Result};
use crate::task::{DagTask, Ticks};

/// Deadline (and period) of every generated task.
pub const DEADLINE_TICKS: Ticks = 10_000;
pub const MAX_ATTEMPTS: usize = 10_000;
/// Raw WCETs are drawn uniformly from `1..=RAW_WCET_MAX` before scaling.
pub const RAW_WCET_MAX: u64 = 100;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Structure {
    /// Maximum nesting depth of fork-join blocks.
    pub max_depth: u32,
    /// Probability that a block below the root is itself a fork-join.
    pub parallel_prob: f64,
    /// Largest number of branches of one fork.
    pub max_branches: u32,
    /// Larger graphs are rejected.
    pub max_nodes: usize,
}

impl Default for Structure {
    fn default() -> Self {
        Structure {
            max_depth: 3,
            parallel_prob: 0.5,
            max_branches: 7,
            max_nodes: 140,
        }
    }
}

impl Structure {
    /// Small graphs for exact solving.
    pub fn small(max_nodes: usize) -> Self {
        Structure {
            max_depth: 2,
            parallel_prob: 0.3,
            max_branches: 6,
            max_nodes,
        }
    }
}

/// A utilization range `[u_lo/10, u_lo/10 + 1)` and density range
/// `[d_lo/10, d_lo/10 + 0.1)`, both in tenths so membership is exact.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub u_lo_tenths: u32,
    pub d_lo_tenths: u32,
}

impl Cell {
    pub fn new(u_lo_tenths: u32, d_lo_tenths: u32) -> Self {
        Cell {
            u_lo_tenths,
            d_lo_tenths,
        }
    }

    pub fn u_hi_tenths(&self) -> u32 {
        self.u_lo_tenths + 10
    }

    pub fn d_hi_tenths(&self) -> u32 {
        self.d_lo_tenths + 1
    }

    /// `u{lo}-{hi}_d{lo}-{hi}`, e.g. `u1-2_d0.9-1.0`.
    pub fn label(&self) -> String {
        format!(
            "u{}-{}_d{}-{}",
            tenths(self.u_lo_tenths),
            tenths(self.u_hi_tenths()),
            tenths_fixed(self.d_lo_tenths),
            tenths_fixed(self.d_hi_tenths())
        )
    }

    /// Inverse of [`Cell::label`].
    pub fn from_label(label: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("malformed cell label {label:?}"));
        let (u, d) = label.strip_prefix('u').and_then(|s| s.split_once("_d")).ok_or_else(bad)?;
        let lo = |range: &str| range.split_once('-').and_then(|(lo, _)| parse_tenths(lo)).ok_or_else(bad);
        let cell = Cell::new(lo(u)?, lo(d)?);
        if cell.label() != label {
            return Err(bad());
        }
        Ok(cell)
    }

    pub fn u_range_label(&self) -> String {
        format!("[{},{})", tenths_fixed(self.u_lo_tenths), tenths_fixed(self.u_hi_tenths()))
    }

    pub fn dens_range_label(&self) -> String {
        format!("[{},{})", tenths_fixed(self.d_lo_tenths), tenths_fixed(self.d_hi_tenths()))
    }

    /// `lo <= volume / D < hi`, compared in integers.
    pub fn utilization_holds(&self, volume: Ticks, deadline: Ticks) -> bool {
        in_tenths_range(volume, deadline, self.u_lo_tenths, self.u_hi_tenths())
    }

    pub fn density_holds(&self, length: Ticks, deadline: Ticks) -> bool {
        in_tenths_range(length, deadline, self.d_lo_tenths, self.d_hi_tenths())
    }

    pub fn holds_for(&self, task: &DagTask) -> bool {
        self.utilization_holds(task.volume(), task.deadline())
            && self.density_holds(dag_length(task).0, task.deadline())
    }

    /// The 7 x 5 grid: `U` from `[1,2)` to `[7,8)`, density from
    /// `[0.5,0.6)` to `[0.9,1.0)`.
    pub fn standard_grid() -> Vec<Cell> {
        (1..=7)
            .flat_map(|u| (5..=9).map(move |d| Cell::new(u * 10, d)))
            .collect()
    }
}

fn in_tenths_range(num: Ticks, den: Ticks, lo: u32, hi: u32) -> bool {
    let x = 10 * num as u128;
    x >= lo as u128 * den as u128 && x < hi as u128 * den as u128
}

fn parse_tenths(s: &str) -> Option<u32> {
    let (int, frac) = s.split_once('.').unwrap_or((s, "0"));
    if frac.len() != 1 {
        return None;
    }
    Some(int.parse::<u32>().ok()? * 10 + frac.parse::<u32>().ok()?)
}

fn tenths(t: u32) -> String {
    if t % 10 == 0 {
        (t / 10).to_string()
    } else {
        tenths_fixed(t)
    }
}

fn tenths_fixed(t: u32) -> String {
    format!("{}.{}", t / 10, t % 10)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub cell: Cell,
    pub structure: Structure,
}

/// Fork-join skeleton: edges over nodes numbered in creation order, so
/// every edge goes from a lower to a higher index.
fn fork_join(rng: &mut impl Rng, s: &Structure) -> (usize, Vec<(usize, usize)>) {
    fn block(
        rng: &mut impl Rng,
        s: &Structure,
        depth: u32,
        next: &mut usize,
        edges: &mut Vec<(usize, usize)>,
    ) -> (usize, usize) {
        let fork = depth == 0 || (depth < s.max_depth && rng.gen_bool(s.parallel_prob));
        let head = *next;
        *next += 1;
        if !fork {
            return (head, head);
        }
        let k = rng.gen_range(2..=s.max_branches.max(2));
        let mut tails = Vec::with_capacity(k as usize);
        for _ in 0..k {
            let (h, t) = block(rng, s, depth + 1, next, edges);
            edges.push((head, h));
            tails.push(t);
        }
        let join = *next;
        *next += 1;
        edges.extend(tails.into_iter().map(|t| (t, join)));
        (head, join)
    }
    let mut next = 0;
    let mut edges = Vec::new();
    block(rng, s, 0, &mut next, &mut edges);
    (next, edges)
}

/// One task in `params.cell`, by rejection sampling: draw a skeleton and raw
/// WCETs, pick a utilization compatible with both ranges given the raw
/// length-to-volume ratio, scale, round down, top up one node, and check
/// both predicates exactly. Returns the task and the attempts used.
pub fn generate_task(params: &GenSpec, rng: &mut ChaCha8Rng) -> Result<(DagTask, usize)> {
    let d = DEADLINE_TICKS;
    let cell = params.cell;
    for attempt in 1..=MAX_ATTEMPTS {
        let (n, edges) = fork_join(rng, &params.structure);
        if n > params.structure.max_nodes {
            continue;
        }
        let raw: Vec<Ticks> = (0..n).map(|_| rng.gen_range(1..=RAW_WCET_MAX)).collect();
        let raw_task = DagTask::new(&raw, &edges, d)?;
        let vol = raw_task.volume() as f64;
        let ratio = dag_length(&raw_task).0 as f64 / vol;
        // density = U * ratio, so U must lie in both intervals
        let lo = (cell.u_lo_tenths as f64 / 10.0).max(cell.d_lo_tenths as f64 / 10.0 / ratio);
        let hi = (cell.u_hi_tenths() as f64 / 10.0).min(cell.d_hi_tenths() as f64 / 10.0 / ratio);
        if lo >= hi {
            continue;
        }
        let u = rng.gen_range(lo..hi);
        let target = (u * d as f64).round() as Ticks;
        let scale = target as f64 / vol;
        let mut wcet: Vec<Ticks> = raw.iter().map(|&c| ((c as f64 * scale).floor() as Ticks).max(1)).collect();
        let sum: Ticks = wcet.iter().sum();
        if sum < target {
            let i = rng.gen_range(0..n);
            wcet[i] += target - sum;
        }
        let task = DagTask::new(&wcet, &edges, d)?;
        if cell.holds_for(&task) {
            return Ok((task, attempt));
        }
    }
    Err(Error::GenerationExhausted(MAX_ATTEMPTS))
}

pub const SPLITS: [&str; 3] = ["train", "val", "test"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellManifest {
    pub label: String,
    pub index: usize,
    pub seed: u64,
    pub cell: Cell,
    pub counts: [usize; 3],
    pub attempts: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub per_cell: usize,
    pub deadline_ticks: Ticks,
    pub structure: Structure,
    pub cells: Vec<CellManifest>,
}

/// Per-cell split sizes in the ratio 0.6 : 0.2 : 0.2.
pub fn split_counts(per_cell: usize) -> [usize; 3] {
    let train = per_cell * 6 / 10;
    let val = per_cell * 2 / 10;
    [train, val, per_cell - train - val]
}

/// Generated tasks of one cell, each tagged with its split.
pub struct CellTasks {
    pub manifest: CellManifest,
    pub tasks: Vec<(usize, DagTask)>,
}

/// Generates `per_cell` tasks in every cell and assigns them to splits.
/// Cell `i` uses seed `seed ^ i`; cells run in parallel.
pub fn generate_cells(grid: &[Cell], per_cell: usize, seed: u64, structure: Structure) -> Result<Vec<CellTasks>> {
    grid.par_iter()
        .enumerate()
        .map(|(index, &cell)| {
            let cell_seed = seed ^ index as u64;
            let mut rng = ChaCha8Rng::seed_from_u64(cell_seed);
            let params = GenSpec { cell, structure };
            let mut tasks = Vec::with_capacity(per_cell);
            let mut attempts = 0;
            for _ in 0..per_cell {
                let (t, a) = generate_task(&params, &mut rng)?;
                attempts += a;
                tasks.push(t);
            }
            let counts = split_counts(per_cell);
            let mut order: Vec<usize> = (0..per_cell).collect();
            order.shuffle(&mut rng);
            let mut split_of = vec![0; per_cell];
            for (pos, &k) in order.iter().enumerate() {
                split_of[k] = if pos < counts[0] {
                    0
                } else if pos < counts[0] + counts[1] {
                    1
                } else {
                    2
                };
            }
            Ok(CellTasks {
                manifest: CellManifest {
                    label: cell.label(),
                    index,
                    seed: cell_seed,
                    cell,
                    counts,
                    attempts,
                },
                tasks: split_of.into_iter().zip(tasks).collect(),
            })
        })
        .collect()
}

/// Writes `out/{train,val,test}/<cell>/task_<k>.json` and `out/manifest.json`.
pub fn generate_dataset(
    grid: &[Cell],
    per_cell: usize,
    seed: u64,
    structure: Structure,
    out: &Path,
) -> Result<Manifest> {
    let cells = generate_cells(grid, per_cell, seed, structure)?;
    for c in &cells {
        for split in SPLITS {
            fs::create_dir_all(out.join(split).join(&c.manifest.label))?;
        }
        for (k, (split, task)) in c.tasks.iter().enumerate() {
            let path = out
                .join(SPLITS[*split])
                .join(&c.manifest.label)
                .join(format!("task_{k}.json"));
            task.save(path)?;
        }
    }
    let manifest = Manifest {
        seed,
        per_cell,
        deadline_ticks: DEADLINE_TICKS,
        structure,
        cells: cells.into_iter().map(|c| c.manifest).collect(),
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(out.join("manifest.json"), text)?;
    Ok(manifest)
}

/// Erdos-Renyi DAG over nodes `0..n` (edges only from lower to higher
/// index) with WCETs in `0..=max_wcet` and a deadline between the critical
/// path length and twice that. Used for property tests.
pub fn random_dag(rng: &mut impl Rng, n: usize, edge_prob: f64, max_wcet: Ticks) -> DagTask {
    let wcet: Vec<Ticks> = (0..n).map(|_| rng.gen_range(0..=max_wcet)).collect();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(edge_prob) {
                edges.push((i, j));
            }
        }
    }
    let vol = wcet.iter().sum::<Ticks>().max(1);
    let probe = DagTask::new(&wcet, &edges, vol).expect("forward edges are acyclic");
    let len = dag_length(&probe).0.max(1);
    let d = rng.gen_range(len..=2 * len);
    DagTask::new(&wcet, &edges, d).expect("valid deadline")
}
