use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};
use rand_chacha::ChaCha8Rng;

use egs_core::baselines::{incremental_search, list_schedule, vertex_length_priority};
use egs_core::bench::{
    acceptance_table, gap_table, load_dataset, processor_table, records_from_csv, records_to_csv, run_bench,
    Algorithm, BenchOptions, Pivot,
};
use egs_core::dispatch::{global_simulate, partitioned_dispatch_on, Schedule, TieBreak};
use egs_core::egs::{egs_run, lower_bound, EgsState, GreedyPolicy, Policy, PolicyDecision, RandomPolicy};
use egs_core::exact::{branch_and_bound, export_milp_lp};
use egs_core::protocol::{timeout_from_env, ExternalPolicy};
use egs_core::taskgen::{generate_dataset, Cell, Structure};
use egs_core::{DagTask, Error, GraphAnalysis};

#[derive(Parser)]
#[command(name = "egs", version, about = "Processor minimization for non-preemptive DAG tasks by edge generation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print length, width and per-node attributes.
    Analyze { task: PathBuf },
    /// Add edges until the task is trivially schedulable.
    Egs {
        task: PathBuf,
        #[arg(long, value_enum, default_value = "greedy")]
        policy: PolicyKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Command serving the external policy over stdin/stdout.
        #[arg(long, conflicts_with = "policy_addr")]
        policy_cmd: Option<String>,
        /// host:port of an external policy server.
        #[arg(long)]
        policy_addr: Option<String>,
        /// Print the combined mask before every decision (to stderr).
        #[arg(long)]
        dump_masks: bool,
        /// Write the final supergraph here.
        #[arg(long)]
        out_task: Option<PathBuf>,
        #[command(flatten)]
        export: ScheduleExport,
    },
    /// List scheduling with incremental processor search.
    Baseline {
        task: PathBuf,
        #[arg(long, value_enum, default_value = "vertex-length")]
        rule: Rule,
        #[command(flatten)]
        export: ScheduleExport,
    },
    /// Exact minimum processor count by branch and bound.
    Exact {
        task: PathBuf,
        /// Also write the MILP formulation in LP format.
        #[arg(long)]
        export_lp: Option<PathBuf>,
        /// Seconds.
        #[arg(long)]
        time_limit: Option<f64>,
        #[command(flatten)]
        export: ScheduleExport,
    },
    /// Dispatch the task on M processors.
    Simulate {
        task: PathBuf,
        #[arg(short = 'M', long = "processors")]
        m: usize,
        #[arg(long, value_enum, default_value = "global")]
        mode: Mode,
        /// Shuffle the order of simultaneously ready nodes with this seed.
        #[arg(long)]
        tie_seed: Option<u64>,
        #[command(flatten)]
        export: ScheduleExport,
    },
    /// Generate a dataset over utilization and density ranges.
    Gen {
        /// `standard` for the 7 x 5 grid, or comma-separated `U:DENS` lower
        /// ends such as `1:0.9,5:0.9`.
        #[arg(long, default_value = "standard")]
        grid: String,
        #[arg(long)]
        per_cell: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        max_depth: Option<u32>,
        #[arg(long)]
        parallel_prob: Option<f64>,
        #[arg(long)]
        max_branches: Option<u32>,
        #[arg(long)]
        max_nodes: Option<usize>,
    },
    /// Run algorithms over a dataset split and write one CSV record per
    /// task and algorithm.
    Bench {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
        /// Comma-separated: egs-grd, egs-rnd, egs-ppo, list-vl, exact.
        #[arg(long, value_delimiter = ',', default_value = "egs-grd,egs-rnd,list-vl")]
        algs: Vec<String>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Seconds per exact solve.
        #[arg(long)]
        time_limit: Option<f64>,
        /// Command serving the external policy for egs-ppo.
        #[arg(long)]
        policy_cmd: Option<String>,
        /// Fill the runtime_ms column (makes output machine dependent).
        #[arg(long)]
        record_runtime: bool,
    },
    /// Aggregate a results CSV into report tables.
    Report {
        results: PathBuf,
        #[arg(long, value_enum, default_value = "utilization")]
        pivot: PivotArg,
        /// Platform size for the acceptance ratio.
        #[arg(short = 'M', long = "processors", default_value_t = 8)]
        m: usize,
        /// Write processors.csv, acceptance.csv and gap.csv here instead of
        /// printing them.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

#[derive(clap::Args)]
struct ScheduleExport {
    /// Write the schedule as JSON.
    #[arg(long)]
    schedule_json: Option<PathBuf>,
    /// Write the schedule as a CSV Gantt table.
    #[arg(long)]
    schedule_csv: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyKind {
    Greedy,
    Random,
    External,
}

#[derive(Clone, Copy, ValueEnum)]
enum Rule {
    VertexLength,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Global,
    Partitioned,
}

#[derive(Clone, Copy, ValueEnum)]
enum PivotArg {
    Utilization,
    Density,
}

enum Failure {
    Usage(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Core(e.into())
    }
}

type CliResult = Result<(), Failure>;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::PolicyProtocol(_) | Error::Timeout(_) => 4,
        Error::EmptyGraph
        | Error::CyclicGraph(_)
        | Error::InvalidDeadline { .. }
        | Error::InvalidTask(_)
        | Error::Parse(_)
        | Error::InfeasibleDeadline { .. }
        | Error::NotTriviallySchedulable { .. }
        | Error::InfeasibleSchedule(_)
        | Error::TooLarge(..)
        | Error::GenerationExhausted(_)
        | Error::Json(_) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(command: Command) -> CliResult {
    match command {
        Command::Analyze { task } => analyze(&load(&task)?),
        Command::Egs {
            task,
            policy,
            seed,
            policy_cmd,
            policy_addr,
            dump_masks,
            out_task,
            export,
        } => {
            let task = load(&task)?;
            let inner: Box<dyn Policy> = match policy {
                PolicyKind::Greedy => Box::new(GreedyPolicy),
                PolicyKind::Random => Box::new(RandomPolicy),
                PolicyKind::External => match (policy_cmd, policy_addr) {
                    (Some(cmd), None) => Box::new(ExternalPolicy::spawn(&cmd, timeout_from_env())?),
                    (None, Some(addr)) => Box::new(ExternalPolicy::connect(&addr, timeout_from_env())?),
                    _ => {
                        return Err(Failure::Usage(
                            "--policy external needs --policy-cmd or --policy-addr".into(),
                        ))
                    }
                },
            };
            let mut policy = MaskDump { inner, dump: dump_masks };
            let result = egs_run(&task, &mut policy, seed)?;
            println!("{}", serde_json::to_string_pretty(&result).map_err(Error::from)?);
            if let Some(path) = out_task {
                result.final_graph.save(path)?;
            }
            let g = &result.final_graph;
            let schedule = partitioned_dispatch_on(g, &GraphAnalysis::new(g), result.processors)?;
            export_schedule(&schedule, &export)
        }
        Command::Baseline { task, rule, export } => {
            let task = load(&task)?;
            let analysis = GraphAnalysis::new(&task);
            let prio = match rule {
                Rule::VertexLength => vertex_length_priority(&task, &analysis),
            };
            let m = incremental_search(&task, &prio)?;
            println!("processors {m}");
            export_schedule(&list_schedule(&task, m, &prio), &export)
        }
        Command::Exact {
            task,
            export_lp,
            time_limit,
            export,
        } => {
            let task = load(&task)?;
            if let Some(path) = export_lp {
                fs::write(path, export_milp_lp(&task))?;
            }
            let r = branch_and_bound(&task, seconds(time_limit)?)?;
            println!("processors {}", r.min_processors);
            println!("status {:?}", r.status);
            println!("lower_bound {}", r.lower_bound);
            println!("width {}", r.width);
            println!("explored {}", r.explored_nodes);
            export_schedule(&r.schedule, &export)
        }
        Command::Simulate {
            task,
            m,
            mode,
            tie_seed,
            export,
        } => {
            let task = load(&task)?;
            if m == 0 {
                return Err(Failure::Usage("-M must be at least 1".into()));
            }
            let schedule = match mode {
                Mode::Global => {
                    let tie = tie_seed.map_or(TieBreak::NodeIndex, TieBreak::Shuffled);
                    let sim = global_simulate(&task, m, tie);
                    println!("max_active {}", sim.max_active);
                    println!("queueing_delay {}", sim.total_queueing_delay);
                    sim.schedule
                }
                Mode::Partitioned => partitioned_dispatch_on(&task, &GraphAnalysis::new(&task), m)?,
            };
            println!("makespan {}", schedule.makespan);
            println!("deadline {}", task.deadline());
            println!("meets_deadline {}", schedule.meets_deadline(&task));
            print!("{}", schedule.render());
            export_schedule(&schedule, &export)?;
            if schedule.meets_deadline(&task) {
                Ok(())
            } else {
                Err(Error::InfeasibleSchedule(format!(
                    "makespan {} exceeds deadline {}",
                    schedule.makespan,
                    task.deadline()
                ))
                .into())
            }
        }
        Command::Gen {
            grid,
            per_cell,
            seed,
            out,
            max_depth,
            parallel_prob,
            max_branches,
            max_nodes,
        } => {
            let grid = parse_grid(&grid)?;
            let d = Structure::default();
            let structure = Structure {
                max_depth: max_depth.unwrap_or(d.max_depth),
                parallel_prob: parallel_prob.unwrap_or(d.parallel_prob),
                max_branches: max_branches.unwrap_or(d.max_branches),
                max_nodes: max_nodes.unwrap_or(d.max_nodes),
            };
            if !(0.0..=1.0).contains(&structure.parallel_prob) {
                return Err(Failure::Usage("--parallel-prob must lie in [0, 1]".into()));
            }
            let manifest = generate_dataset(&grid, per_cell, seed, structure, &out)?;
            println!("{} cells, {} tasks per cell, written to {}", manifest.cells.len(), per_cell, out.display());
            Ok(())
        }
        Command::Bench {
            dataset,
            split,
            algs,
            out,
            jobs,
            seed,
            time_limit,
            policy_cmd,
            record_runtime,
        } => {
            let algs = algs
                .iter()
                .map(|a| a.parse::<Algorithm>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| Failure::Usage(e.to_string()))?;
            if algs.contains(&Algorithm::EgsExternal) && policy_cmd.is_none() {
                return Err(Failure::Usage("egs-ppo needs --policy-cmd".into()));
            }
            let tasks = load_dataset(&dataset, &split)?;
            let opts = BenchOptions {
                base_seed: seed,
                exact_time_limit: seconds(time_limit)?,
                policy_cmd,
                record_runtime,
                jobs,
            };
            let records = run_bench(&tasks, &algs, &opts)?;
            fs::write(&out, records_to_csv(&records)?)?;
            println!("{} records written to {}", records.len(), out.display());
            Ok(())
        }
        Command::Report {
            results,
            pivot,
            m,
            out_dir,
        } => {
            let records = records_from_csv(&fs::read_to_string(results)?)?;
            let pivot = match pivot {
                PivotArg::Utilization => Pivot::Utilization,
                PivotArg::Density => Pivot::Density,
            };
            let tables = [
                ("processors.csv", processor_table(&records, pivot)),
                ("acceptance.csv", acceptance_table(&records, m)),
                ("gap.csv", gap_table(&records)),
            ];
            match out_dir {
                Some(dir) => {
                    fs::create_dir_all(&dir)?;
                    for (name, text) in &tables {
                        fs::write(dir.join(name), text)?;
                    }
                }
                None => {
                    let mut stdout = std::io::stdout().lock();
                    for (i, (_, text)) in tables.iter().enumerate() {
                        if i > 0 {
                            writeln!(stdout)?;
                        }
                        write!(stdout, "{text}")?;
                    }
                }
            }
            Ok(())
        }
    }
}

fn load(path: &Path) -> Result<DagTask, Error> {
    DagTask::load(path)
}

fn seconds(s: Option<f64>) -> Result<Option<Duration>, Failure> {
    s.map(|s| Duration::try_from_secs_f64(s).map_err(|_| Failure::Usage(format!("invalid time limit {s}"))))
        .transpose()
}

fn analyze(task: &DagTask) -> CliResult {
    let a = GraphAnalysis::new(task);
    let list = |xs: &[i64]| xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
    let ulist = |xs: &[usize]| xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
    println!("nodes {}", task.n());
    println!("deadline {}", task.deadline());
    println!("volume {}", task.volume());
    println!("length {}", a.length);
    println!("width {}", a.width);
    println!("lower_bound {}", lower_bound(task, &a));
    println!("critical_path {}", ulist(&a.critical_path));
    println!("est {}", list(a.est()));
    println!("eft {}", list(a.eft()));
    println!("lst {}", list(a.lst()));
    println!("lft {}", list(a.lft()));
    println!("lw {}", ulist(a.lw()));
    println!("iw {}", ulist(a.iw()));
    println!("ow {}", ulist(a.ow()));
    for (k, chain) in a.path_cover.chains.iter().enumerate() {
        println!("chain {k}: {}", ulist(chain));
    }
    Ok(())
}

fn export_schedule(schedule: &Schedule, export: &ScheduleExport) -> CliResult {
    if let Some(path) = &export.schedule_json {
        fs::write(path, schedule.to_json())?;
    }
    if let Some(path) = &export.schedule_csv {
        fs::write(path, schedule.to_csv()?)?;
    }
    Ok(())
}

fn parse_grid(text: &str) -> Result<Vec<Cell>, Failure> {
    if text == "standard" {
        return Ok(Cell::standard_grid());
    }
    let tenths = |s: &str| -> Option<u32> {
        let x: f64 = s.trim().parse().ok()?;
        let t = (x * 10.0).round();
        ((t - x * 10.0).abs() < 1e-9 && t >= 0.0).then_some(t as u32)
    };
    text.split(',')
        .map(|pair| {
            let (u, d) = pair
                .split_once(':')
                .and_then(|(u, d)| Some((tenths(u)?, tenths(d)?)))
                .ok_or_else(|| Failure::Usage(format!("bad grid entry {pair:?}, expected U:DENS")))?;
            if d == 0 || d > 9 {
                return Err(Failure::Usage(format!("density lower end in {pair:?} must be 0.1..0.9")));
            }
            Ok(Cell::new(u, d))
        })
        .collect()
}

/// Prints the mask before delegating each decision.
struct MaskDump {
    inner: Box<dyn Policy>,
    dump: bool,
}

impl Policy for MaskDump {
    fn select(&mut self, state: &EgsState, rng: &mut ChaCha8Rng) -> egs_core::Result<PolicyDecision> {
        if self.dump {
            eprintln!("step {} width {}", state.step, state.width());
            eprint!("{}", state.mask.dump());
        }
        self.inner.select(state, rng)
    }

    fn finish(&mut self, reward_total: i64) -> egs_core::Result<()> {
        self.inner.finish(reward_total)
    }
}
