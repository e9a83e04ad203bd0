//! Slow, independent oracles shared by the integration suites.
#![allow(dead_code)]

use std::collections::HashMap;

use egs_core::dispatch::Schedule;
use egs_core::{DagTask, Ticks};

/// `r[i][j]` iff a non-empty path leads from `i` to `j`, by depth-first search.
pub fn reach(task: &DagTask) -> Vec<Vec<bool>> {
    let n = task.n();
    let mut r = vec![vec![false; n]; n];
    for s in 0..n {
        let mut stack: Vec<usize> = task.succs(s).to_vec();
        while let Some(v) = stack.pop() {
            if !r[s][v] {
                r[s][v] = true;
                stack.extend_from_slice(task.succs(v));
            }
        }
    }
    r
}

/// Largest antichain among `nodes` by exhaustive backtracking.
pub fn brute_width(r: &[Vec<bool>], nodes: &[usize]) -> usize {
    fn rec(r: &[Vec<bool>], nodes: &[usize], k: usize, chosen: &mut Vec<usize>) -> usize {
        if k == nodes.len() {
            return chosen.len();
        }
        if chosen.len() + (nodes.len() - k) == 0 {
            return 0;
        }
        let v = nodes[k];
        let mut best = rec(r, nodes, k + 1, chosen);
        if chosen.iter().all(|&u| !r[u][v] && !r[v][u]) && chosen.len() + nodes.len() - k > best {
            chosen.push(v);
            best = best.max(rec(r, nodes, k + 1, chosen));
            chosen.pop();
        }
        best
    }
    rec(r, nodes, 0, &mut Vec::new())
}

/// Longest path by WCET sum, by memoized recursion over successors.
pub fn longest_path(task: &DagTask) -> Ticks {
    fn from(task: &DagTask, v: usize, memo: &mut Vec<Option<Ticks>>) -> Ticks {
        if let Some(x) = memo[v] {
            return x;
        }
        let tail = task.succs(v).iter().map(|&s| from(task, s, memo)).max().unwrap_or(0);
        let x = task.wcet()[v] + tail;
        memo[v] = Some(x);
        x
    }
    let mut memo = vec![None; task.n()];
    (0..task.n()).map(|v| from(task, v, &mut memo)).max().unwrap_or(0)
}

/// Whether some precedence-feasible activity list, decoded by the serial
/// schedule generation scheme on a capacity-`m` resource, finishes by the
/// deadline. Active schedules contain a makespan-optimal one, so this decides
/// feasibility exactly. Exponential; keep `n` small.
pub fn sgs_feasible(task: &DagTask, m: usize) -> bool {
    fn rec(task: &DagTask, m: usize, placed: &mut Vec<Option<(Ticks, Ticks)>>, count: usize) -> bool {
        let n = task.n();
        if count == n {
            return true;
        }
        for v in 0..n {
            if placed[v].is_some() || task.preds(v).iter().any(|&p| placed[p].is_none()) {
                continue;
            }
            let c = task.wcet()[v];
            let ready = task.preds(v).iter().map(|&p| placed[p].unwrap().1).max().unwrap_or(0);
            // candidate starts: ready time and every finish time after it
            let mut candidates: Vec<Ticks> = placed.iter().flatten().map(|&(_, f)| f).filter(|&f| f > ready).collect();
            candidates.push(ready);
            candidates.sort_unstable();
            let start = candidates
                .into_iter()
                .find(|&s| {
                    if c == 0 {
                        return true;
                    }
                    let mut points: Vec<Ticks> = vec![s];
                    points.extend(placed.iter().flatten().map(|&(b, _)| b).filter(|&b| b > s && b < s + c));
                    points.iter().all(|&t| {
                        placed.iter().flatten().filter(|&&(b, f)| b < f && b <= t && t < f).count() < m
                    })
                })
                .expect("the latest finish always fits");
            if start + c > task.deadline() {
                continue;
            }
            placed[v] = Some((start, start + c));
            if rec(task, m, placed, count + 1) {
                return true;
            }
            placed[v] = None;
        }
        false
    }
    rec(task, m, &mut vec![None; task.n()], 0)
}

pub fn oracle_min_processors(task: &DagTask) -> Option<usize> {
    (1..=task.n()).find(|&m| sgs_feasible(task, m))
}

/// A parsed LP row `sum coef * var  op  rhs`.
pub struct LpRow {
    pub name: String,
    pub terms: Vec<(f64, String)>,
    pub op: String,
    pub rhs: f64,
}

pub fn parse_lp_rows(lp: &str) -> Vec<LpRow> {
    let body = lp.split("Subject To").nth(1).expect("constraint section");
    let body = body.split("\nBounds").next().unwrap();
    body.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let (name, expr) = line.trim().split_once(':').expect("named row");
            let tokens: Vec<&str> = expr.split_whitespace().collect();
            let op_at = tokens.iter().position(|t| matches!(*t, "<=" | ">=" | "=")).expect("relation");
            let mut terms = Vec::new();
            let mut sign = 1.0;
            let mut coef = 1.0;
            for t in &tokens[..op_at] {
                match *t {
                    "+" => sign = 1.0,
                    "-" => sign = -1.0,
                    t => match t.parse::<f64>() {
                        Ok(x) => coef = x,
                        Err(_) => {
                            terms.push((sign * coef, t.to_string()));
                            sign = 1.0;
                            coef = 1.0;
                        }
                    },
                }
            }
            LpRow {
                name: name.to_string(),
                terms,
                op: tokens[op_at].to_string(),
                rhs: tokens[op_at + 1].parse().expect("numeric right-hand side"),
            }
        })
        .collect()
}

/// LP variable values encoding `schedule` with processors renumbered into
/// slots `0..`.
pub fn lp_assignment(task: &DagTask, schedule: &Schedule, slots: usize) -> HashMap<String, f64> {
    let n = task.n();
    let mut used: Vec<usize> = schedule.processor_of.clone();
    used.sort_unstable();
    used.dedup();
    let slot = |p: usize| used.iter().position(|&u| u == p).unwrap();
    let mut v = HashMap::new();
    for i in 0..n {
        v.insert(format!("f_{i}"), schedule.finish[i] as f64);
        for k in 0..slots {
            v.insert(format!("x_{i}_{k}"), (slot(schedule.processor_of[i]) == k) as u8 as f64);
        }
        for j in i + 1..n {
            let after = schedule.start[i] > schedule.start[j]
                || (schedule.start[i] == schedule.start[j] && schedule.finish[i] > schedule.finish[j]);
            v.insert(format!("g_{i}_{j}"), after as u8 as f64);
        }
    }
    for k in 0..slots {
        v.insert(format!("y_{k}"), (k < used.len()) as u8 as f64);
    }
    v
}

pub fn row_holds(row: &LpRow, values: &HashMap<String, f64>) -> bool {
    let lhs: f64 = row.terms.iter().map(|(c, name)| c * values[name]).sum();
    match row.op.as_str() {
        "<=" => lhs <= row.rhs + 1e-9,
        ">=" => lhs >= row.rhs - 1e-9,
        _ => (lhs - row.rhs).abs() < 1e-9,
    }
}
