//! DAG task model: nodes with worst-case execution times, precedence edges,
//! a constrained deadline and a period.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bitmatrix::BoolMatrix;
use crate::error::{Error, Result};

/// Integer time unit shared by WCETs, deadlines and schedule timestamps.
pub type Ticks = u64;

/// The on-disk task description, before validation and normalization.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawTask {
    pub n: usize,
    pub deadline: Ticks,
    /// Defaults to the deadline when absent.
    #[serde(default)]
    pub period: Option<Ticks>,
    pub wcet: Vec<Ticks>,
    pub edges: Vec<(usize, usize)>,
}

/// Serialized form written by [`DagTask::to_json`]; field order is fixed.
#[derive(Serialize)]
struct TaskFile<'a> {
    n: usize,
    deadline: Ticks,
    period: Ticks,
    wcet: &'a [Ticks],
    edges: &'a [(usize, usize)],
}

/// A validated, normalized DAG task. Immutable once built: it is acyclic,
/// has exactly one source and one sink, and satisfies `0 < D <= T`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DagTask {
    wcet: Vec<Ticks>,
    edges: Vec<(usize, usize)>,
    deadline: Ticks,
    period: Ticks,
    source: usize,
    sink: usize,
    preds: Vec<Vec<usize>>,
    succs: Vec<Vec<usize>>,
    topo: Vec<usize>,
}

impl DagTask {
    /// Validates the raw description and adds zero-WCET dummy endpoints when
    /// the graph has several sources or sinks. A dummy source is appended as
    /// node `n`, a dummy sink after it.
    pub fn from_raw(raw: RawTask) -> Result<Self> {
        let RawTask {
            n,
            deadline,
            period,
            mut wcet,
            edges,
        } = raw;
        if n == 0 {
            return Err(Error::EmptyGraph);
        }
        if wcet.len() != n {
            return Err(Error::InvalidTask(format!(
                "expected {n} WCET values, got {}",
                wcet.len()
            )));
        }
        let period = period.unwrap_or(deadline);
        if deadline == 0 || deadline > period {
            return Err(Error::InvalidDeadline { deadline, period });
        }
        let mut set = BTreeSet::new();
        for &(i, j) in &edges {
            if i >= n || j >= n {
                return Err(Error::InvalidTask(format!(
                    "edge ({i}, {j}) references a node outside 0..{n}"
                )));
            }
            if i == j {
                return Err(Error::CyclicGraph(i));
            }
            set.insert((i, j));
        }

        let mut has_pred = vec![false; n];
        let mut has_succ = vec![false; n];
        for &(i, j) in &set {
            has_succ[i] = true;
            has_pred[j] = true;
        }
        let sources: Vec<usize> = (0..n).filter(|&i| !has_pred[i]).collect();
        let sinks: Vec<usize> = (0..n).filter(|&i| !has_succ[i]).collect();
        // A cycle can leave no source or no sink at all; report it via the
        // topological sort below.
        let mut total = n;
        if sources.len() > 1 {
            let s = total;
            total += 1;
            wcet.push(0);
            set.extend(sources.iter().map(|&v| (s, v)));
        }
        if sinks.len() > 1 {
            let t = total;
            total += 1;
            wcet.push(0);
            set.extend(sinks.iter().map(|&v| (v, t)));
        }
        Self::build(wcet, set.into_iter().collect(), deadline, period, total)
    }

    fn build(
        wcet: Vec<Ticks>,
        edges: Vec<(usize, usize)>,
        deadline: Ticks,
        period: Ticks,
        n: usize,
    ) -> Result<Self> {
        let mut preds = vec![Vec::new(); n];
        let mut succs = vec![Vec::new(); n];
        for &(i, j) in &edges {
            succs[i].push(j);
            preds[j].push(i);
        }
        let topo = topological_order(&preds, &succs)?;
        let sources: Vec<usize> = (0..n).filter(|&i| preds[i].is_empty()).collect();
        let sinks: Vec<usize> = (0..n).filter(|&i| succs[i].is_empty()).collect();
        if sources.len() != 1 || sinks.len() != 1 {
            return Err(Error::InvalidTask(format!(
                "expected one source and one sink, found {} and {}",
                sources.len(),
                sinks.len()
            )));
        }
        Ok(DagTask {
            wcet,
            edges,
            deadline,
            period,
            source: sources[0],
            sink: sinks[0],
            preds,
            succs,
            topo,
        })
    }

    /// Convenience constructor from borrowed parts.
    pub fn new(wcet: &[Ticks], edges: &[(usize, usize)], deadline: Ticks) -> Result<Self> {
        Self::from_raw(RawTask {
            n: wcet.len(),
            deadline,
            period: None,
            wcet: wcet.to_vec(),
            edges: edges.to_vec(),
        })
    }

    /// The same task with one more precedence edge.
    pub fn with_edge(&self, from: usize, to: usize) -> Result<Self> {
        self.with_edges(&[(from, to)])
    }

    pub fn with_edges(&self, extra: &[(usize, usize)]) -> Result<Self> {
        let n = self.n();
        let mut set: BTreeSet<(usize, usize)> = self.edges.iter().copied().collect();
        for &(i, j) in extra {
            if i >= n || j >= n {
                return Err(Error::InvalidTask(format!(
                    "edge ({i}, {j}) references a node outside 0..{n}"
                )));
            }
            if i == j {
                return Err(Error::CyclicGraph(i));
            }
            set.insert((i, j));
        }
        Self::build(
            self.wcet.clone(),
            set.into_iter().collect(),
            self.deadline,
            self.period,
            n,
        )
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.wcet.len()
    }

    pub fn wcet(&self) -> &[Ticks] {
        &self.wcet
    }

    /// Edges in ascending `(from, to)` order.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn deadline(&self) -> Ticks {
        self.deadline
    }

    pub fn period(&self) -> Ticks {
        self.period
    }

    pub fn source(&self) -> usize {
        self.source
    }

    pub fn sink(&self) -> usize {
        self.sink
    }

    pub fn preds(&self, i: usize) -> &[usize] {
        &self.preds[i]
    }

    pub fn succs(&self, i: usize) -> &[usize] {
        &self.succs[i]
    }

    /// A topological order, smallest ready index first.
    pub fn topo_order(&self) -> &[usize] {
        &self.topo
    }

    /// Sum of all WCETs.
    pub fn volume(&self) -> Ticks {
        self.wcet.iter().sum()
    }

    pub fn adjacency(&self) -> BoolMatrix {
        BoolMatrix::from_pairs(self.n(), self.edges.iter().copied())
    }

    pub fn to_raw(&self) -> RawTask {
        RawTask {
            n: self.n(),
            deadline: self.deadline,
            period: Some(self.period),
            wcet: self.wcet.clone(),
            edges: self.edges.clone(),
        }
    }

    /// Canonical single-line JSON with sorted edges and a trailing newline.
    pub fn to_json(&self) -> String {
        let file = TaskFile {
            n: self.n(),
            deadline: self.deadline,
            period: self.period,
            wcet: &self.wcet,
            edges: &self.edges,
        };
        let mut s = serde_json::to_string(&file).expect("task serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawTask = serde_json::from_str(text)?;
        Self::from_raw(raw)
    }

    /// Parses either the JSON format or the edge-list text format, chosen by
    /// the first non-blank character.
    pub fn parse(text: &str) -> Result<Self> {
        if text.trim_start().starts_with('{') {
            Self::from_json(text)
        } else {
            Self::from_raw(parse_edge_list(text)?)
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }
}

fn topological_order(preds: &[Vec<usize>], succs: &[Vec<usize>]) -> Result<Vec<usize>> {
    let n = preds.len();
    let mut indeg: Vec<usize> = preds.iter().map(Vec::len).collect();
    let mut ready: std::collections::BinaryHeap<std::cmp::Reverse<usize>> = (0..n)
        .filter(|&i| indeg[i] == 0)
        .map(std::cmp::Reverse)
        .collect();
    let mut order = Vec::with_capacity(n);
    while let Some(std::cmp::Reverse(v)) = ready.pop() {
        order.push(v);
        for &w in &succs[v] {
            indeg[w] -= 1;
            if indeg[w] == 0 {
                ready.push(std::cmp::Reverse(w));
            }
        }
    }
    if order.len() < n {
        // Every unresolved node keeps an unresolved predecessor, so walking
        // backwards through them must revisit a node on a cycle.
        let mut seen = vec![false; n];
        let mut v = (0..n).find(|&i| indeg[i] > 0).unwrap_or(0);
        while !seen[v] {
            seen[v] = true;
            v = preds[v].iter().copied().find(|&p| indeg[p] > 0).unwrap_or(v);
        }
        return Err(Error::CyclicGraph(v));
    }
    Ok(order)
}

/// Parses the line-oriented edge-list format:
///
/// ```text
/// # comment
/// deadline = 8
/// period = 8
/// 0 [wcet=0]
/// 1 [wcet=5]
/// 0 -> 1; 0 -> 2
/// ```
///
/// An optional `digraph name {` ... `}` wrapper is accepted. Nodes must be
/// dense integers; every node needs a `wcet` attribute.
pub fn parse_edge_list(text: &str) -> Result<RawTask> {
    let mut deadline = None;
    let mut period = None;
    let mut wcet: Vec<Option<Ticks>> = Vec::new();
    let mut edges = Vec::new();
    let perr = |line: usize, msg: &str| Error::Parse(format!("line {}: {msg}", line + 1));

    for (ln, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() || line == "}" || line.starts_with("digraph") {
            continue;
        }
        for stmt in line.split(';').map(str::trim).filter(|s| !s.is_empty()) {
            if let Some((key, value)) = stmt.split_once('=').filter(|(k, _)| !k.contains('[')) {
                let v: Ticks = value
                    .trim()
                    .parse()
                    .map_err(|_| perr(ln, "expected a non-negative integer"))?;
                match key.trim() {
                    "deadline" => deadline = Some(v),
                    "period" => period = Some(v),
                    other => return Err(perr(ln, &format!("unknown key `{other}`"))),
                }
            } else if let Some((a, b)) = stmt.split_once("->") {
                let a: usize = a.trim().parse().map_err(|_| perr(ln, "bad edge source"))?;
                let b: usize = b.trim().parse().map_err(|_| perr(ln, "bad edge target"))?;
                edges.push((a, b));
            } else if let Some((node, attrs)) = stmt.split_once('[') {
                let node: usize = node.trim().parse().map_err(|_| perr(ln, "bad node id"))?;
                let attrs = attrs.trim_end().trim_end_matches(']');
                let mut c = None;
                for attr in attrs.split(',') {
                    if let Some((k, v)) = attr.split_once('=') {
                        if k.trim() == "wcet" {
                            c = Some(
                                v.trim()
                                    .trim_matches('"')
                                    .parse::<Ticks>()
                                    .map_err(|_| perr(ln, "bad wcet"))?,
                            );
                        }
                    }
                }
                let c = c.ok_or_else(|| perr(ln, "node without wcet"))?;
                if wcet.len() <= node {
                    wcet.resize(node + 1, None);
                }
                wcet[node] = Some(c);
            } else {
                return Err(perr(ln, &format!("cannot parse `{stmt}`")));
            }
        }
    }
    let deadline = deadline.ok_or_else(|| Error::Parse("missing deadline".into()))?;
    let wcet = wcet
        .into_iter()
        .enumerate()
        .map(|(i, c)| c.ok_or_else(|| Error::Parse(format!("node {i} has no wcet"))))
        .collect::<Result<Vec<_>>>()?;
    Ok(RawTask {
        n: wcet.len(),
        deadline,
        period,
        wcet,
        edges,
    })
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

    #[test]
    fn single_source_sink_is_unchanged() {
        let t = seven_node();
        assert_eq!(t.n(), 7);
        assert_eq!(t.edges().len(), 9);
        assert_eq!((t.source(), t.sink()), (0, 6));
        assert_eq!(t.period(), 8);
    }

    #[test]
    fn single_node_task() {
        let t = DagTask::new(&[3], &[], 5).unwrap();
        assert_eq!((t.n(), t.source(), t.sink()), (1, 0, 0));
    }

    #[test]
    fn parallel_chains_get_dummy_endpoints() {
        let t = DagTask::new(&[1, 2, 3, 4], &[(0, 1), (2, 3)], 10).unwrap();
        assert_eq!(t.n(), 6);
        assert_eq!(t.wcet()[4], 0);
        assert_eq!(t.wcet()[5], 0);
        assert_eq!(t.source(), 4);
        assert_eq!(t.sink(), 5);
        assert!(t.edges().contains(&(4, 0)) && t.edges().contains(&(4, 2)));
        assert!(t.edges().contains(&(1, 5)) && t.edges().contains(&(3, 5)));
    }

    #[test]
    fn rejects_cycles_and_bad_deadlines() {
        assert!(matches!(
            DagTask::new(&[1, 1, 1], &[(0, 1), (1, 2), (2, 1)], 5),
            Err(Error::CyclicGraph(1 | 2))
        ));
        assert!(matches!(DagTask::new(&[1], &[(0, 0)], 5), Err(Error::CyclicGraph(0))));
        assert!(matches!(
            DagTask::new(&[1], &[], 0),
            Err(Error::InvalidDeadline { .. })
        ));
        let raw = RawTask {
            n: 1,
            deadline: 6,
            period: Some(5),
            wcet: vec![1],
            edges: vec![],
        };
        assert!(matches!(DagTask::from_raw(raw), Err(Error::InvalidDeadline { .. })));
        assert!(matches!(DagTask::new(&[], &[], 5), Err(Error::EmptyGraph)));
    }

    #[test]
    fn with_edge_rejects_back_edges() {
        let t = seven_node();
        assert!(matches!(t.with_edge(6, 2), Err(Error::CyclicGraph(_))));
        let t2 = t.with_edge(2, 3).unwrap();
        assert!(t2.edges().contains(&(2, 3)));
        assert_eq!(t2.edges().len(), 10);
    }

    #[test]
    fn json_roundtrip_is_canonical() {
        let t = seven_node();
        let json = t.to_json();
        assert!(json.starts_with("{\"n\":7,\"deadline\":8,\"period\":8,\"wcet\":[0,5,4,3,3,1,0],\"edges\":[[0,1],"));
        let back = DagTask::from_json(&json).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.to_json(), json);
    }

    #[test]
    fn edge_list_format() {
        let text = "digraph t {\n  deadline = 8\n  # nodes\n  0 [wcet=0]; 1 [wcet=5]\n  2 [wcet=1]\n  0 -> 1; 0 -> 2\n}\n";
        let t = DagTask::parse(text).unwrap();
        assert_eq!(t.n(), 4);
        assert_eq!(t.wcet(), &[0, 5, 1, 0]);
        assert_eq!(t.sink(), 3);
        assert!(DagTask::parse("deadline = 4\n0 [wcet=1]\n2 [wcet=1]\n").is_err());
        assert!(DagTask::parse("0 [wcet=1]\n").is_err());
    }
}
