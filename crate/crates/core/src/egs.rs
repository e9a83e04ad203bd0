//! The edge generation loop: insert eligible edges chosen by a policy until
//! the mask is empty or the width meets the workload lower bound.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::analysis::{closure_with_edge, GraphAnalysis, Timing};
use crate::error::{Error, Result};
use crate::mask::EdgeMask;
use crate::matching::{grow_dense, vertex_set};
use crate::task::{DagTask, Ticks};

/// Returned by [`lower_bound_subset`] when a subset carries work but has an
/// empty time window.
pub const UNBOUNDED: usize = usize::MAX;

/// `ceil(sum C / (max lft - min est))` over `nodes`: no schedule meeting the
/// deadline uses fewer processors.
pub fn lower_bound_subset(nodes: &[usize], timing: &Timing, wcet: &[Ticks]) -> Result<usize> {
    if nodes.is_empty() {
        return Err(Error::EmptySubset);
    }
    let work: u64 = nodes.iter().map(|&i| wcet[i]).sum();
    let hi = nodes.iter().map(|&i| timing.lft[i]).max().unwrap();
    let lo = nodes.iter().map(|&i| timing.est[i]).min().unwrap();
    let window = hi - lo;
    Ok(if work == 0 {
        0
    } else if window <= 0 {
        UNBOUNDED
    } else {
        work.div_ceil(window as u64) as usize
    })
}

/// Maximum of the subset bound over all nodes and over the nodes of maximum
/// lateral width, floored at 1.
pub fn lower_bound(task: &DagTask, analysis: &GraphAnalysis) -> usize {
    let all: Vec<usize> = (0..task.n()).collect();
    let target = analysis.width.saturating_sub(1);
    let critical: Vec<usize> = all
        .iter()
        .copied()
        .filter(|&i| analysis.lw()[i] == target)
        .collect();
    let mut lb = lower_bound_subset(&all, &analysis.timing, task.wcet()).unwrap_or(0);
    if let Ok(b) = lower_bound_subset(&critical, &analysis.timing, task.wcet()) {
        lb = lb.max(b);
    }
    lb.max(1)
}

/// Per-step reward: the width reduction.
pub fn mdp_reward(prev_width: usize, new_width: usize) -> i64 {
    prev_width as i64 - new_width as i64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum TerminatedBy {
    MaskEmpty,
    LowerBoundReached,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolicyDecision {
    pub edge: (usize, usize),
    pub confidence: f64,
}

impl PolicyDecision {
    pub fn certain(edge: (usize, usize)) -> Self {
        PolicyDecision {
            edge,
            confidence: 1.0,
        }
    }
}

/// One state of the search: the current supergraph and everything derived
/// from it.
#[derive(Clone, Debug)]
pub struct EgsState {
    pub task: DagTask,
    pub analysis: GraphAnalysis,
    pub mask: EdgeMask,
    pub lower_bound: usize,
    pub step: usize,
}

impl EgsState {
    pub fn new(task: DagTask) -> Result<Self> {
        let analysis = GraphAnalysis::new(&task);
        if analysis.length > task.deadline() {
            return Err(Error::InfeasibleDeadline {
                length: analysis.length,
                deadline: task.deadline(),
            });
        }
        let mask = EdgeMask::new(&analysis);
        let lower_bound = lower_bound(&task, &analysis);
        Ok(EgsState {
            task,
            analysis,
            mask,
            lower_bound,
            step: 0,
        })
    }

    pub fn width(&self) -> usize {
        self.analysis.width
    }

    /// An empty mask takes precedence when both stopping conditions hold.
    pub fn terminal(&self) -> Option<TerminatedBy> {
        if self.mask.is_empty() {
            Some(TerminatedBy::MaskEmpty)
        } else if self.lower_bound >= self.width() {
            Some(TerminatedBy::LowerBoundReached)
        } else {
            None
        }
    }

    /// Inserts an eligible edge and returns the reward.
    pub fn apply(&mut self, (i, j): (usize, usize)) -> Result<i64> {
        if !self.mask.allows(i, j) {
            return Err(Error::PolicyProtocol(format!("edge ({i}, {j}) is not eligible")));
        }
        let task = self.task.with_edge(i, j)?;
        let analysis = self.analysis.after_edge(&task, i, j);
        assert!(analysis.length <= task.deadline(), "length mask admitted an infeasible edge");
        let reward = mdp_reward(self.analysis.width, analysis.width);
        self.mask = EdgeMask::new(&analysis);
        self.lower_bound = lower_bound(&task, &analysis);
        self.task = task;
        self.analysis = analysis;
        self.step += 1;
        Ok(reward)
    }

    /// Width and length after inserting `(i, j)`, without committing it.
    /// The matching of the current closure stays valid in the larger one and
    /// seeds the new maximum matching.
    pub fn lookahead(&self, i: usize, j: usize) -> (usize, Ticks) {
        let n = self.task.n();
        let tc = closure_with_edge(&self.analysis.tc, i, j);
        let mut m = self.analysis.path_cover.matching.clone();
        grow_dense(&tc, &vertex_set(n, 0..n), &mut m);
        let through = self.analysis.eft()[i] + self.task.deadline() as i64 - self.analysis.lst()[j];
        let length = self.analysis.length.max(through.max(0) as Ticks);
        (n - m.size(), length)
    }
}

/// Chooses the next edge. Implementations must return an edge set in the
/// combined mask.
pub trait Policy {
    fn select(&mut self, state: &EgsState, rng: &mut ChaCha8Rng) -> Result<PolicyDecision>;

    /// Called once when the episode ends.
    fn finish(&mut self, _reward_total: i64) -> Result<()> {
        Ok(())
    }
}

/// Largest one-step width reduction, then smallest length increase, then
/// lexicographically smallest edge.
#[derive(Clone, Copy, Debug, Default)]
pub struct GreedyPolicy;

impl GreedyPolicy {
    /// Every eligible edge with its width reduction and length increase.
    pub fn scores(state: &EgsState) -> Vec<((usize, usize), usize, Ticks)> {
        state
            .mask
            .eligible()
            .into_iter()
            .map(|(i, j)| {
                let (w, l) = state.lookahead(i, j);
                ((i, j), state.width() - w, l - state.analysis.length)
            })
            .collect()
    }
}

impl Policy for GreedyPolicy {
    fn select(&mut self, state: &EgsState, _rng: &mut ChaCha8Rng) -> Result<PolicyDecision> {
        let best = Self::scores(state)
            .into_iter()
            .min_by_key(|&(edge, dw, dl)| (std::cmp::Reverse(dw), dl, edge))
            .ok_or_else(|| Error::PolicyProtocol("empty mask".into()))?;
        Ok(PolicyDecision::certain(best.0))
    }
}

/// Uniform over the eligible edges.
#[derive(Clone, Copy, Debug, Default)]
pub struct RandomPolicy;

impl Policy for RandomPolicy {
    fn select(&mut self, state: &EgsState, rng: &mut ChaCha8Rng) -> Result<PolicyDecision> {
        let eligible = state.mask.eligible();
        if eligible.is_empty() {
            return Err(Error::PolicyProtocol("empty mask".into()));
        }
        let k = rng.gen_range(0..eligible.len());
        Ok(PolicyDecision {
            edge: eligible[k],
            confidence: 1.0 / eligible.len() as f64,
        })
    }
}

/// Replays a fixed edge list.
#[derive(Clone, Debug)]
pub struct ScriptedPolicy {
    edges: std::vec::IntoIter<(usize, usize)>,
}

impl ScriptedPolicy {
    pub fn new(edges: Vec<(usize, usize)>) -> Self {
        ScriptedPolicy {
            edges: edges.into_iter(),
        }
    }
}

impl Policy for ScriptedPolicy {
    fn select(&mut self, _state: &EgsState, _rng: &mut ChaCha8Rng) -> Result<PolicyDecision> {
        self.edges
            .next()
            .map(PolicyDecision::certain)
            .ok_or_else(|| Error::PolicyProtocol("script exhausted".into()))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct EgsResult {
    #[serde(skip)]
    pub final_graph: DagTask,
    pub added_edges: Vec<(usize, usize)>,
    pub width_history: Vec<usize>,
    pub processors: usize,
    pub terminated_by: TerminatedBy,
    pub reward_total: i64,
    pub lower_bound: usize,
}

/// Runs the loop until a terminal state. `seed` drives any randomness in the
/// policy.
pub fn egs_run(task: &DagTask, policy: &mut dyn Policy, seed: u64) -> Result<EgsResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = EgsState::new(task.clone())?;
    let initial_lb = state.lower_bound;
    let mut added = Vec::new();
    let mut widths = vec![state.width()];
    let mut reward_total = 0;
    let max_steps = task.n() * task.n();
    let terminated_by = loop {
        if let Some(t) = state.terminal() {
            break t;
        }
        assert!(state.step < max_steps);
        let decision = policy.select(&state, &mut rng)?;
        reward_total += state.apply(decision.edge)?;
        added.push(decision.edge);
        widths.push(state.width());
    };
    debug_assert_eq!(reward_total, mdp_reward(widths[0], state.width()));
    policy.finish(reward_total)?;
    Ok(EgsResult {
        processors: state.width(),
        final_graph: state.task,
        added_edges: added,
        width_history: widths,
        terminated_by,
        reward_total,
        lower_bound: initial_lb,
    })
}
