//! Maximum-cardinality bipartite matching (Hopcroft-Karp).

use std::collections::VecDeque;

use crate::bitmatrix::BoolMatrix;

const UNREACHED: u32 = u32::MAX;

/// A bipartite matching stored from both sides.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Matching {
    /// `left[x] == Some(y)` iff left vertex `x` is matched to right vertex `y`.
    pub left: Vec<Option<usize>>,
    /// Inverse of `left`.
    pub right: Vec<Option<usize>>,
}

impl Matching {
    pub fn empty(n_left: usize, n_right: usize) -> Self {
        Matching {
            left: vec![None; n_left],
            right: vec![None; n_right],
        }
    }

    pub fn size(&self) -> usize {
        self.left.iter().filter(|m| m.is_some()).count()
    }

    /// Matches `x` to `y` if both are free. Returns whether the pair was added.
    pub fn try_pair(&mut self, x: usize, y: usize) -> bool {
        if self.left[x].is_none() && self.right[y].is_none() {
            self.left[x] = Some(y);
            self.right[y] = Some(x);
            true
        } else {
            false
        }
    }
}

/// Grows `init` into a maximum matching of the bipartite graph whose left
/// vertex `x` is adjacent to the right vertices `adj[x]`. Every pair in
/// `init` must be an edge of the graph.
///
/// O(sqrt(V) E) phases-times-work; with a warm start only the missing
/// augmentations are paid for.
pub fn hopcroft_karp(adj: &[Vec<usize>], init: Matching) -> Matching {
    let mut m = init;
    debug_assert_eq!(m.left.len(), adj.len());
    let mut dist = vec![UNREACHED; adj.len()];
    let mut used = vec![false; adj.len()];
    loop {
        bfs(adj, &m, &mut dist);
        used.iter_mut().for_each(|u| *u = false);
        let mut augmented = false;
        for x in 0..adj.len() {
            if m.left[x].is_none() && augment(x, adj, &dist, &mut used, &mut m) {
                augmented = true;
            }
        }
        if !augmented {
            return m;
        }
    }
}

fn bfs(adj: &[Vec<usize>], m: &Matching, dist: &mut [u32]) {
    let mut queue = VecDeque::new();
    for x in 0..adj.len() {
        if m.left[x].is_none() {
            dist[x] = 0;
            queue.push_back(x);
        } else {
            dist[x] = UNREACHED;
        }
    }
    while let Some(x) = queue.pop_front() {
        for &y in &adj[x] {
            if let Some(z) = m.right[y] {
                if dist[z] == UNREACHED {
                    dist[z] = dist[x] + 1;
                    queue.push_back(z);
                }
            }
        }
    }
}

fn augment(x: usize, adj: &[Vec<usize>], dist: &[u32], used: &mut [bool], m: &mut Matching) -> bool {
    used[x] = true;
    for &y in &adj[x] {
        let found = match m.right[y] {
            None => true,
            Some(z) => !used[z] && dist[z] == dist[x] + 1 && augment(z, adj, dist, used, m),
        };
        if found {
            m.left[x] = Some(y);
            m.right[y] = Some(x);
            return true;
        }
    }
    false
}

/// Bitset of the given vertices over `n` slots, 64 per word.
pub fn vertex_set(n: usize, vertices: impl IntoIterator<Item = usize>) -> Vec<u64> {
    let mut set = vec![0u64; n.div_ceil(64)];
    for v in vertices {
        set[v / 64] |= 1 << (v % 64);
    }
    set
}

fn set_members(set: &[u64]) -> impl Iterator<Item = usize> + '_ {
    set.iter().enumerate().flat_map(|(w, &word)| {
        let mut bits = word;
        std::iter::from_fn(move || {
            (bits != 0).then(|| {
                let b = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                w * 64 + b
            })
        })
    })
}

/// The pairs of `m` with both ends in `keep`.
pub fn restrict(m: &Matching, keep: &[u64]) -> Matching {
    let mut out = Matching::empty(m.left.len(), m.right.len());
    for x in set_members(keep) {
        if let Some(y) = m.left[x] {
            if keep[y / 64] >> (y % 64) & 1 == 1 {
                out.left[x] = Some(y);
                out.right[y] = Some(x);
            }
        }
    }
    out
}

/// Grows `m` into a maximum matching of the bipartite graph with an edge
/// `x -> y` for every set `adj[x][y]`, both ends restricted to `keep`. Every
/// pair in `m` must be such an edge. One breadth-first search over bitset
/// rows per augmentation, so a warm start that is nearly maximum is cheap.
pub fn grow_dense(adj: &BoolMatrix, keep: &[u64], m: &mut Matching) {
    let n = adj.dim();
    let words = keep.len();
    let mut visited = vec![0u64; words];
    let mut parent = vec![usize::MAX; n];
    let mut queue = Vec::with_capacity(n);
    loop {
        visited.fill(0);
        queue.clear();
        queue.extend(set_members(keep).filter(|&x| m.left[x].is_none()));
        let mut head = 0;
        let mut end = None;
        'bfs: while head < queue.len() {
            let x = queue[head];
            head += 1;
            let row = adj.row(x);
            for w in 0..words {
                let mut bits = row[w] & keep[w] & !visited[w];
                visited[w] |= bits;
                while bits != 0 {
                    let y = w * 64 + bits.trailing_zeros() as usize;
                    bits &= bits - 1;
                    parent[y] = x;
                    match m.right[y] {
                        None => {
                            end = Some(y);
                            break 'bfs;
                        }
                        Some(z) => queue.push(z),
                    }
                }
            }
        }
        let Some(mut y) = end else { return };
        loop {
            let x = parent[y];
            let prev = m.left[x];
            m.left[x] = Some(y);
            m.right[y] = Some(x);
            match prev {
                Some(p) => y = p,
                None => break,
            }
        }
    }
}
