//! Eligibility masks for edge insertion.

use std::fmt::Write as _;

use crate::analysis::GraphAnalysis;
use crate::bitmatrix::BoolMatrix;

/// The four per-condition masks and their conjunction. `combined[i][j]` is
/// set iff inserting `i -> j` is neither redundant nor cyclic, keeps the
/// length within the deadline, and joins two nodes of maximum lateral width.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeMask {
    pub m_r: BoolMatrix,
    pub m_c: BoolMatrix,
    pub m_l: BoolMatrix,
    pub m_w: BoolMatrix,
    pub combined: BoolMatrix,
}

/// Excludes edges already implied by reachability.
pub fn redundancy_mask(tc: &BoolMatrix) -> BoolMatrix {
    tc.not()
}

/// Excludes self-loops and edges pointing back to an ancestor.
pub fn cycle_mask(tc: &BoolMatrix) -> BoolMatrix {
    tc.transpose().or(&BoolMatrix::identity(tc.dim())).not()
}

/// `eft[i] <= lst[j]`: the longest path through the new edge still fits.
pub fn length_mask(eft: &[i64], lst: &[i64]) -> BoolMatrix {
    BoolMatrix::from_fn(eft.len(), |i, j| eft[i] <= lst[j])
}

/// Both endpoints have lateral width `width - 1`.
pub fn width_mask(lw: &[usize], width: usize) -> BoolMatrix {
    let target = width.checked_sub(1);
    BoolMatrix::from_fn(lw.len(), |i, j| {
        Some(lw[i]) == target && Some(lw[j]) == target
    })
}

impl EdgeMask {
    pub fn new(analysis: &GraphAnalysis) -> Self {
        let m_r = redundancy_mask(&analysis.tc);
        let m_c = cycle_mask(&analysis.tc);
        let m_l = length_mask(analysis.eft(), analysis.lst());
        let m_w = width_mask(analysis.lw(), analysis.width);
        let combined = m_r.and(&m_c).and(&m_l).and(&m_w);
        debug_assert!(combined.is_disjoint(&analysis.tc));
        debug_assert!(combined.is_disjoint(&BoolMatrix::identity(combined.dim())));
        EdgeMask {
            m_r,
            m_c,
            m_l,
            m_w,
            combined,
        }
    }

    pub fn is_empty(&self) -> bool {
        !self.combined.any()
    }

    pub fn allows(&self, i: usize, j: usize) -> bool {
        i < self.combined.dim() && j < self.combined.dim() && self.combined.get(i, j)
    }

    /// Eligible edges in row-major order.
    pub fn eligible(&self) -> Vec<(usize, usize)> {
        self.combined.ones().collect()
    }

    /// All five grids as labelled 0/1 text.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (name, m) in [
            ("redundancy", &self.m_r),
            ("cycle", &self.m_c),
            ("length", &self.m_l),
            ("width", &self.m_w),
            ("combined", &self.combined),
        ] {
            let _ = writeln!(out, "# {name}");
            out.push_str(&m.to_string());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::task::DagTask;

    fn seven_node() -> DagTask {
        DagTask::new(
            &[0, 5, 4, 3, 3, 1, 0],
            &[(0, 1), (0, 2), (0, 3), (1, 4), (1, 5), (2, 5), (3, 5), (4, 6), (5, 6)],
            8,
        )
        .unwrap()
    }

    #[test]
    fn individual_masks_on_seven_node_example() {
        let a = GraphAnalysis::new(&seven_node());
        let m = EdgeMask::new(&a);
        assert!(!m.m_r.get(0, 5));
        assert_eq!(m.m_r.count_ones(), 49 - 15);
        assert!(!m.m_c.get(6, 2));
        assert!((0..7).all(|i| !m.m_c.get(i, i)));
        assert!(!m.m_l.get(1, 2));
        assert!(m.m_l.get(3, 2));
        assert!(!m.m_w.get(4, 5));
        let allowed: Vec<_> = m.m_w.ones().collect();
        let expected: Vec<_> = [1, 2, 3, 4]
            .iter()
            .flat_map(|&i| [1, 2, 3, 4].map(move |j| (i, j)))
            .collect();
        assert_eq!(allowed, expected);
    }

    #[test]
    fn combined_on_seven_node_example() {
        let m = EdgeMask::new(&GraphAnalysis::new(&seven_node()));
        assert_eq!(m.eligible(), vec![(2, 3), (2, 4), (3, 2), (3, 4)]);
        assert!(m.allows(3, 2));
        assert!(!m.allows(1, 2));
    }

    #[test]
    fn width_mask_alone_admits_comparable_pairs() {
        // a and b share the lateral node c, so both have lw = W - 1 = 1 while
        // a reaches b; only the redundancy and cycle masks reject the pair.
        let t = DagTask::new(&[0, 1, 1, 1, 0], &[(0, 1), (1, 2), (2, 4), (0, 3), (3, 4)], 10)
            .unwrap();
        let a = GraphAnalysis::new(&t);
        let m = EdgeMask::new(&a);
        assert!(m.m_w.get(1, 2) && m.m_l.get(1, 2));
        assert!(!m.combined.get(1, 2));
        assert_ne!(m.combined, m.m_l.and(&m.m_w));
    }

    #[test]
    fn edgeless_redundancy_mask_is_full() {
        assert_eq!(redundancy_mask(&BoolMatrix::zeros(4)).count_ones(), 16);
    }

    #[test]
    fn width_reducing_edge_between_nodes_below_max_lw() {
        let t = DagTask::new(
            &[1; 8],
            &[(0, 1), (0, 2), (0, 3), (1, 4), (2, 4), (3, 5), (3, 6), (4, 7), (5, 7), (6, 7)],
            10,
        )
        .unwrap();
        let a = GraphAnalysis::new(&t);
        assert_eq!(a.width, 4);
        assert_eq!((a.lw()[4], a.lw()[3]), (2, 2));
        let m = EdgeMask::new(&a);
        assert!(!m.allows(4, 3));
        let after = GraphAnalysis::new(&t.with_edge(4, 3).unwrap());
        assert_eq!(after.width, 2);
        assert!(after.tc.get(1, 5) && after.tc.get(2, 6));
    }

    #[test]
    fn chain_has_empty_mask() {
        let t = DagTask::new(&[1, 1, 1], &[(0, 1), (1, 2)], 10).unwrap();
        let a = GraphAnalysis::new(&t);
        let m = EdgeMask::new(&a);
        assert_eq!(m.m_w.count_ones(), 9);
        assert!(m.is_empty());
    }

    #[test]
    fn zero_wcet_with_slack_passes_length_mask() {
        let m = length_mask(&[0, 0], &[5, 5]);
        assert_eq!(m.count_ones(), 4);
    }

    #[test]
    fn dump_lists_every_grid() {
        let m = EdgeMask::new(&GraphAnalysis::new(&seven_node()));
        let d = m.dump();
        assert!(d.starts_with("# redundancy\n"));
        assert_eq!(d.lines().count(), 5 * 8);
    }
}
