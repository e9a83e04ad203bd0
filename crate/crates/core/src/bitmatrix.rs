//! Square Boolean matrices stored as rows of 64-bit words.

use std::fmt;

const WORD_BITS: usize = 64;

/// An `n x n` bit matrix, row-major. Row `i` occupies `words_per_row`
/// consecutive words; bit `j` of a row is bit `j % 64` of word `j / 64`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BoolMatrix {
    n: usize,
    words_per_row: usize,
    data: Vec<u64>,
}

impl BoolMatrix {
    pub fn zeros(n: usize) -> Self {
        let words_per_row = n.div_ceil(WORD_BITS);
        BoolMatrix {
            n,
            words_per_row,
            data: vec![0; n * words_per_row],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, true);
        }
        m
    }

    pub fn from_pairs<I: IntoIterator<Item = (usize, usize)>>(n: usize, pairs: I) -> Self {
        let mut m = Self::zeros(n);
        for (i, j) in pairs {
            m.set(i, j, true);
        }
        m
    }

    /// Builds a matrix from a predicate evaluated on every cell.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                if f(i, j) {
                    m.set(i, j, true);
                }
            }
        }
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        debug_assert!(i < self.n && j < self.n);
        (self.data[i * self.words_per_row + j / WORD_BITS] >> (j % WORD_BITS)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: bool) {
        debug_assert!(i < self.n && j < self.n);
        let w = &mut self.data[i * self.words_per_row + j / WORD_BITS];
        let mask = 1u64 << (j % WORD_BITS);
        if value {
            *w |= mask;
        } else {
            *w &= !mask;
        }
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[u64] {
        &self.data[i * self.words_per_row..(i + 1) * self.words_per_row]
    }

    /// `row[dst] |= row[src]`, word-parallel.
    pub fn or_row_into(&mut self, src: usize, dst: usize) {
        if src == dst {
            return;
        }
        let w = self.words_per_row;
        for k in 0..w {
            let v = self.data[src * w + k];
            self.data[dst * w + k] |= v;
        }
    }

    /// Column indices of the set bits in row `i`, ascending.
    pub fn row_ones(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        let n = self.n;
        self.row(i).iter().enumerate().flat_map(move |(wi, &word)| {
            let mut bits = word;
            std::iter::from_fn(move || {
                if bits == 0 {
                    return None;
                }
                let b = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(wi * WORD_BITS + b)
            })
            .filter(move |&j| j < n)
        })
    }

    /// All set cells in row-major order.
    pub fn ones(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |i| self.row_ones(i).map(move |j| (i, j)))
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn row_count(&self, i: usize) -> usize {
        self.row(i).iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn any(&self) -> bool {
        self.data.iter().any(|&w| w != 0)
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.n);
        for (i, j) in self.ones() {
            t.set(j, i, true);
        }
        t
    }

    /// Elementwise negation. Padding bits past column `n` stay clear.
    pub fn not(&self) -> Self {
        let mut m = self.clone();
        for w in m.data.iter_mut() {
            *w = !*w;
        }
        m.clear_padding();
        m
    }

    pub fn and(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a & b)
    }

    pub fn or(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a | b)
    }

    /// True when no cell is set in both matrices.
    pub fn is_disjoint(&self, other: &Self) -> bool {
        assert_eq!(self.n, other.n);
        self.data.iter().zip(&other.data).all(|(a, b)| a & b == 0)
    }

    /// True when every cell set in `self` is also set in `other`.
    pub fn is_subset(&self, other: &Self) -> bool {
        assert_eq!(self.n, other.n);
        self.data.iter().zip(&other.data).all(|(a, b)| a & !b == 0)
    }

    /// Boolean product: `[AB]_ij = OR_k (A_ik AND B_kj)`.
    pub fn bool_mul(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        let mut out = Self::zeros(self.n);
        for i in 0..self.n {
            for k in self.row_ones(i).collect::<Vec<_>>() {
                let w = self.words_per_row;
                for x in 0..w {
                    out.data[i * w + x] |= other.data[k * w + x];
                }
            }
        }
        out
    }

    /// Reachability closure by word-parallel Floyd-Warshall. The diagonal is
    /// left as computed, so an acyclic input yields a zero diagonal.
    pub fn transitive_closure(&self) -> Self {
        let mut r = self.clone();
        for k in 0..self.n {
            for i in 0..self.n {
                if r.get(i, k) {
                    r.or_row_into(k, i);
                }
            }
        }
        r
    }

    /// The submatrix restricted to the rows and columns in `keep`, renumbered
    /// in the order given.
    pub fn induced(&self, keep: &[usize]) -> Self {
        BoolMatrix::from_fn(keep.len(), |a, b| self.get(keep[a], keep[b]))
    }

    /// Rows as hex strings, most significant nibble first, column 0 being the
    /// high bit of the first digit. Each row has `ceil(n / 4)` digits.
    pub fn to_hex_rows(&self) -> Vec<String> {
        let digits = self.n.div_ceil(4);
        (0..self.n)
            .map(|i| {
                (0..digits)
                    .map(|d| {
                        let mut nib = 0u32;
                        for b in 0..4 {
                            let j = d * 4 + b;
                            if j < self.n && self.get(i, j) {
                                nib |= 8 >> b;
                            }
                        }
                        char::from_digit(nib, 16).unwrap()
                    })
                    .collect()
            })
            .collect()
    }

    pub fn from_hex_rows(n: usize, rows: &[&str]) -> Option<Self> {
        if rows.len() != n {
            return None;
        }
        let mut m = Self::zeros(n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n.div_ceil(4) {
                return None;
            }
            for (d, ch) in row.chars().enumerate() {
                let nib = ch.to_digit(16)?;
                for b in 0..4 {
                    let j = d * 4 + b;
                    if nib & (8 >> b) != 0 {
                        if j >= n {
                            return None;
                        }
                        m.set(i, j, true);
                    }
                }
            }
        }
        Some(m)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(u64, u64) -> u64) -> Self {
        assert_eq!(self.n, other.n);
        BoolMatrix {
            n: self.n,
            words_per_row: self.words_per_row,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    fn clear_padding(&mut self) {
        let rem = self.n % WORD_BITS;
        if rem == 0 {
            return;
        }
        let mask = (1u64 << rem) - 1;
        for i in 0..self.n {
            self.data[i * self.words_per_row + self.words_per_row - 1] &= mask;
        }
    }
}

/// One row per line, `0`/`1` per cell.
impl fmt::Display for BoolMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.n {
            for j in 0..self.n {
                f.write_str(if self.get(i, j) { "1" } else { "0" })?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

impl fmt::Debug for BoolMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "BoolMatrix({}x{})", self.n, self.n)?;
        fmt::Display::fmt(self, f)
    }
}

/// Max-plus style product of a Boolean matrix with a vector:
/// `out[i] = max { b[k] : a[i][k] }`, or `empty` when row `i` is all zero.
pub fn max_plus(a: &BoolMatrix, b: &[i64], empty: i64) -> Vec<i64> {
    assert_eq!(a.dim(), b.len());
    (0..a.dim())
        .map(|i| a.row_ones(i).map(|k| b[k]).max().unwrap_or(empty))
        .collect()
}

/// The dual of [`max_plus`]: `out[i] = min { b[k] : a[i][k] }`, or `empty`.
pub fn min_plus(a: &BoolMatrix, b: &[i64], empty: i64) -> Vec<i64> {
    assert_eq!(a.dim(), b.len());
    (0..a.dim())
        .map(|i| a.row_ones(i).map(|k| b[k]).min().unwrap_or(empty))
        .collect()
}
