//! Bit-packed linear algebra over GF(2).
//!
//! Matrices are stored row-major, 64 columns per `u64` word, bit `j % 64` of
//! word `j / 64` holding column `j`. Rank computations insert vectors into an
//! [`EchelonBasis`] keyed by the lowest set bit, which is also the building
//! block for the incremental decodability checks used by the Monte-Carlo
//! estimators and the straggler simulator.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub(crate) const WORD_BITS: usize = 64;

#[inline]
pub(crate) fn words_for(bits: usize) -> usize {
    bits.div_ceil(WORD_BITS)
}

#[inline]
pub(crate) fn get_bit(words: &[u64], j: usize) -> bool {
    (words[j / WORD_BITS] >> (j % WORD_BITS)) & 1 == 1
}

#[inline]
pub(crate) fn set_bit(words: &mut [u64], j: usize) {
    words[j / WORD_BITS] |= 1u64 << (j % WORD_BITS);
}

#[inline]
pub(crate) fn xor_into(dst: &mut [u64], src: &[u64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d ^= *s;
    }
}

/// Index of the lowest set bit at or after word `from_word`, if any.
#[inline]
fn lowest_set_bit(words: &[u64], from_word: usize) -> Option<usize> {
    words[from_word..]
        .iter()
        .position(|&w| w != 0)
        .map(|off| {
            let w = from_word + off;
            w * WORD_BITS + words[w].trailing_zeros() as usize
        })
}

/// A dense binary matrix with bit-packed rows.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Gf2Matrix {
    rows: usize,
    cols: usize,
    stride: usize,
    data: Vec<u64>,
}

impl Gf2Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::input(format!(
                "matrix dimensions must be positive, got {rows}x{cols}"
            )));
        }
        let stride = words_for(cols);
        Ok(Self {
            rows,
            cols,
            stride,
            data: vec![0; rows * stride],
        })
    }

    pub fn identity(n: usize) -> Result<Self> {
        let mut m = Self::zeros(n, n)?;
        for i in 0..n {
            m.set(i, i, true);
        }
        Ok(m)
    }

    /// Builds a matrix from rows of 0/1 values. All rows must have equal length.
    pub fn from_rows<R: AsRef<[u8]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut m = Self::zeros(rows.len(), cols)?;
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::input(format!(
                    "row {i} has {} entries, expected {cols}",
                    r.len()
                )));
            }
            for (j, &b) in r.iter().enumerate() {
                match b {
                    0 => {}
                    1 => m.set(i, j, true),
                    other => {
                        return Err(Error::input(format!(
                            "entry ({i},{j}) is {other}, expected 0 or 1"
                        )))
                    }
                }
            }
        }
        Ok(m)
    }

    /// Builds a matrix from packed row words (each `words_for(cols)` long).
    pub(crate) fn from_packed_rows(rows: &[Vec<u64>], cols: usize) -> Result<Self> {
        let mut m = Self::zeros(rows.len(), cols)?;
        let stride = m.stride;
        for (i, r) in rows.iter().enumerate() {
            m.row_mut(i).copy_from_slice(&r[..stride]);
        }
        m.mask_tail();
        Ok(m)
    }

    fn mask_tail(&mut self) {
        let rem = self.cols % WORD_BITS;
        if rem != 0 {
            let mask = (1u64 << rem) - 1;
            for i in 0..self.rows {
                let last = i * self.stride + self.stride - 1;
                self.data[last] &= mask;
            }
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        assert!(i < self.rows && j < self.cols, "index ({i},{j}) out of range");
        get_bit(self.row(i), j)
    }

    pub fn set(&mut self, i: usize, j: usize, value: bool) {
        assert!(i < self.rows && j < self.cols, "index ({i},{j}) out of range");
        let w = &mut self.row_mut(i)[j / WORD_BITS];
        let bit = 1u64 << (j % WORD_BITS);
        if value {
            *w |= bit;
        } else {
            *w &= !bit;
        }
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[u64] {
        &self.data[i * self.stride..(i + 1) * self.stride]
    }

    #[inline]
    fn row_mut(&mut self, i: usize) -> &mut [u64] {
        &mut self.data[i * self.stride..(i + 1) * self.stride]
    }

    pub fn row_weight(&self, i: usize) -> usize {
        self.row(i).iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Column `j` packed as a vector of length `rows`.
    pub fn column(&self, j: usize) -> Vec<u64> {
        let mut v = vec![0u64; words_for(self.rows)];
        for i in 0..self.rows {
            if self.get(i, j) {
                set_bit(&mut v, i);
            }
        }
        v
    }

    /// All columns packed as vectors of length `rows`.
    pub fn columns(&self) -> Vec<Vec<u64>> {
        let mut out = vec![vec![0u64; words_for(self.rows)]; self.cols];
        for i in 0..self.rows {
            let row = self.row(i);
            for (j, col) in out.iter_mut().enumerate() {
                if get_bit(row, j) {
                    set_bit(col, i);
                }
            }
        }
        out
    }

    /// Row rank over GF(2). The input is left untouched.
    pub fn rank(&self) -> usize {
        let mut basis = EchelonBasis::new(self.cols);
        let mut scratch = vec![0u64; self.stride];
        for i in 0..self.rows {
            scratch.copy_from_slice(self.row(i));
            basis.insert(&mut scratch);
            if basis.rank() == self.rows.min(self.cols) {
                break;
            }
        }
        basis.rank()
    }

    /// Rank of the submatrix formed by the `kept` columns.
    pub fn column_submatrix_rank(&self, kept: &[usize]) -> Result<usize> {
        self.check_columns(kept)?;
        let mut basis = EchelonBasis::new(self.rows);
        for &j in kept {
            let mut col = self.column(j);
            basis.insert(&mut col);
            if basis.rank() == self.rows {
                break;
            }
        }
        Ok(basis.rank())
    }

    pub(crate) fn check_columns(&self, kept: &[usize]) -> Result<()> {
        match kept.iter().find(|&&j| j >= self.cols) {
            Some(j) => Err(Error::input(format!(
                "column index {j} out of range for {} columns",
                self.cols
            ))),
            None => Ok(()),
        }
    }

    /// Recovers real-valued inputs `x` (one vector per row) from the sums
    /// observed at the `kept` columns, where column `j` observes
    /// `sum_{i : m[i][j] = 1} x_i`.
    ///
    /// Gaussian elimination over the reals with partial pivoting.
    pub fn solve_real_system(&self, kept: &[usize], observed: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        self.check_columns(kept)?;
        if observed.len() != kept.len() {
            return Err(Error::input(format!(
                "{} observations for {} kept columns",
                observed.len(),
                kept.len()
            )));
        }
        let len = observed.first().map_or(0, Vec::len);
        if observed.iter().any(|v| v.len() != len) {
            return Err(Error::input("observed vectors differ in length"));
        }
        let rank = self.column_submatrix_rank(kept)?;
        let k = self.rows;
        if rank < k {
            return Err(Error::NotDecodable { rank, needed: k });
        }

        // One equation per kept column: coefficients a[r][i] = m[i][kept[r]].
        let mut a: Vec<Vec<f64>> = kept
            .iter()
            .map(|&j| (0..k).map(|i| if self.get(i, j) { 1.0 } else { 0.0 }).collect())
            .collect();
        let mut b: Vec<Vec<f64>> = observed.to_vec();
        let eqs = a.len();

        for col in 0..k {
            let (piv, piv_abs) = (col..eqs)
                .map(|r| (r, a[r][col].abs()))
                .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if piv_abs <= f64::EPSILON {
                return Err(Error::NotDecodable { rank: col, needed: k });
            }
            a.swap(col, piv);
            b.swap(col, piv);
            let (head, tail) = a.split_at_mut(col + 1);
            let (bhead, btail) = b.split_at_mut(col + 1);
            let prow = &head[col];
            let pb = &bhead[col];
            for (row, rhs) in tail.iter_mut().zip(btail.iter_mut()) {
                let f = row[col] / prow[col];
                if f == 0.0 {
                    continue;
                }
                for c in col..k {
                    row[c] -= f * prow[c];
                }
                for (y, p) in rhs.iter_mut().zip(pb) {
                    *y -= f * p;
                }
            }
        }

        let mut x = vec![vec![0.0; len]; k];
        for i in (0..k).rev() {
            let mut acc = b[i].clone();
            for c in i + 1..k {
                let coeff = a[i][c];
                if coeff != 0.0 {
                    for (v, xv) in acc.iter_mut().zip(&x[c]) {
                        *v -= coeff * xv;
                    }
                }
            }
            let d = a[i][i];
            x[i] = acc.into_iter().map(|v| v / d).collect();
        }
        Ok(x)
    }

    /// Real-valued encoding: column `j` receives the sum of the tasks whose
    /// row has a one in column `j`.
    pub fn encode_real(&self, tasks: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        if tasks.len() != self.rows {
            return Err(Error::input(format!(
                "{} tasks for a code with k = {}",
                tasks.len(),
                self.rows
            )));
        }
        let len = tasks.first().map_or(0, Vec::len);
        if tasks.iter().any(|t| t.len() != len) {
            return Err(Error::input("task vectors differ in length"));
        }
        Ok((0..self.cols)
            .map(|j| {
                let mut acc = vec![0.0; len];
                for (i, t) in tasks.iter().enumerate() {
                    if self.get(i, j) {
                        for (a, v) in acc.iter_mut().zip(t) {
                            *a += v;
                        }
                    }
                }
                acc
            })
            .collect())
    }

    /// Writes the textual form: `"k n"` then one line of `0`/`1` per row.
    pub fn to_text(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Gf2Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} {}", self.rows, self.cols)?;
        for i in 0..self.rows {
            let line: String = (0..self.cols)
                .map(|j| if self.get(i, j) { '1' } else { '0' })
                .collect();
            writeln!(f, "{line}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Gf2Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Gf2Matrix {}x{}:\n{}", self.rows, self.cols, self)
    }
}

impl FromStr for Gf2Matrix {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut lines = s.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::input("empty generator file"))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::input(format!("bad header {header:?}: {e}")))?;
        let [k, n] = dims[..] else {
            return Err(Error::input(format!("header must be \"k n\", got {header:?}")));
        };
        let rows: Vec<Vec<u8>> = lines
            .map(|l| {
                l.trim()
                    .bytes()
                    .map(|c| match c {
                        b'0' => Ok(0),
                        b'1' => Ok(1),
                        _ => Err(Error::input(format!("unexpected character {:?}", c as char))),
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        if rows.len() != k {
            return Err(Error::input(format!("header says {k} rows, found {}", rows.len())));
        }
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::input(format!("every row must have {n} entries")));
        }
        Self::from_rows(&rows)
    }
}

/// Incremental row-echelon basis of a subspace of GF(2)^len.
///
/// Each stored vector has a distinct pivot at its lowest set bit. Inserting a
/// vector reduces it against the stored pivots; a vector that does not reduce
/// to zero becomes a new basis element.
#[derive(Clone, Debug)]
pub struct EchelonBasis {
    len: usize,
    stride: usize,
    vectors: Vec<u64>,
    pivot_slot: Vec<u32>,
    rank: usize,
    first_gap: usize,
    max_pivot: Option<usize>,
}

const NO_PIVOT: u32 = u32::MAX;

impl EchelonBasis {
    pub fn new(len: usize) -> Self {
        let stride = words_for(len).max(1);
        Self {
            len,
            stride,
            vectors: Vec::with_capacity(stride * len.min(1024)),
            pivot_slot: vec![NO_PIVOT; len],
            rank: 0,
            first_gap: 0,
            max_pivot: None,
        }
    }

    #[inline]
    pub fn rank(&self) -> usize {
        self.rank
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.rank == 0
    }

    /// Smallest coordinate that is not a pivot. The projection of the span
    /// onto the first `c` coordinates is onto exactly when `c <= first_gap()`.
    #[inline]
    pub fn first_gap(&self) -> usize {
        self.first_gap
    }

    /// Largest pivot coordinate. Every nonzero vector in the span has its
    /// lowest set bit at or below this coordinate, and the basis vector owning
    /// it attains it.
    #[inline]
    pub fn max_pivot(&self) -> Option<usize> {
        self.max_pivot
    }

    pub fn clear(&mut self) {
        self.vectors.clear();
        self.pivot_slot.fill(NO_PIVOT);
        self.rank = 0;
        self.first_gap = 0;
        self.max_pivot = None;
    }

    /// Reduces `v` in place; returns true when it was independent and has
    /// been added. `v` must be `words_for(len)` words long.
    pub fn insert(&mut self, v: &mut [u64]) -> bool {
        debug_assert_eq!(v.len(), self.stride);
        let mut word = 0;
        while let Some(p) = lowest_set_bit(v, word) {
            let slot = self.pivot_slot[p];
            if slot == NO_PIVOT {
                self.pivot_slot[p] = self.rank as u32;
                self.vectors.extend_from_slice(v);
                self.rank += 1;
                self.max_pivot = Some(self.max_pivot.map_or(p, |m| m.max(p)));
                while self.first_gap < self.len && self.pivot_slot[self.first_gap] != NO_PIVOT {
                    self.first_gap += 1;
                }
                return true;
            }
            let start = slot as usize * self.stride;
            xor_into(v, &self.vectors[start..start + self.stride]);
            word = p / WORD_BITS;
        }
        false
    }
}
