//! Exact rational linear algebra.
//!
//! Ranks are computed by fraction-free (Bareiss) elimination over the
//! integers after clearing row denominators, so no intermediate result is
//! ever rounded. Column ranges of the blocks follow the canonical basis
//! order: block `i` owns columns `offset(i) .. offset(i) + m_i`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Exact scalar: always in lowest terms with a positive denominator.
pub type Rational = BigRational;

pub fn rat(numer: i64, denom: i64) -> Rational {
    Rational::new(BigInt::from(numer), BigInt::from(denom))
}

pub fn int(value: i64) -> Rational {
    Rational::from_integer(BigInt::from(value))
}

/// Parses `"p/q"` or `"p"`.
pub fn parse_rational(text: &str) -> Result<Rational> {
    let t = text.trim();
    let parsed = match t.split_once('/') {
        Some((p, q)) => {
            let p = BigInt::from_str(p.trim()).ok();
            let q = BigInt::from_str(q.trim()).ok();
            match (p, q) {
                (Some(p), Some(q)) if !q.is_zero() => Some(Rational::new(p, q)),
                _ => None,
            }
        }
        None => BigInt::from_str(t).ok().map(Rational::from_integer),
    };
    parsed.ok_or_else(|| Error::Malformed(format!("not a rational: {text:?}")))
}

/// `"p/q"`, or `"p"` for integers.
pub fn format_rational(r: &Rational) -> String {
    if r.is_integer() {
        format!("{}", r.numer())
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Dense row-major rational matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RationalMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<Rational>,
}

impl RationalMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        RationalMatrix { rows, cols, entries: vec![Rational::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.entries[i * n + i] = Rational::one();
        }
        m
    }

    pub fn from_entries(rows: usize, cols: usize, entries: Vec<Rational>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::ShapeMismatch { expected: rows * cols, got: entries.len() });
        }
        Ok(RationalMatrix { rows, cols, entries })
    }

    /// Builds from a list of rows; `cols` must be given for the 0-row case.
    pub fn from_rows(rows: Vec<Vec<Rational>>, cols: usize) -> Result<Self> {
        let n_rows = rows.len();
        let mut entries = Vec::with_capacity(n_rows * cols);
        for row in rows {
            if row.len() != cols {
                return Err(Error::ShapeMismatch { expected: cols, got: row.len() });
            }
            entries.extend(row);
        }
        Ok(RationalMatrix { rows: n_rows, cols, entries })
    }

    pub fn from_i64_rows(rows: &[&[i64]]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        let rows = rows.iter().map(|r| r.iter().map(|&v| int(v)).collect()).collect();
        Self::from_rows(rows, cols).expect("ragged integer rows")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> &Rational {
        &self.entries[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, value: Rational) {
        self.entries[r * self.cols + c] = value;
    }

    pub fn row(&self, r: usize) -> &[Rational] {
        &self.entries[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<Rational> {
        (0..self.rows).map(|r| self.get(r, c).clone()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.set(c, r, self.get(r, c).clone());
            }
        }
        t
    }

    /// Columns `indices`, in the order given.
    pub fn select_columns(&self, indices: &[usize]) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&c| c >= self.cols) {
            return Err(Error::Malformed(format!("column {bad} out of range 0..{}", self.cols)));
        }
        let mut out = Self::zeros(self.rows, indices.len());
        for r in 0..self.rows {
            for (j, &c) in indices.iter().enumerate() {
                out.set(r, j, self.get(r, c).clone());
            }
        }
        Ok(out)
    }

    pub fn scale_row(&mut self, r: usize, factor: &Rational) {
        for c in 0..self.cols {
            let v = self.get(r, c) * factor;
            self.set(r, c, v);
        }
    }

    /// Row-major binary64 image.
    pub fn to_f64(&self) -> Vec<f64> {
        self.entries.iter().map(to_f64).collect()
    }
}

impl fmt::Display for RationalMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in 0..self.rows {
            let cells: Vec<String> = self.row(r).iter().map(format_rational).collect();
            writeln!(f, "[{}]", cells.join(" "))?;
        }
        Ok(())
    }
}

/// Exact rank by fraction-free elimination.
pub fn rank(m: &RationalMatrix) -> usize {
    if m.rows == 0 || m.cols == 0 {
        return 0;
    }
    // Clearing denominators row by row leaves the rank unchanged.
    let mut a: Vec<Vec<BigInt>> = (0..m.rows)
        .map(|r| {
            let row = m.row(r);
            let l = row.iter().fold(BigInt::one(), |acc, x| acc.lcm(x.denom()));
            row.iter().map(|x| x.numer() * (&l / x.denom())).collect()
        })
        .collect();

    let mut prev = BigInt::one();
    let mut r = 0;
    for c in 0..m.cols {
        if r == m.rows {
            break;
        }
        let Some(p) = (r..m.rows).find(|&i| !a[i][c].is_zero()) else { continue };
        a.swap(r, p);
        let (head, tail) = a.split_at_mut(r + 1);
        let pivot_row = &head[r];
        for row in tail.iter_mut() {
            for j in c + 1..m.cols {
                let v = &row[j] * &pivot_row[c] - &row[c] * &pivot_row[j];
                debug_assert!((&v % &prev).is_zero());
                row[j] = v / &prev;
            }
            row[c] = BigInt::zero();
        }
        prev = a[r][c].clone();
        r += 1;
    }
    r
}

/// Solves the square system `a x = b`; `None` when `a` is singular.
pub fn solve_square(a: &RationalMatrix, b: &[Rational]) -> Option<Vec<Rational>> {
    let n = a.rows;
    assert!(a.cols == n && b.len() == n, "solve_square expects an n x n system");
    let mut t: Vec<Vec<Rational>> = (0..n)
        .map(|r| {
            let mut row = a.row(r).to_vec();
            row.push(b[r].clone());
            row
        })
        .collect();
    for c in 0..n {
        let p = (c..n).find(|&i| !t[i][c].is_zero())?;
        t.swap(c, p);
        let inv = t[c][c].recip();
        for j in c..=n {
            t[c][j] = &t[c][j] * &inv;
        }
        for i in 0..n {
            if i != c && !t[i][c].is_zero() {
                let f = t[i][c].clone();
                for j in c..=n {
                    let v = &t[c][j] * &f;
                    t[i][j] -= v;
                }
            }
        }
    }
    Some(t.into_iter().map(|mut row| row.pop().unwrap()).collect())
}

/// A subset of `{0, …, n-1}` as a bitmask; block 0 is the least
/// significant bit. Displayed 1-based, e.g. `{1,2}`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct BlockSet(pub u32);

impl BlockSet {
    pub const EMPTY: BlockSet = BlockSet(0);

    pub fn full(n: usize) -> Self {
        BlockSet(if n >= 32 { u32::MAX } else { (1u32 << n) - 1 })
    }

    pub fn singleton(i: usize) -> Self {
        BlockSet(1 << i)
    }

    /// From 0-based indices.
    pub fn from_indices(indices: &[usize]) -> Self {
        BlockSet(indices.iter().fold(0, |acc, &i| acc | (1 << i)))
    }

    pub fn contains(self, i: usize) -> bool {
        i < 32 && self.0 & (1 << i) != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn complement(self, n: usize) -> Self {
        BlockSet(!self.0 & Self::full(n).0)
    }

    pub fn union(self, other: Self) -> Self {
        BlockSet(self.0 | other.0)
    }

    pub fn intersection(self, other: Self) -> Self {
        BlockSet(self.0 & other.0)
    }

    pub fn is_subset(self, other: Self) -> bool {
        self.0 & !other.0 == 0
    }

    /// 0-based members in increasing order.
    pub fn iter(self) -> impl Iterator<Item = usize> {
        (0..32).filter(move |&i| self.contains(i))
    }

    /// 1-based members, the user-facing convention.
    pub fn one_based(self) -> Vec<usize> {
        self.iter().map(|i| i + 1).collect()
    }

    /// All subsets of `{0..n}` in increasing bitmask order, `∅` first.
    pub fn all(n: usize) -> impl Iterator<Item = BlockSet> {
        (0..(1u32 << n)).map(BlockSet)
    }

    /// All nonempty subsets in increasing bitmask order.
    pub fn nonempty(n: usize) -> impl Iterator<Item = BlockSet> {
        (1..(1u32 << n)).map(BlockSet)
    }
}

impl fmt::Display for BlockSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let items: Vec<String> = self.one_based().iter().map(|i| format!("{i}")).collect();
        write!(f, "{{{}}}", items.join(","))
    }
}

impl fmt::Debug for BlockSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Block sizes `(m_1, …, m_n)` and the target dimension `k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockStructure {
    block_sizes: Vec<usize>,
    target_dim: usize,
    offsets: Vec<usize>,
}

impl BlockStructure {
    pub fn new(block_sizes: Vec<usize>, target_dim: usize) -> Result<Self> {
        if block_sizes.is_empty() {
            return Err(Error::Malformed("at least one block is required".into()));
        }
        if block_sizes.len() > 31 {
            return Err(Error::Malformed(format!("{} blocks do not fit a subset mask", block_sizes.len())));
        }
        if block_sizes.iter().any(|&m| m == 0) {
            return Err(Error::Malformed("block sizes must be positive".into()));
        }
        if target_dim == 0 {
            return Err(Error::Malformed("target dimension k must be positive".into()));
        }
        let total: usize = block_sizes.iter().sum();
        if total < target_dim {
            return Err(Error::Malformed(format!(
                "sum of block sizes {total} is smaller than k = {target_dim}"
            )));
        }
        let mut offsets = Vec::with_capacity(block_sizes.len() + 1);
        let mut acc = 0;
        offsets.push(0);
        for &m in &block_sizes {
            acc += m;
            offsets.push(acc);
        }
        Ok(BlockStructure { block_sizes, target_dim, offsets })
    }

    pub fn n(&self) -> usize {
        self.block_sizes.len()
    }

    pub fn k(&self) -> usize {
        self.target_dim
    }

    pub fn sizes(&self) -> &[usize] {
        &self.block_sizes
    }

    pub fn size(&self, i: usize) -> usize {
        self.block_sizes[i]
    }

    pub fn total_dim(&self) -> usize {
        self.offsets[self.n()]
    }

    pub fn columns(&self, i: usize) -> core::ops::Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    /// Block owning global column `c`.
    pub fn block_of(&self, c: usize) -> usize {
        self.offsets.partition_point(|&o| o <= c) - 1
    }

    pub fn check_subset(&self, subset: BlockSet) -> Result<()> {
        if subset.is_subset(BlockSet::full(self.n())) {
            Ok(())
        } else {
            Err(Error::MalformedSubset { subset, n: self.n() })
        }
    }

    pub fn check_matrix(&self, pi: &RationalMatrix) -> Result<()> {
        if pi.rows() != self.k() {
            return Err(Error::ShapeMismatch { expected: self.k(), got: pi.rows() });
        }
        if pi.cols() != self.total_dim() {
            return Err(Error::ShapeMismatch { expected: self.total_dim(), got: pi.cols() });
        }
        Ok(())
    }

    /// Global column indices of the blocks in `subset`, in order.
    pub fn subset_columns(&self, subset: BlockSet) -> Vec<usize> {
        subset.iter().filter(|&i| i < self.n()).flat_map(|i| self.columns(i)).collect()
    }
}

/// The columns of `pi` belonging to blocks in `subset`; `∅` yields `k × 0`.
pub fn block_columns(pi: &RationalMatrix, blocks: &BlockStructure, subset: BlockSet) -> Result<RationalMatrix> {
    blocks.check_subset(subset)?;
    blocks.check_matrix(pi)?;
    pi.select_columns(&blocks.subset_columns(subset))
}

/// `dim π(⊕_{i∈I} ℝ^{m_i})`.
pub fn image_dim(pi: &RationalMatrix, blocks: &BlockStructure, subset: BlockSet) -> Result<usize> {
    Ok(rank(&block_columns(pi, blocks, subset)?))
}

/// Whether the given global columns of `pi` are linearly independent.
pub fn is_independent(pi: &RationalMatrix, blocks: &BlockStructure, column_indices: &[usize]) -> Result<bool> {
    blocks.check_matrix(pi)?;
    let mut seen = Vec::with_capacity(column_indices.len());
    for &c in column_indices {
        if seen.contains(&c) {
            return Err(Error::DuplicateIndex(c));
        }
        seen.push(c);
    }
    if column_indices.is_empty() {
        return Ok(true);
    }
    Ok(rank(&pi.select_columns(column_indices)?) == column_indices.len())
}
