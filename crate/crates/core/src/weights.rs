//! Constructive weights for the subset-rank polyhedron.
//!
//! For subspaces `V_i = π(ℝ^{m_i})` generated by the block columns
//! `v^i_j = π(e^i_j)`, the polyhedron
//!
//! ```text
//! P = { x ≥ 0 : Σ_{i∈I} x_i + dim(Σ_{i∉I} V_i) ≥ s  for every I }
//! ```
//!
//! has all its vertices among the vectors
//! `Ĵ(i) = (#J_1, …, #J_n) + (s − Σ #J_j) e_i` where `J` picks an
//! independent set of generators of size at least `s`. This module
//! enumerates those vectors, finds convex weights `α` with `Σ α Ĵ(i) ≤ d`
//! by exact linear feasibility, and checks the vertex description against
//! a brute-force enumeration of the vertices of `P`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::exactlin::{int, rank, solve_square, BlockSet, BlockStructure, Rational, RationalMatrix};
use crate::mstar::{complement_dims, DimensionVector};
use crate::simplex::{feasible_point, Feasibility};

/// Default cap on independence tests during enumeration of 𝕁.
pub const DEFAULT_BUDGET: usize = 1_000_000;

/// Brute-force vertex enumeration is limited to this many blocks.
pub const MAX_VERTEX_BLOCKS: usize = 4;

/// The constraint system of `P` for a fixed `(π, blocks, s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyhedron {
    n: usize,
    s: Rational,
    /// `dim(Σ_{i∉I} V_i)` indexed by the bitmask of `I`.
    complement_dims: Vec<usize>,
}

/// One inequality `coeffs · x ≥ rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<Rational>,
    pub rhs: Rational,
    pub origin: ConstraintOrigin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintOrigin {
    Subset(BlockSet),
    NonNegative(usize),
}

impl Polyhedron {
    pub fn new(pi: &RationalMatrix, blocks: &BlockStructure, s: Rational) -> Result<Self> {
        blocks.check_matrix(pi)?;
        if s.is_negative() {
            return Err(Error::Malformed("s must be nonnegative".into()));
        }
        Ok(Polyhedron { n: blocks.n(), s, complement_dims: complement_dims(pi, blocks)? })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn s(&self) -> &Rational {
        &self.s
    }

    pub fn complement_dim(&self, subset: BlockSet) -> usize {
        self.complement_dims[subset.0 as usize]
    }

    /// `Σ_{i∈I} x_i + dim(Σ_{i∉I} V_i) − s`.
    pub fn subset_slack(&self, x: &[Rational], subset: BlockSet) -> Rational {
        let sum: Rational = subset.iter().map(|i| &x[i]).sum();
        sum + int(self.complement_dim(subset) as i64) - &self.s
    }

    /// First `I` (bitmask order, `∅` included) whose condition fails.
    pub fn violated_subset(&self, x: &[Rational]) -> Option<BlockSet> {
        BlockSet::all(self.n).find(|&s| self.subset_slack(x, s).is_negative())
    }

    /// Exact check of all `2ⁿ + n` inequalities.
    pub fn contains(&self, x: &[Rational]) -> bool {
        x.len() == self.n && x.iter().all(|v| !v.is_negative()) && self.violated_subset(x).is_none()
    }

    /// `P` is empty exactly when `dim(V_1 + … + V_n) < s`.
    pub fn is_empty(&self) -> bool {
        int(self.complement_dim(BlockSet::EMPTY) as i64) < self.s
    }

    /// Subset rows for every nonempty `I`, then the `n` sign rows.
    pub fn constraints(&self) -> Vec<Constraint> {
        let mut out = Vec::with_capacity((1 << self.n) - 1 + self.n);
        for subset in BlockSet::nonempty(self.n) {
            let coeffs = (0..self.n).map(|i| if subset.contains(i) { Rational::one() } else { Rational::zero() }).collect();
            let rhs = &self.s - int(self.complement_dim(subset) as i64);
            out.push(Constraint { coeffs, rhs, origin: ConstraintOrigin::Subset(subset) });
        }
        for i in 0..self.n {
            let mut coeffs = vec![Rational::zero(); self.n];
            coeffs[i] = Rational::one();
            out.push(Constraint { coeffs, rhs: Rational::zero(), origin: ConstraintOrigin::NonNegative(i) });
        }
        out
    }

    /// Nonempty `I` whose condition holds with equality at `x`.
    pub fn tight_subsets(&self, x: &[Rational]) -> Vec<BlockSet> {
        BlockSet::nonempty(self.n).filter(|&s| self.subset_slack(x, s).is_zero()).collect()
    }
}

/// Whether a family of subsets is closed under union and intersection.
/// Empty intersections are not required to be members.
pub fn is_lattice_closed(family: &[BlockSet]) -> bool {
    family.iter().all(|&a| {
        family.iter().all(|&b| {
            let meet = a.intersection(b);
            family.contains(&a.union(b)) && (meet.is_empty() || family.contains(&meet))
        })
    })
}

/// `(π, blocks, s, d)` for one application of the weights construction.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightsInstance {
    pub pi: RationalMatrix,
    pub blocks: BlockStructure,
    pub s: Rational,
    pub d: DimensionVector,
    pub budget: usize,
}

impl WeightsInstance {
    pub fn new(pi: RationalMatrix, blocks: BlockStructure, s: Rational, d: DimensionVector) -> Result<Self> {
        blocks.check_matrix(&pi)?;
        d.check_len(&blocks)?;
        if s.is_negative() {
            return Err(Error::Malformed("s must be nonnegative".into()));
        }
        Ok(WeightsInstance { pi, blocks, s, d, budget: DEFAULT_BUDGET })
    }

    pub fn with_budget(mut self, budget: usize) -> Self {
        self.budget = budget;
        self
    }

    pub fn polyhedron(&self) -> Result<Polyhedron> {
        Polyhedron::new(&self.pi, &self.blocks, self.s.clone())
    }

    /// The `2ⁿ` subset conditions on `d`.
    pub fn check_conditions(&self) -> Result<()> {
        let poly = self.polyhedron()?;
        match poly.violated_subset(self.d.as_slice()) {
            None => Ok(()),
            Some(subset) => {
                let lhs = poly.subset_slack(self.d.as_slice(), subset) + &self.s;
                Err(Error::Infeasible {
                    subset,
                    lhs: crate::exactlin::format_rational(&lhs),
                    s: crate::exactlin::format_rational(&self.s),
                })
            }
        }
    }
}

/// `J = (J_1, …, J_n)`: a choice of generators per block with independent union.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndependentTuple {
    /// Global column indices of `J_1 ∪ … ∪ J_n`, increasing.
    pub columns: Vec<usize>,
    /// Global column indices split by block.
    pub parts: Vec<Vec<usize>>,
}

impl IndependentTuple {
    pub fn counts(&self) -> Vec<usize> {
        self.parts.iter().map(|p| p.len()).collect()
    }

    pub fn size(&self) -> usize {
        self.columns.len()
    }
}

/// `Ĵ(i)` for a tuple of 𝕁 and a pivot block `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JhatVector {
    /// Index of `J` in the enumeration of 𝕁.
    pub tuple: usize,
    /// 0-based pivot block.
    pub pivot: usize,
    pub coords: Vec<Rational>,
}

/// 𝕁 together with 𝕁̄.
#[derive(Debug, Clone, PartialEq)]
pub struct JFamily {
    pub s: Rational,
    pub tuples: Vec<IndependentTuple>,
    pub jbar: Vec<JhatVector>,
}

/// Enumerates 𝕁 in lexicographic order of the sorted column lists.
pub fn enumerate_tuples(pi: &RationalMatrix, blocks: &BlockStructure, s: &Rational, budget: usize) -> Result<Vec<IndependentTuple>> {
    blocks.check_matrix(pi)?;
    let min_size = s.ceil().to_integer().to_usize().unwrap_or(usize::MAX);
    // No independent set exceeds rank(π) ≤ k.
    let max_size = rank(pi);
    let total = blocks.total_dim();
    let mut out = Vec::new();
    if min_size > max_size {
        return Ok(out);
    }

    let mut tests = 0usize;
    let mut current: Vec<usize> = Vec::new();
    let mut stack: Vec<usize> = vec![0];
    if min_size == 0 {
        out.push(make_tuple(blocks, &current));
    }
    // Iterative pre-order DFS; `stack` holds the next candidate per depth.
    while let Some(next) = stack.pop() {
        if next >= total || current.len() >= max_size {
            current.pop();
            continue;
        }
        stack.push(next + 1);
        current.push(next);
        tests += 1;
        if tests > budget {
            return Err(Error::BudgetExceeded { budget });
        }
        if rank(&pi.select_columns(&current)?) == current.len() {
            if current.len() >= min_size {
                out.push(make_tuple(blocks, &current));
            }
            stack.push(next + 1);
        } else {
            current.pop();
        }
    }
    Ok(out)
}

fn make_tuple(blocks: &BlockStructure, columns: &[usize]) -> IndependentTuple {
    let mut parts = vec![Vec::new(); blocks.n()];
    for &c in columns {
        parts[blocks.block_of(c)].push(c);
    }
    IndependentTuple { columns: columns.to_vec(), parts }
}

/// All `(J, i)` with `Ĵ(i) ≥ 0`, kept with multiplicity.
pub fn jbar_of(tuples: &[IndependentTuple], s: &Rational) -> Vec<JhatVector> {
    let mut out = Vec::new();
    for (t, tuple) in tuples.iter().enumerate() {
        let counts = tuple.counts();
        let correction = s - int(tuple.size() as i64);
        for pivot in 0..counts.len() {
            let coords: Vec<Rational> = counts
                .iter()
                .enumerate()
                .map(|(j, &c)| if j == pivot { int(c as i64) + &correction } else { int(c as i64) })
                .collect();
            if coords.iter().all(|c| !c.is_negative()) {
                out.push(JhatVector { tuple: t, pivot, coords });
            }
        }
    }
    out
}

impl JFamily {
    pub fn new(pi: &RationalMatrix, blocks: &BlockStructure, s: &Rational, budget: usize) -> Result<Self> {
        let tuples = enumerate_tuples(pi, blocks, s, budget)?;
        let jbar = jbar_of(&tuples, s);
        Ok(JFamily { s: s.clone(), tuples, jbar })
    }

    /// Index of the first `(J, i)` whose `Ĵ(i)` equals `x`.
    pub fn find(&self, x: &[Rational]) -> Option<usize> {
        self.jbar.iter().position(|j| j.coords == x)
    }

    /// Solves `x = Σ α Ĵ(i) + Σ β_i e_i`, `α, β ≥ 0`, `Σ α = 1`.
    pub fn decompose(&self, x: &[Rational]) -> Option<Decomposition> {
        let n = x.len();
        // Identical vectors share one LP column; weight goes to the first pair.
        let mut distinct: BTreeMap<&[Rational], usize> = BTreeMap::new();
        let mut columns: Vec<usize> = Vec::new();
        for (idx, j) in self.jbar.iter().enumerate() {
            if j.coords.len() != n {
                return None;
            }
            distinct.entry(&j.coords).or_insert_with(|| {
                columns.push(idx);
                idx
            });
        }
        let u = columns.len();
        if u == 0 {
            return None;
        }
        let mut a = RationalMatrix::zeros(n + 1, u + n);
        for (c, &idx) in columns.iter().enumerate() {
            for r in 0..n {
                a.set(r, c, self.jbar[idx].coords[r].clone());
            }
            a.set(n, c, Rational::one());
        }
        for r in 0..n {
            a.set(r, u + r, Rational::one());
        }
        let mut b = x.to_vec();
        b.push(Rational::one());

        let Feasibility::Feasible(sol) = feasible_point(&a, &b) else { return None };
        let convex = columns
            .iter()
            .zip(&sol[..u])
            .filter(|(_, w)| !w.is_zero())
            .map(|(&idx, w)| (idx, w.clone()))
            .collect();
        Some(Decomposition { convex, cone: sol[u..].to_vec() })
    }
}

/// Convex part over 𝕁̄ indices plus a cone part over `e_1 … e_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub convex: Vec<(usize, Rational)>,
    pub cone: Vec<Rational>,
}

impl Decomposition {
    /// `Σ α Ĵ(i) + β`, recomputed exactly.
    pub fn reconstruct(&self, family: &JFamily) -> Vec<Rational> {
        let mut out = self.cone.clone();
        for (idx, w) in &self.convex {
            for (o, c) in out.iter_mut().zip(&family.jbar[*idx].coords) {
                *o += w * c;
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightEntry {
    pub jhat: JhatVector,
    pub alpha: Rational,
}

/// Convex weights on 𝕁̄ (support only) and their combination `Σ α Ĵ(i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightAssignment {
    pub entries: Vec<WeightEntry>,
    pub combination: Vec<Rational>,
    pub jbar_size: usize,
}

impl WeightAssignment {
    pub fn alpha_sum(&self) -> Rational {
        self.entries.iter().map(|e| &e.alpha).sum()
    }

    /// `Σ α = 1`, `α ≥ 0`, `Σ α Ĵ(i) ≤ d`, all exact.
    pub fn verify(&self, d: &[Rational]) -> bool {
        let mut comb = vec![Rational::zero(); d.len()];
        for e in &self.entries {
            if e.alpha.is_negative() || e.jhat.coords.len() != d.len() {
                return false;
            }
            for (c, v) in comb.iter_mut().zip(&e.jhat.coords) {
                *c += &e.alpha * v;
            }
        }
        self.alpha_sum().is_one() && comb == self.combination && comb.iter().zip(d).all(|(c, di)| c <= di)
    }
}

/// Weights for a point already known to satisfy the subset conditions.
pub fn weights_for(family: &JFamily, d: &[Rational]) -> Result<WeightAssignment> {
    let dec = family.decompose(d).ok_or_else(|| {
        Error::Inconsistent(format!("no convex weights for d = {:?} although the subset conditions hold", fmt_point(d)))
    })?;
    let combination = {
        let mut c = vec![Rational::zero(); d.len()];
        for (idx, w) in &dec.convex {
            for (o, v) in c.iter_mut().zip(&family.jbar[*idx].coords) {
                *o += w * v;
            }
        }
        c
    };
    let entries = dec
        .convex
        .iter()
        .map(|(idx, w)| WeightEntry { jhat: family.jbar[*idx].clone(), alpha: w.clone() })
        .collect();
    Ok(WeightAssignment { entries, combination, jbar_size: family.jbar.len() })
}

fn fmt_point(x: &[Rational]) -> Vec<alloc::string::String> {
    x.iter().map(crate::exactlin::format_rational).collect()
}

pub fn enumerate_j(instance: &WeightsInstance) -> Result<Vec<IndependentTuple>> {
    enumerate_tuples(&instance.pi, &instance.blocks, &instance.s, instance.budget)
}

pub fn enumerate_jbar(instance: &WeightsInstance) -> Result<Vec<JhatVector>> {
    Ok(jbar_of(&enumerate_j(instance)?, &instance.s))
}

pub fn family(instance: &WeightsInstance) -> Result<JFamily> {
    JFamily::new(&instance.pi, &instance.blocks, &instance.s, instance.budget)
}

/// Convex weights `α` on 𝕁̄ with `Σ α Ĵ(i) ≤ d`.
pub fn find_weights(instance: &WeightsInstance) -> Result<WeightAssignment> {
    instance.check_conditions()?;
    weights_for(&family(instance)?, instance.d.as_slice())
}

pub fn membership(instance: &WeightsInstance, x: &[Rational]) -> Result<bool> {
    Ok(instance.polyhedron()?.contains(x))
}

pub fn decompose_point(instance: &WeightsInstance, x: &[Rational]) -> Result<Option<Decomposition>> {
    Ok(family(instance)?.decompose(x))
}

/// Vertices of `P` by brute force over all `n`-subsets of constraint rows.
pub fn vertices_of(poly: &Polyhedron) -> Result<Vec<Vec<Rational>>> {
    let n = poly.n();
    if n > MAX_VERTEX_BLOCKS {
        return Err(Error::TooManyBlocks { n, cap: MAX_VERTEX_BLOCKS });
    }
    let rows = poly.constraints();
    let mut out: Vec<Vec<Rational>> = Vec::new();
    for combo in Combinations::new(rows.len(), n) {
        let a = RationalMatrix::from_rows(combo.iter().map(|&r| rows[r].coeffs.clone()).collect(), n)?;
        let b: Vec<Rational> = combo.iter().map(|&r| rows[r].rhs.clone()).collect();
        let Some(x) = solve_square(&a, &b) else { continue };
        if poly.contains(&x) && !out.contains(&x) {
            out.push(x);
        }
    }
    out.sort();
    Ok(out)
}

pub fn enumerate_vertices(instance: &WeightsInstance) -> Result<Vec<Vec<Rational>>> {
    vertices_of(&instance.polyhedron()?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VertexMatch {
    pub vertex: Vec<Rational>,
    /// Index into 𝕁̄ of a witnessing `(J, i)`.
    pub witness: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VertexClaimReport {
    pub family: JFamily,
    pub matches: Vec<VertexMatch>,
}

impl VertexClaimReport {
    pub fn unmatched(&self) -> impl Iterator<Item = &VertexMatch> {
        self.matches.iter().filter(|m| m.witness.is_none())
    }

    pub fn passed(&self) -> bool {
        self.unmatched().next().is_none()
    }
}

pub fn verify_vertex_claim_for(poly: &Polyhedron, family: JFamily) -> Result<VertexClaimReport> {
    let matches = vertices_of(poly)?
        .into_iter()
        .map(|v| {
            let witness = family.find(&v);
            VertexMatch { vertex: v, witness }
        })
        .collect();
    Ok(VertexClaimReport { family, matches })
}

/// Every vertex of `P` equals some `Ĵ(i)` with `(J, i) ∈ 𝕁̄`.
pub fn verify_vertex_claim(instance: &WeightsInstance) -> Result<VertexClaimReport> {
    verify_vertex_claim_for(&instance.polyhedron()?, family(instance)?)
}

/// Lexicographic `r`-subsets of `0..len`.
pub(crate) struct Combinations {
    len: usize,
    idx: Vec<usize>,
    done: bool,
}

impl Combinations {
    pub(crate) fn new(len: usize, r: usize) -> Self {
        Combinations { len, idx: (0..r).collect(), done: r > len }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.idx.clone();
        let r = self.idx.len();
        let mut i = r;
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            if self.idx[i] < self.len - r + i {
                self.idx[i] += 1;
                for j in i + 1..r {
                    self.idx[j] = self.idx[j - 1] + 1;
                }
                break;
            }
        }
        Some(out)
    }
}

impl core::fmt::Display for ConstraintOrigin {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ConstraintOrigin::Subset(s) => write!(f, "subset {s}"),
            ConstraintOrigin::NonNegative(i) => write!(f, "x_{} >= 0", i + 1),
        }
    }
}

impl core::fmt::Display for JhatVector {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "({})", fmt_point(&self.coords).join(","))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactlin::rat;

    fn sum_instance(s: Rational, d: &[Rational]) -> WeightsInstance {
        let pi = RationalMatrix::from_i64_rows(&[&[1, 1]]);
        let b = BlockStructure::new(vec![1, 1], 1).unwrap();
        WeightsInstance::new(pi, b, s, DimensionVector::new(d.to_vec()).unwrap()).unwrap()
    }

    fn identity2(s: Rational) -> WeightsInstance {
        let b = BlockStructure::new(vec![1, 1], 2).unwrap();
        WeightsInstance::new(RationalMatrix::identity(2), b, s, DimensionVector::new(vec![int(1), int(1)]).unwrap()).unwrap()
    }

    #[test]
    fn combinations_count() {
        assert_eq!(Combinations::new(5, 2).count(), 10);
        assert_eq!(Combinations::new(3, 0).count(), 1);
        assert_eq!(Combinations::new(2, 3).count(), 0);
        assert_eq!(Combinations::new(4, 2).nth(1), Some(vec![0, 2]));
    }

    #[test]
    fn enumerate_j_examples() {
        let inst = sum_instance(int(1), &[int(1), int(1)]);
        let j = enumerate_j(&inst).unwrap();
        assert_eq!(j.len(), 2);
        assert_eq!(j[0].parts, vec![vec![0], vec![]]);
        assert_eq!(j[1].parts, vec![vec![], vec![1]]);

        let inst = sum_instance(int(0), &[int(1), int(1)]);
        let j = enumerate_j(&inst).unwrap();
        assert_eq!(j[0].columns, Vec::<usize>::new());
        assert_eq!(j.len(), 3);

        let j = enumerate_j(&identity2(int(2))).unwrap();
        assert_eq!(j.len(), 1);
        assert_eq!(j[0].parts, vec![vec![0], vec![1]]);
    }

    #[test]
    fn lexicographic_order() {
        let pi = RationalMatrix::identity(3);
        let b = BlockStructure::new(vec![1, 2], 3).unwrap();
        let j = enumerate_tuples(&pi, &b, &int(1), DEFAULT_BUDGET).unwrap();
        let cols: Vec<Vec<usize>> = j.iter().map(|t| t.columns.clone()).collect();
        assert_eq!(cols, vec![vec![0], vec![0, 1], vec![0, 1, 2], vec![0, 2], vec![1], vec![1, 2], vec![2]]);
    }

    #[test]
    fn budget_is_enforced() {
        let pi = RationalMatrix::identity(3);
        let b = BlockStructure::new(vec![1, 2], 3).unwrap();
        assert_eq!(enumerate_tuples(&pi, &b, &int(1), 3).unwrap_err(), Error::BudgetExceeded { budget: 3 });
    }

    #[test]
    fn jbar_examples() {
        let inst = sum_instance(int(1), &[int(1), int(1)]);
        let jbar = enumerate_jbar(&inst).unwrap();
        let first: Vec<_> = jbar.iter().filter(|j| j.tuple == 0).collect();
        assert_eq!(first.len(), 2);
        assert!(first.iter().all(|j| j.coords == vec![int(1), int(0)]));

        let inst = sum_instance(rat(1, 2), &[int(1), int(1)]);
        let jbar = enumerate_jbar(&inst).unwrap();
        let first: Vec<_> = jbar.iter().filter(|j| j.tuple == 0).collect();
        assert_eq!(first.len(), 1);
        assert_eq!(first[0].pivot, 0);
        assert_eq!(first[0].coords, vec![rat(1, 2), int(0)]);
        for j in &jbar {
            assert_eq!(j.coords.iter().sum::<Rational>(), rat(1, 2));
        }
    }

    #[test]
    fn find_weights_examples() {
        let inst = sum_instance(int(1), &[rat(1, 2), rat(1, 2)]);
        let w = find_weights(&inst).unwrap();
        assert!(w.verify(inst.d.as_slice()));
        assert_eq!(w.combination, vec![rat(1, 2), rat(1, 2)]);
        assert_eq!(w.entries.len(), 2);
        assert!(w.entries.iter().all(|e| e.alpha == rat(1, 2)));

        let inst = sum_instance(int(1), &[int(1), int(0)]);
        let w = find_weights(&inst).unwrap();
        assert_eq!(w.entries.len(), 1);
        assert_eq!(w.entries[0].jhat.coords, vec![int(1), int(0)]);
        assert_eq!(w.entries[0].alpha, int(1));

        let pi = RationalMatrix::identity(2);
        let b = BlockStructure::new(vec![2], 2).unwrap();
        let inst = WeightsInstance::new(pi, b, rat(3, 2), DimensionVector::new(vec![rat(3, 2)]).unwrap()).unwrap();
        let w = find_weights(&inst).unwrap();
        assert_eq!(w.combination, vec![rat(3, 2)]);
        assert_eq!(w.alpha_sum(), int(1));
    }

    #[test]
    fn infeasible_instance_names_subset() {
        let inst = sum_instance(int(1), &[int(0), int(0)]);
        match find_weights(&inst).unwrap_err() {
            Error::Infeasible { subset, .. } => assert_eq!(subset, BlockSet::full(2)),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn vertex_examples() {
        let inst = sum_instance(int(1), &[int(1), int(1)]);
        let v = enumerate_vertices(&inst).unwrap();
        assert_eq!(v, vec![vec![int(0), int(1)], vec![int(1), int(0)]]);
        let report = verify_vertex_claim(&inst).unwrap();
        assert!(report.passed());
        assert_eq!(report.matches.len(), 2);

        let inst = sum_instance(int(0), &[int(1), int(1)]);
        assert_eq!(enumerate_vertices(&inst).unwrap(), vec![vec![int(0), int(0)]]);

        let pi = RationalMatrix::identity(3);
        let b = BlockStructure::new(vec![3], 3).unwrap();
        let inst = WeightsInstance::new(pi, b, rat(5, 2), DimensionVector::new(vec![int(3)]).unwrap()).unwrap();
        assert_eq!(enumerate_vertices(&inst).unwrap(), vec![vec![rat(5, 2)]]);
        assert!(verify_vertex_claim(&inst).unwrap().passed());
    }

    #[test]
    fn vertex_cap() {
        let pi = RationalMatrix::from_i64_rows(&[&[1, 1, 1, 1, 1]]);
        let b = BlockStructure::new(vec![1; 5], 1).unwrap();
        let inst = WeightsInstance::new(pi, b, int(1), DimensionVector::new(vec![int(1); 5]).unwrap()).unwrap();
        assert!(matches!(enumerate_vertices(&inst), Err(Error::TooManyBlocks { n: 5, .. })));
    }

    #[test]
    fn decompose_examples() {
        let inst = sum_instance(int(1), &[int(1), int(1)]);
        let fam = family(&inst).unwrap();
        let dec = fam.decompose(&[int(1), int(0)]).unwrap();
        assert_eq!(dec.cone, vec![int(0), int(0)]);
        assert_eq!(dec.reconstruct(&fam), vec![int(1), int(0)]);

        let x = [int(2), int(1)];
        let dec = fam.decompose(&x).unwrap();
        assert_eq!(dec.reconstruct(&fam), x.to_vec());

        let x = [rat(1, 4), rat(1, 4)];
        assert!(fam.decompose(&x).is_none());
        assert!(!membership(&inst, &x).unwrap());
    }

    #[test]
    fn jhat_vectors_lie_in_polyhedron() {
        let pi = RationalMatrix::from_i64_rows(&[&[1, 0, 2], &[0, 1, -1]]);
        let b = BlockStructure::new(vec![1, 2], 2).unwrap();
        for s in [rat(1, 2), int(1), rat(3, 2), int(2)] {
            let poly = Polyhedron::new(&pi, &b, s.clone()).unwrap();
            let fam = JFamily::new(&pi, &b, &s, DEFAULT_BUDGET).unwrap();
            assert!(!fam.jbar.is_empty());
            for j in &fam.jbar {
                assert!(poly.contains(&j.coords), "{:?}", j);
            }
        }
    }

    #[test]
    fn tight_subsets_form_lattice_at_positive_vertex() {
        let inst = identity2(int(1));
        let poly = inst.polyhedron().unwrap();
        for v in vertices_of(&poly).unwrap() {
            if v.iter().all(|c| c.is_positive()) {
                assert!(is_lattice_closed(&poly.tight_subsets(&v)));
            }
        }
        assert!(!is_lattice_closed(&[BlockSet(0b01), BlockSet(0b10)]));
        assert!(is_lattice_closed(&[BlockSet(0b01), BlockSet(0b10), BlockSet(0b11)]));
    }

    #[test]
    fn empty_polyhedron() {
        let pi = RationalMatrix::from_i64_rows(&[&[1, 1]]);
        let b = BlockStructure::new(vec![1, 1], 1).unwrap();
        let poly = Polyhedron::new(&pi, &b, int(2)).unwrap();
        assert!(poly.is_empty());
        assert!(vertices_of(&poly).unwrap().is_empty());
        assert!(!poly.contains(&[int(5), int(5)]));
    }
}
