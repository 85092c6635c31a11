//! The dimension bound 𝔪(π, d) and the transversality test.
//!
//! 𝔪 is the minimum, over nonempty `I ⊆ {1..n}`, of
//! `Σ_{i∈I} d_i + dim π(⊕_{i∉I} ℝ^{m_i})`. Subsets are visited in
//! increasing bitmask order with block 1 as the least significant bit.

use alloc::format;
use alloc::vec::Vec;

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::exactlin::{image_dim, int, rank, BlockSet, BlockStructure, Rational, RationalMatrix};

/// Hard cap on the number of blocks.
pub const MAX_BLOCKS: usize = 8;

/// `(d_1, …, d_n)`, each a nonnegative rational.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DimensionVector(Vec<Rational>);

impl DimensionVector {
    pub fn new(d: Vec<Rational>) -> Result<Self> {
        if let Some((i, _)) = d.iter().enumerate().find(|(_, v)| v.is_negative()) {
            return Err(Error::Malformed(format!("d_{} is negative", i + 1)));
        }
        Ok(DimensionVector(d))
    }

    pub fn as_slice(&self) -> &[Rational] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn sum(&self) -> Rational {
        self.0.iter().sum()
    }

    pub fn sum_over(&self, subset: BlockSet) -> Rational {
        subset.iter().filter(|&i| i < self.0.len()).map(|i| &self.0[i]).sum()
    }

    pub fn check_len(&self, blocks: &BlockStructure) -> Result<()> {
        if self.0.len() != blocks.n() {
            return Err(Error::ShapeMismatch { expected: blocks.n(), got: self.0.len() });
        }
        Ok(())
    }

    /// `d_i ≤ m_i` for every block, as holds for dimensions of subsets of ℝ^{m_i}.
    pub fn bounded_by_blocks(&self, blocks: &BlockStructure) -> bool {
        self.0.iter().zip(blocks.sizes()).all(|(d, &m)| *d <= int(m as i64))
    }
}

impl core::ops::Index<usize> for DimensionVector {
    type Output = Rational;
    fn index(&self, i: usize) -> &Rational {
        &self.0[i]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsetValue {
    pub subset: BlockSet,
    pub value: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MStarResult {
    pub value: Rational,
    pub minimizers: Vec<BlockSet>,
    /// One row per nonempty subset, in bitmask order.
    pub per_subset: Vec<SubsetValue>,
}

/// `dim π(⊕_{i∉I} ℝ^{m_i})` for every `I`, indexed by bitmask.
pub(crate) fn complement_dims(pi: &RationalMatrix, blocks: &BlockStructure) -> Result<Vec<usize>> {
    let n = blocks.n();
    BlockSet::all(n).map(|s| image_dim(pi, blocks, s.complement(n))).collect()
}

pub fn check_surjective(pi: &RationalMatrix, blocks: &BlockStructure) -> Result<()> {
    blocks.check_matrix(pi)?;
    let r = rank(pi);
    if r < blocks.k() {
        return Err(Error::NotSurjective { rank: r, k: blocks.k() });
    }
    Ok(())
}

pub fn compute_mstar(pi: &RationalMatrix, blocks: &BlockStructure, d: &DimensionVector) -> Result<MStarResult> {
    if blocks.n() > MAX_BLOCKS {
        return Err(Error::TooManyBlocks { n: blocks.n(), cap: MAX_BLOCKS });
    }
    d.check_len(blocks)?;
    check_surjective(pi, blocks)?;
    let dims = complement_dims(pi, blocks)?;

    let per_subset: Vec<SubsetValue> = BlockSet::nonempty(blocks.n())
        .map(|s| SubsetValue { subset: s, value: d.sum_over(s) + int(dims[s.0 as usize] as i64) })
        .collect();
    let value = per_subset.iter().map(|r| &r.value).min().expect("n ≥ 1").clone();
    let minimizers = per_subset.iter().filter(|r| r.value == value).map(|r| r.subset).collect();
    Ok(MStarResult { value, minimizers, per_subset })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transversality {
    pub holds: bool,
    pub failing: Vec<BlockSet>,
}

/// Checks `dim π(⊕_{i∈I} ℝ^{m_i}) = min(k, Σ_{i∈I} m_i)` for every `I`.
pub fn check_transversality(pi: &RationalMatrix, blocks: &BlockStructure) -> Result<Transversality> {
    blocks.check_matrix(pi)?;
    let mut failing = Vec::new();
    for s in BlockSet::all(blocks.n()) {
        let span: usize = s.iter().map(|i| blocks.size(i)).sum();
        if image_dim(pi, blocks, s)? != span.min(blocks.k()) {
            failing.push(s);
        }
    }
    Ok(Transversality { holds: failing.is_empty(), failing })
}

/// Where 𝔪 sits relative to the integers `0 … k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GapClass {
    /// 𝔪 ≥ k.
    AboveK,
    /// `k′ − 1 < 𝔪 < k′` with `1 ≤ k′ ≤ k`.
    Fractional { k_prime: usize },
    /// 𝔪 ∈ {0, 1, …, k − 1}.
    ForbiddenInteger,
}

pub fn gap_class(mstar: &Rational, k: usize) -> GapClass {
    if *mstar >= int(k as i64) {
        GapClass::AboveK
    } else if mstar.is_integer() {
        GapClass::ForbiddenInteger
    } else {
        let k_prime: BigInt = mstar.ceil().to_integer();
        GapClass::Fractional { k_prime: k_prime.to_usize().expect("0 < 𝔪 < k") }
    }
}

pub fn mstar_gap_class(result: &MStarResult, k: usize) -> GapClass {
    gap_class(&result.value, k)
}

/// The right-hand side of the upper bound on the projection dimension,
/// `min` over all `I` including `∅` (which contributes `rank π`).
pub fn projection_dim_bound(pi: &RationalMatrix, blocks: &BlockStructure, d: &DimensionVector) -> Result<Rational> {
    let m = compute_mstar(pi, blocks, d)?;
    let full = int(rank(pi) as i64);
    Ok(if m.value < full { m.value } else { full })
}

impl MStarResult {
    pub fn is_positive(&self) -> bool {
        !self.value.is_zero()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactlin::rat;
    use alloc::vec;

    fn dv(v: &[(i64, i64)]) -> DimensionVector {
        DimensionVector::new(v.iter().map(|&(p, q)| rat(p, q)).collect()).unwrap()
    }

    #[test]
    fn sum_instance() {
        let pi = RationalMatrix::from_i64_rows(&[&[1, 1]]);
        let b = BlockStructure::new(vec![1, 1], 1).unwrap();
        let r = compute_mstar(&pi, &b, &dv(&[(3, 5), (7, 10)])).unwrap();
        assert_eq!(r.value, rat(13, 10));
        assert_eq!(r.minimizers, vec![BlockSet::full(2)]);
        assert_eq!(r.per_subset.len(), 3);
        assert_eq!(r.per_subset[0].value, rat(8, 5));
        assert_eq!(r.per_subset[1].value, rat(17, 10));
    }

    #[test]
    fn single_block_identity() {
        let pi = RationalMatrix::identity(3);
        let b = BlockStructure::new(vec![3], 3).unwrap();
        let r = compute_mstar(&pi, &b, &dv(&[(5, 2)])).unwrap();
        assert_eq!(r.value, rat(5, 2));
        assert_eq!(r.minimizers, vec![BlockSet::singleton(0)]);
    }

    #[test]
    fn dead_block() {
        let pi = RationalMatrix::from_i64_rows(&[&[1, 0]]);
        let b = BlockStructure::new(vec![1, 1], 1).unwrap();
        let r = compute_mstar(&pi, &b, &dv(&[(1, 2), (1, 2)])).unwrap();
        assert_eq!(r.value, rat(1, 2));
        assert_eq!(r.minimizers, vec![BlockSet::singleton(0)]);
    }

    #[test]
    fn ties_are_all_reported() {
        let pi = RationalMatrix::from_i64_rows(&[&[1, 1]]);
        let b = BlockStructure::new(vec![1, 1], 1).unwrap();
        // 1/2 + 1, 1 + 1, 3/2: subsets {1} and {1,2} tie
        let r = compute_mstar(&pi, &b, &dv(&[(1, 2), (1, 1)])).unwrap();
        assert_eq!(r.value, rat(3, 2));
        assert_eq!(r.minimizers, vec![BlockSet::singleton(0), BlockSet::full(2)]);
    }

    #[test]
    fn surjectivity_and_caps() {
        let pi = RationalMatrix::from_i64_rows(&[&[1, 1], &[2, 2]]);
        let b = BlockStructure::new(vec![1, 1], 2).unwrap();
        let err = compute_mstar(&pi, &b, &dv(&[(1, 2), (1, 2)])).unwrap_err();
        assert_eq!(err, Error::NotSurjective { rank: 1, k: 2 });

        let pi = RationalMatrix::from_i64_rows(&[&[1; 9]]);
        let b = BlockStructure::new(vec![1; 9], 1).unwrap();
        let d = DimensionVector::new(vec![rat(1, 2); 9]).unwrap();
        assert!(matches!(compute_mstar(&pi, &b, &d), Err(Error::TooManyBlocks { n: 9, .. })));
        assert!(DimensionVector::new(vec![rat(-1, 2)]).is_err());
    }

    #[test]
    fn transversality_examples() {
        let b = BlockStructure::new(vec![1, 1], 1).unwrap();
        let t = check_transversality(&RationalMatrix::from_i64_rows(&[&[1, 1]]), &b).unwrap();
        assert!(t.holds);
        let t = check_transversality(&RationalMatrix::from_i64_rows(&[&[1, 0]]), &b).unwrap();
        assert!(!t.holds);
        assert_eq!(t.failing, vec![BlockSet::singleton(1)]);
        let b2 = BlockStructure::new(vec![1, 1], 2).unwrap();
        assert!(check_transversality(&RationalMatrix::identity(2), &b2).unwrap().holds);
    }

    #[test]
    fn gap_classes() {
        assert_eq!(gap_class(&rat(13, 10), 1), GapClass::AboveK);
        assert_eq!(gap_class(&rat(4, 5), 1), GapClass::Fractional { k_prime: 1 });
        assert_eq!(gap_class(&int(1), 2), GapClass::ForbiddenInteger);
        assert_eq!(gap_class(&int(0), 1), GapClass::ForbiddenInteger);
        assert_eq!(gap_class(&int(2), 2), GapClass::AboveK);
        assert_eq!(gap_class(&rat(3, 2), 3), GapClass::Fractional { k_prime: 2 });
    }

    #[test]
    fn bound_includes_empty_subset() {
        let pi = RationalMatrix::from_i64_rows(&[&[1, 1]]);
        let b = BlockStructure::new(vec![1, 1], 1).unwrap();
        assert_eq!(projection_dim_bound(&pi, &b, &dv(&[(3, 5), (7, 10)])).unwrap(), int(1));
        assert_eq!(projection_dim_bound(&pi, &b, &dv(&[(2, 5), (2, 5)])).unwrap(), rat(4, 5));
    }
}
