//! Seeded random instances for the randomized checks.

use alloc::vec::Vec;

use rand::Rng;

use crate::exactlin::{rank, rat, BlockStructure, Rational, RationalMatrix};
use crate::weights::Polyhedron;

/// A surjective `π` with `n ≤ 3` blocks of dimension `≤ 3`, entries in `[−2, 2]`
/// with denominators `≤ 4`, and `s ∈ {1/2, 1, 3/2, 2}` with `s ≤ k`.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomInstance {
    pub pi: RationalMatrix,
    pub blocks: BlockStructure,
    pub s: Rational,
}

pub fn random_rational<R: Rng + ?Sized>(rng: &mut R, bound: i64, max_denom: i64) -> Rational {
    let q = rng.random_range(1..=max_denom);
    let p = rng.random_range(-bound * q..=bound * q);
    rat(p, q)
}

pub fn random_instance<R: Rng + ?Sized>(rng: &mut R) -> RandomInstance {
    loop {
        let n = rng.random_range(1..=3usize);
        let sizes: Vec<usize> = (0..n).map(|_| rng.random_range(1..=3usize)).collect();
        let total: usize = sizes.iter().sum();
        let k = rng.random_range(1..=total.min(3));
        let entries = (0..k * total).map(|_| random_rational(rng, 2, 4)).collect();
        let pi = RationalMatrix::from_entries(k, total, entries).expect("shape by construction");
        if rank(&pi) < k {
            continue;
        }
        let choices: Vec<Rational> = [(1, 2), (1, 1), (3, 2), (2, 1)]
            .iter()
            .map(|&(p, q)| rat(p, q))
            .filter(|s| *s <= rat(k as i64, 1))
            .collect();
        let s = choices[rng.random_range(0..choices.len())].clone();
        let blocks = BlockStructure::new(sizes, k).expect("valid sizes");
        return RandomInstance { pi, blocks, s };
    }
}

/// Point with coordinates `p/q`, `0 ≤ p/q ≤ bound`, `q ≤ max_denom`.
pub fn random_point<R: Rng + ?Sized>(rng: &mut R, n: usize, bound: i64, max_denom: i64) -> Vec<Rational> {
    (0..n)
        .map(|_| {
            let q = rng.random_range(1..=max_denom);
            rat(rng.random_range(0..=bound * q), q)
        })
        .collect()
}

/// Rejection sample from `P ∩ [0, bound]^n`; `None` after `tries` misses.
pub fn random_point_in<R: Rng + ?Sized>(rng: &mut R, poly: &Polyhedron, bound: i64, max_denom: i64, tries: usize) -> Option<Vec<Rational>> {
    (0..tries).map(|_| random_point(rng, poly.n(), bound, max_denom)).find(|x| poly.contains(x))
}
