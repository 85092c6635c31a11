//! Exact phase-one simplex for `A x = b, x ≥ 0`.
//!
//! Dense tableau over the rationals with Bland's rule, which terminates
//! without any cycling safeguard beyond the index ordering.

use alloc::vec;
use alloc::vec::Vec;

use num_traits::{Signed, Zero};

use crate::exactlin::{Rational, RationalMatrix};

/// Outcome of an exact feasibility problem.
#[derive(Debug, Clone, PartialEq)]
pub enum Feasibility {
    /// A basic feasible solution.
    Feasible(Vec<Rational>),
    Infeasible,
}

impl Feasibility {
    pub fn solution(&self) -> Option<&[Rational]> {
        match self {
            Feasibility::Feasible(x) => Some(x),
            Feasibility::Infeasible => None,
        }
    }
}

/// Finds `x ≥ 0` with `a x = b`, or proves none exists.
pub fn feasible_point(a: &RationalMatrix, b: &[Rational]) -> Feasibility {
    let m = a.rows();
    let n = a.cols();
    assert_eq!(b.len(), m, "right-hand side length must match the row count");

    // Columns 0..n are structural, n..n+m artificial, the last is the rhs.
    let width = n + m + 1;
    let mut t: Vec<Vec<Rational>> = Vec::with_capacity(m);
    for r in 0..m {
        let flip = b[r].is_negative();
        let mut row = vec![Rational::zero(); width];
        for c in 0..n {
            row[c] = if flip { -a.get(r, c) } else { a.get(r, c).clone() };
        }
        row[n + r] = Rational::from_integer(1.into());
        row[width - 1] = if flip { -&b[r] } else { b[r].clone() };
        t.push(row);
    }
    let mut basis: Vec<usize> = (n..n + m).collect();

    // Reduced costs of the phase-one objective (sum of artificials).
    let mut cost = vec![Rational::zero(); width];
    for row in &t {
        for c in 0..n {
            cost[c] -= &row[c];
        }
        cost[width - 1] -= &row[width - 1];
    }

    loop {
        let Some(enter) = (0..n + m).find(|&c| cost[c].is_negative()) else { break };

        let mut leave: Option<(usize, Rational)> = None;
        for r in 0..m {
            if !t[r][enter].is_positive() {
                continue;
            }
            let ratio = &t[r][width - 1] / &t[r][enter];
            let better = match &leave {
                None => true,
                Some((lr, best)) => ratio < *best || (ratio == *best && basis[r] < basis[*lr]),
            };
            if better {
                leave = Some((r, ratio));
            }
        }
        // Phase one is bounded below by zero, so an entering column always
        // has a positive entry.
        let (pr, _) = leave.expect("phase-one objective is bounded");
        pivot(&mut t, &mut cost, pr, enter);
        basis[pr] = enter;
    }

    if !cost[width - 1].is_zero() {
        return Feasibility::Infeasible;
    }
    let mut x = vec![Rational::zero(); n];
    for (r, &var) in basis.iter().enumerate() {
        if var < n {
            x[var] = t[r][width - 1].clone();
        }
    }
    Feasibility::Feasible(x)
}

fn pivot(t: &mut [Vec<Rational>], cost: &mut [Rational], pr: usize, pc: usize) {
    let inv = t[pr][pc].recip();
    for v in t[pr].iter_mut() {
        *v *= &inv;
    }
    let pivot_row = t[pr].clone();
    for (r, row) in t.iter_mut().enumerate() {
        if r == pr || row[pc].is_zero() {
            continue;
        }
        let f = row[pc].clone();
        for (v, p) in row.iter_mut().zip(&pivot_row) {
            if !p.is_zero() {
                *v -= p * &f;
            }
        }
    }
    if !cost[pc].is_zero() {
        let f = cost[pc].clone();
        for (v, p) in cost.iter_mut().zip(&pivot_row) {
            if !p.is_zero() {
                *v -= p * &f;
            }
        }
    }
}
