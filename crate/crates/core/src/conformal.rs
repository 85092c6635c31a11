//! The parameter space Λ = Λ_{m_1} × … × Λ_{m_n} of conformal maps
//! `x^i ↦ t_i O_i x^i`, with `t_i ∈ ℝ` and `O_i ∈ SO(m_i)`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::exactlin::{BlockStructure, RationalMatrix};

/// Square orthogonal matrix with determinant `+1`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Rotation {
    dim: usize,
    entries: Vec<f64>,
}

impl Rotation {
    pub fn identity(dim: usize) -> Self {
        let mut entries = vec![0.0; dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = 1.0;
        }
        Rotation { dim, entries }
    }

    /// Takes `entries` as given; callers are responsible for orthogonality.
    pub fn from_entries(dim: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::ShapeMismatch { expected: dim * dim, got: entries.len() });
        }
        Ok(Rotation { dim, entries })
    }

    /// Planar rotation by `angle`.
    pub fn planar(angle: f64) -> Self {
        let (s, c) = (libm::sin(angle), libm::cos(angle));
        Rotation { dim: 2, entries: vec![c, -s, s, c] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.entries[r * self.dim + c]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dim).map(|r| (0..self.dim).map(|c| self.get(r, c) * x[c]).sum()).collect()
    }

    pub fn compose(&self, other: &Rotation) -> Rotation {
        let n = self.dim;
        let mut entries = vec![0.0; n * n];
        for r in 0..n {
            for c in 0..n {
                entries[r * n + c] = (0..n).map(|j| self.get(r, j) * other.get(j, c)).sum();
            }
        }
        Rotation { dim: n, entries }
    }

    /// `max |OᵀO − I|`.
    pub fn orthogonality_defect(&self) -> f64 {
        let n = self.dim;
        let mut worst: f64 = 0.0;
        for a in 0..n {
            for b in 0..n {
                let dot: f64 = (0..n).map(|r| self.get(r, a) * self.get(r, b)).sum();
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max(libm::fabs(dot - target));
            }
        }
        worst
    }

    pub fn determinant(&self) -> f64 {
        determinant(self.dim, &self.entries)
    }
}

/// Determinant by partial-pivot elimination.
fn determinant(n: usize, entries: &[f64]) -> f64 {
    let mut a = entries.to_vec();
    let mut det = 1.0;
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| libm::fabs(a[i * n + c]).total_cmp(&libm::fabs(a[j * n + c]))).unwrap();
        if a[p * n + c] == 0.0 {
            return 0.0;
        }
        if p != c {
            for j in 0..n {
                a.swap(p * n + j, c * n + j);
            }
            det = -det;
        }
        let pv = a[c * n + c];
        det *= pv;
        for r in c + 1..n {
            let f = a[r * n + c] / pv;
            for j in c..n {
                a[r * n + j] -= f * a[c * n + j];
            }
        }
    }
    det
}

/// Haar-distributed element of SO(m).
///
/// Gaussian matrix → QR with positive diagonal in `R` (Gram–Schmidt with one
/// reorthogonalization pass) → first column negated if the determinant is −1.
pub fn haar_rotation<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Rotation {
    assert!(m >= 1, "SO(0) is not supported");
    if m == 1 {
        return Rotation::identity(1);
    }
    // cols[j] is column j of the Gaussian matrix.
    let mut cols: Vec<Vec<f64>> = (0..m).map(|_| (0..m).map(|_| StandardNormal.sample(rng)).collect()).collect();
    for j in 0..m {
        for _ in 0..2 {
            for i in 0..j {
                let dot: f64 = (0..m).map(|r| cols[i][r] * cols[j][r]).sum();
                for r in 0..m {
                    cols[j][r] -= dot * cols[i][r];
                }
            }
        }
        let norm = libm::sqrt(cols[j].iter().map(|v| v * v).sum::<f64>());
        for v in cols[j].iter_mut() {
            *v /= norm;
        }
    }
    let mut entries = vec![0.0; m * m];
    for (c, col) in cols.iter().enumerate() {
        for r in 0..m {
            entries[r * m + c] = col[r];
        }
    }
    if determinant(m, &entries) < 0.0 {
        for r in 0..m {
            entries[r * m] = -entries[r * m];
        }
    }
    Rotation { dim: m, entries }
}

/// Law of the scalars `t_i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TLaw {
    /// Density ∝ `|t|^{m-1} e^{-t²/2}` on ℝ for a block of dimension `m`.
    Chi,
    /// Uniform on `[lo, hi]`.
    Uniform { lo: f64, hi: f64 },
}

impl TLaw {
    /// Default for the almost-every-λ experiments, away from `t = 0`.
    pub const EXPERIMENT_DEFAULT: TLaw = TLaw::Uniform { lo: 0.5, hi: 2.0 };

    pub fn validate(&self) -> Result<()> {
        match *self {
            TLaw::Chi => Ok(()),
            TLaw::Uniform { lo, hi } => {
                if lo.is_finite() && hi.is_finite() && lo < hi {
                    Ok(())
                } else {
                    Err(Error::InvalidInterval { lo, hi })
                }
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, m: usize, rng: &mut R) -> f64 {
        match *self {
            TLaw::Chi => {
                let r2: f64 = (0..m).map(|_| {
                    let g: f64 = StandardNormal.sample(rng);
                    g * g
                }).sum();
                let r = libm::sqrt(r2);
                if rng.random::<bool>() { r } else { -r }
            }
            TLaw::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
        }
    }
}

impl FromStr for TLaw {
    type Err = Error;

    /// `chi` or `uniform:a,b`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "chi" {
            return Ok(TLaw::Chi);
        }
        let bad = || Error::Malformed(format!("t-law must be `chi` or `uniform:a,b`, got {s:?}"));
        let rest = s.strip_prefix("uniform:").ok_or_else(bad)?;
        let (a, b) = rest.split_once(',').ok_or_else(bad)?;
        let lo: f64 = a.trim().parse().map_err(|_| bad())?;
        let hi: f64 = b.trim().parse().map_err(|_| bad())?;
        let law = TLaw::Uniform { lo, hi };
        law.validate()?;
        Ok(law)
    }
}

impl core::fmt::Display for TLaw {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            TLaw::Chi => write!(f, "chi"),
            TLaw::Uniform { lo, hi } => write!(f, "uniform:{lo},{hi}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockParameter {
    pub t: f64,
    pub rotation: Rotation,
}

/// λ = (t₁, O₁, …, tₙ, Oₙ).
#[derive(Debug, Clone, PartialEq)]
pub struct ConformalParameter {
    pub blocks: Vec<BlockParameter>,
}

impl ConformalParameter {
    pub fn identity(blocks: &BlockStructure) -> Self {
        Self::scalars(blocks, &vec![1.0; blocks.n()])
    }

    /// Identity rotations with the given scalars.
    pub fn scalars(blocks: &BlockStructure, t: &[f64]) -> Self {
        ConformalParameter {
            blocks: blocks
                .sizes()
                .iter()
                .zip(t)
                .map(|(&m, &t)| BlockParameter { t, rotation: Rotation::identity(m) })
                .collect(),
        }
    }

    pub fn t(&self) -> Vec<f64> {
        self.blocks.iter().map(|b| b.t).collect()
    }

    pub fn check(&self, blocks: &BlockStructure) -> Result<()> {
        if self.blocks.len() != blocks.n() {
            return Err(Error::ShapeMismatch { expected: blocks.n(), got: self.blocks.len() });
        }
        for (b, &m) in self.blocks.iter().zip(blocks.sizes()) {
            if b.rotation.dim() != m {
                return Err(Error::ShapeMismatch { expected: m, got: b.rotation.dim() });
            }
        }
        Ok(())
    }
}

pub fn sample_lambda<R: Rng + ?Sized>(blocks: &BlockStructure, rng: &mut R, law: TLaw) -> Result<ConformalParameter> {
    law.validate()?;
    let params = blocks
        .sizes()
        .iter()
        .map(|&m| {
            let t = law.sample(m, rng);
            BlockParameter { t, rotation: haar_rotation(m, rng) }
        })
        .collect();
    Ok(ConformalParameter { blocks: params })
}

/// `ρ(λ) = Π |t_i|^{m_i − 1} · exp(−½ Σ t_i²)`, with `0⁰ = 1`.
pub fn rho(lambda: &ConformalParameter, blocks: &BlockStructure) -> f64 {
    let mut prod = 1.0;
    let mut sq = 0.0;
    for (b, &m) in lambda.blocks.iter().zip(blocks.sizes()) {
        prod *= libm::pow(libm::fabs(b.t), (m - 1) as f64);
        sq += b.t * b.t;
    }
    prod * libm::exp(-0.5 * sq)
}

/// Total mass `∫_ℝ |t|^{m−1} e^{−t²/2} dt = 2^{m/2} Γ(m/2)` of one factor of ρ.
pub fn block_weight_mass(m: usize) -> f64 {
    let h = 0.5 * m as f64;
    libm::pow(2.0, h) * libm::tgamma(h)
}

/// `π` in binary64 together with its block structure.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionMap {
    pub blocks: BlockStructure,
    entries: Vec<f64>,
}

impl ProjectionMap {
    pub fn new(pi: &RationalMatrix, blocks: &BlockStructure) -> Result<Self> {
        blocks.check_matrix(pi)?;
        Ok(ProjectionMap { blocks: blocks.clone(), entries: pi.to_f64() })
    }

    pub fn k(&self) -> usize {
        self.blocks.k()
    }

    pub fn total_dim(&self) -> usize {
        self.blocks.total_dim()
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.entries[r * self.total_dim() + c]
    }

    /// `π ∘ diag(t_1 O_1, …, t_n O_n)` as a `k × Σm_i` matrix.
    pub fn compose(&self, lambda: &ConformalParameter) -> Result<LinearMap> {
        lambda.check(&self.blocks)?;
        let (k, total) = (self.k(), self.total_dim());
        let mut out = vec![0.0; k * total];
        for (i, b) in lambda.blocks.iter().enumerate() {
            let cols = self.blocks.columns(i);
            let m = cols.len();
            for r in 0..k {
                for c in 0..m {
                    let v: f64 = (0..m).map(|j| self.get(r, cols.start + j) * b.rotation.get(j, c)).sum();
                    out[r * total + cols.start + c] = b.t * v;
                }
            }
        }
        Ok(LinearMap { rows: k, cols: total, entries: out })
    }

    pub fn identity_map(&self) -> LinearMap {
        LinearMap { rows: self.k(), cols: self.total_dim(), entries: self.entries.clone() }
    }
}

/// Dense binary64 linear map.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMap {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<f64>,
}

impl LinearMap {
    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate().take(self.rows) {
            let row = &self.entries[r * self.cols..(r + 1) * self.cols];
            *o = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::ShapeMismatch { expected: self.cols, got: x.len() });
        }
        let mut out = vec![0.0; self.rows];
        self.apply_into(x, &mut out);
        Ok(out)
    }

    /// Applies the map to a flat list of points of dimension `cols`.
    pub fn apply_all(&self, points: &[f64]) -> Vec<f64> {
        let n = points.len() / self.cols.max(1);
        let mut out = vec![0.0; n * self.rows];
        for (p, o) in points.chunks_exact(self.cols).zip(out.chunks_exact_mut(self.rows)) {
            self.apply_into(p, o);
        }
        out
    }
}

/// `π_λ(x) = π(t_1 O_1 x^1, …, t_n O_n x^n)`.
pub fn apply_pi_lambda(map: &ProjectionMap, lambda: &ConformalParameter, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != map.total_dim() {
        return Err(Error::ShapeMismatch { expected: map.total_dim(), got: x.len() });
    }
    lambda.check(&map.blocks)?;
    let mut scaled = Vec::with_capacity(x.len());
    for (i, b) in lambda.blocks.iter().enumerate() {
        let rotated = b.rotation.apply(&x[map.blocks.columns(i)]);
        scaled.extend(rotated.into_iter().map(|v| b.t * v));
    }
    map.identity_map().apply(&scaled)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{stream_rng, Moments};

    fn sum_map() -> ProjectionMap {
        let pi = RationalMatrix::from_i64_rows(&[&[1, 1]]);
        ProjectionMap::new(&pi, &BlockStructure::new(vec![1, 1], 1).unwrap()).unwrap()
    }

    #[test]
    fn rotations_are_special_orthogonal() {
        let mut rng = stream_rng(1, 0);
        assert_eq!(haar_rotation(1, &mut rng), Rotation::identity(1));
        for m in 2..=5 {
            for _ in 0..200 {
                let o = haar_rotation(m, &mut rng);
                assert!(o.orthogonality_defect() <= 1e-12);
                assert!(o.determinant() > 0.0);
            }
        }
    }

    #[test]
    fn haar_top_left_mean_is_zero() {
        let mut rng = stream_rng(2, 0);
        let mut mom = Moments::default();
        for _ in 0..100_000 {
            mom.push(haar_rotation(2, &mut rng).get(0, 0));
        }
        assert!(mom.mean().abs() <= 3.0 * mom.stderr(), "{} ± {}", mom.mean(), mom.stderr());
    }

    #[test]
    fn pi_lambda_examples() {
        let map = sum_map();
        let b = map.blocks.clone();
        let x = [0.3, -1.25];
        assert_eq!(apply_pi_lambda(&map, &ConformalParameter::identity(&b), &x).unwrap(), vec![0.3 - 1.25]);
        assert_eq!(apply_pi_lambda(&map, &ConformalParameter::scalars(&b, &[0.0, 0.0]), &x).unwrap(), vec![0.0]);
        let y = apply_pi_lambda(&map, &ConformalParameter::scalars(&b, &[2.0, 3.0]), &x).unwrap();
        assert!((y[0] - (0.6 - 3.75)).abs() < 1e-15);
        assert!(matches!(apply_pi_lambda(&map, &ConformalParameter::identity(&b), &[1.0]), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn compose_agrees_with_direct_application() {
        let pi = RationalMatrix::from_i64_rows(&[&[1, 0, 2], &[0, 1, -1]]);
        let b = BlockStructure::new(vec![2, 1], 2).unwrap();
        let map = ProjectionMap::new(&pi, &b).unwrap();
        let mut rng = stream_rng(3, 0);
        let lambda = sample_lambda(&b, &mut rng, TLaw::Chi).unwrap();
        let x = [0.1, -0.7, 2.0];
        let a = apply_pi_lambda(&map, &lambda, &x).unwrap();
        let c = map.compose(&lambda).unwrap().apply(&x).unwrap();
        for (u, v) in a.iter().zip(&c) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn rho_examples() {
        let b = BlockStructure::new(vec![1, 1], 1).unwrap();
        assert_eq!(rho(&ConformalParameter::scalars(&b, &[0.0, 0.0]), &b), 1.0);
        let b2 = BlockStructure::new(vec![2], 1).unwrap();
        let r = rho(&ConformalParameter::scalars(&b2, &[1.0]), &b2);
        assert!((r - libm::exp(-0.5)).abs() < 1e-15);
        assert_eq!(rho(&ConformalParameter::scalars(&b2, &[0.0]), &b2), 0.0);
        let plus = rho(&ConformalParameter::scalars(&b2, &[1.3]), &b2);
        let minus = rho(&ConformalParameter::scalars(&b2, &[-1.3]), &b2);
        assert_eq!(plus, minus);
    }

    #[test]
    fn t_law_moments() {
        let mut rng = stream_rng(4, 0);
        let mut abs_t = Moments::default();
        for _ in 0..100_000 {
            abs_t.push(TLaw::Chi.sample(1, &mut rng).abs());
        }
        let target = libm::sqrt(2.0 / core::f64::consts::PI);
        assert!((abs_t.mean() - target).abs() <= 3.0 * abs_t.stderr());

        let mut t2 = Moments::default();
        for _ in 0..100_000 {
            let t = TLaw::Chi.sample(2, &mut rng);
            t2.push(t * t);
        }
        assert!((t2.mean() - 2.0).abs() <= 3.0 * t2.stderr());

        let law = TLaw::Uniform { lo: 1.0, hi: 2.0 };
        for _ in 0..10_000 {
            let t = law.sample(3, &mut rng);
            assert!((1.0..=2.0).contains(&t));
        }
    }

    #[test]
    fn t_law_parsing_and_validation() {
        assert_eq!("chi".parse::<TLaw>().unwrap(), TLaw::Chi);
        assert_eq!("uniform:0.5,2".parse::<TLaw>().unwrap(), TLaw::Uniform { lo: 0.5, hi: 2.0 });
        assert!(matches!("uniform:2,1".parse::<TLaw>(), Err(Error::InvalidInterval { .. })));
        assert!("normal".parse::<TLaw>().is_err());
        let b = BlockStructure::new(vec![1], 1).unwrap();
        let mut rng = stream_rng(5, 0);
        assert!(sample_lambda(&b, &mut rng, TLaw::Uniform { lo: 1.0, hi: 1.0 }).is_err());
    }

    #[test]
    fn block_mass_values() {
        assert!((block_weight_mass(1) - libm::sqrt(2.0 * core::f64::consts::PI)).abs() < 1e-14);
        assert!((block_weight_mass(2) - 2.0).abs() < 1e-14);
        assert!((block_weight_mass(3) - libm::sqrt(2.0 * core::f64::consts::PI)).abs() < 1e-14);
    }
}
