//! Energies and Fourier transforms of discrete measures, the Gaussian
//! averaging over Λ, and the kernel integral
//!
//! ```text
//! K(x, y) = ∫_{ℝ^k} |ξ|^{𝔪−k} exp(−½ |D_{x,y} ξ|²) dξ,
//! D_{x,y} = diag(|y¹−x¹| Id, …, |yⁿ−xⁿ| Id) ∘ πᵀ,
//! ```
//!
//! together with the exponent vector `d′ ≤ d` for which
//! `K(x, y) · Π z_i^{d′_i}` stays bounded.
//!
//! In polar coordinates `K = 2^{𝔪/2−1} Γ(𝔪/2) ∫_{S^{k−1}} q(θ)^{−𝔪/2} dθ`
//! with `q(θ) = θᵀ Q θ`, `Q = Σ_i z_i² π_i π_iᵀ`, so the radial singularity
//! is integrated in closed form and only a smooth sphere quadrature remains.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use num_traits::Zero;

use crate::conformal::{block_weight_mass, haar_rotation, sample_lambda, ProjectionMap, TLaw};
use crate::error::{Error, Result};
use crate::exactlin::{int, to_f64, BlockStructure, Rational, RationalMatrix};
use crate::mstar::{compute_mstar, gap_class, DimensionVector, GapClass, MStarResult};
use crate::numeric::{gauss_legendre, stream_rng, CompensatedSum, Moments};
use crate::weights::{find_weights, WeightAssignment, WeightsInstance};

/// Finite weighted atom cloud in `ℝ^{m_1} × … × ℝ^{m_n}`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    blocks: Vec<usize>,
    atoms: Vec<f64>,
    masses: Vec<f64>,
    product: bool,
}

impl DiscreteMeasure {
    /// `atoms` is flat, one point of dimension `Σ blocks` after another.
    pub fn new(blocks: Vec<usize>, atoms: Vec<f64>, masses: Vec<f64>) -> Result<Self> {
        let dim: usize = blocks.iter().sum();
        if blocks.is_empty() || dim == 0 {
            return Err(Error::Malformed("measure needs a positive ambient dimension".into()));
        }
        if atoms.len() != dim * masses.len() {
            return Err(Error::ShapeMismatch { expected: dim * masses.len(), got: atoms.len() });
        }
        if masses.is_empty() || masses.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
            return Err(Error::Malformed("masses must be positive and finite".into()));
        }
        Ok(DiscreteMeasure { blocks, atoms, masses, product: false })
    }

    pub fn point_mass(point: Vec<f64>, mass: f64) -> Result<Self> {
        Self::new(vec![point.len()], point, vec![mass])
    }

    pub(crate) fn mark_product(mut self) -> Self {
        self.product = true;
        self
    }

    /// Whether this measure was built as a product of factor measures.
    pub fn is_product(&self) -> bool {
        self.product
    }

    pub fn blocks(&self) -> &[usize] {
        &self.blocks
    }

    pub fn dim(&self) -> usize {
        self.blocks.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn atom(&self, j: usize) -> &[f64] {
        let d = self.dim();
        &self.atoms[j * d..(j + 1) * d]
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn mass(&self, j: usize) -> f64 {
        self.masses[j]
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().copied().collect::<CompensatedSum>().value()
    }

    /// Per-block Euclidean distances `z_i = |y^i − x^i|` between atoms `j` and `l`.
    pub fn block_distances(&self, j: usize, l: usize, out: &mut [f64]) {
        let (a, b) = (self.atom(j), self.atom(l));
        let mut start = 0;
        for (i, &m) in self.blocks.iter().enumerate() {
            out[i] = euclid(&a[start..start + m], &b[start..start + m]);
            start += m;
        }
    }

    /// Image under a linear map; the result has a single block.
    pub fn pushforward(&self, map: &crate::conformal::LinearMap) -> Result<Self> {
        if map.cols != self.dim() {
            return Err(Error::ShapeMismatch { expected: self.dim(), got: map.cols });
        }
        Ok(DiscreteMeasure { blocks: vec![map.rows], atoms: map.apply_all(&self.atoms), masses: self.masses.clone(), product: false })
    }
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    libm::sqrt(a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>())
}

/// `μ̂(ξ) = Σ_j m_j e^{−i ξ·x_j}`.
pub fn fourier(measure: &DiscreteMeasure, xi: &[f64]) -> Result<Complex64> {
    if xi.len() != measure.dim() {
        return Err(Error::ShapeMismatch { expected: measure.dim(), got: xi.len() });
    }
    let mut re = CompensatedSum::new();
    let mut im = CompensatedSum::new();
    for j in 0..measure.len() {
        let phase: f64 = measure.atom(j).iter().zip(xi).map(|(a, b)| a * b).sum();
        re.add(measure.mass(j) * libm::cos(phase));
        im.add(-measure.mass(j) * libm::sin(phase));
    }
    Ok(Complex64::new(re.value(), im.value()))
}

/// Value of an energy double sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Energy {
    Finite(f64),
    Infinite,
}

impl Energy {
    pub fn value(&self) -> Option<f64> {
        match self {
            Energy::Finite(v) => Some(*v),
            Energy::Infinite => None,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Energy::Infinite)
    }
}

/// Which off-diagonal atom pairs enter pair sums.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PairPolicy {
    /// Every pair `j ≠ l`.
    #[default]
    ExcludeDiagonal,
    /// Only pairs with `y^i ≠ x^i` in every block.
    DistinctInEveryBlock,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyResult {
    pub energy: Energy,
    /// Ordered off-diagonal pairs left out under the policy.
    pub skipped_pairs: usize,
}

/// `I_s(μ) = Σ_{j≠l} m_j m_l |x_j − x_l|^{−s}`; coinciding atoms make it infinite when `s > 0`.
pub fn energy_s(measure: &DiscreteMeasure, s: f64) -> Energy {
    let n = measure.len();
    let mut acc = CompensatedSum::new();
    for j in 0..n {
        for l in j + 1..n {
            let r = euclid(measure.atom(j), measure.atom(l));
            if r == 0.0 && s > 0.0 {
                return Energy::Infinite;
            }
            acc.add(measure.mass(j) * measure.mass(l) * libm::pow(r, -s));
        }
    }
    Energy::Finite(2.0 * acc.value())
}

/// `I_{d_1…d_n}(μ) = Σ_{j≠l} m_j m_l Π_i |x^i_j − x^i_l|^{−d_i}`.
pub fn energy_vec(measure: &DiscreteMeasure, d: &[f64], policy: PairPolicy) -> Result<EnergyResult> {
    let nb = measure.blocks().len();
    if d.len() != nb {
        return Err(Error::ShapeMismatch { expected: nb, got: d.len() });
    }
    let n = measure.len();
    let mut z = vec![0.0; nb];
    let mut acc = CompensatedSum::new();
    let mut skipped = 0usize;
    for j in 0..n {
        for l in j + 1..n {
            measure.block_distances(j, l, &mut z);
            if policy == PairPolicy::DistinctInEveryBlock && z.iter().any(|&v| v == 0.0) {
                skipped += 2;
                continue;
            }
            let mut w = 1.0;
            for (zi, di) in z.iter().zip(d) {
                if *zi == 0.0 && *di > 0.0 {
                    return Ok(EnergyResult { energy: Energy::Infinite, skipped_pairs: skipped });
                }
                w *= libm::pow(*zi, -di);
            }
            acc.add(measure.mass(j) * measure.mass(l) * w);
        }
    }
    Ok(EnergyResult { energy: Energy::Finite(2.0 * acc.value()), skipped_pairs: skipped })
}

/// Samples per deterministic chunk of the Gaussian averaging estimator.
pub const GAUSSIAN_CHUNK: u64 = 4096;

/// Monte Carlo estimate of
/// `∫_ℝ ∫_{SO(m)} e^{i η·tOz} |t|^{m−1} e^{−t²/2} dΘ dt`
/// divided by `exp(−(|z||η|)²/2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianIdentityEstimate {
    pub ratio: f64,
    pub stderr: f64,
    /// Mean of the imaginary part of the integrand (should vanish).
    pub imag: f64,
    pub imag_stderr: f64,
    pub samples: u64,
}

/// Partial sums `(cos, sin)` of one chunk; chunk `c` draws from stream `c`.
pub fn gaussian_identity_chunk(m: usize, z: &[f64], eta: &[f64], seed: u64, chunk: u64, samples: u64) -> (Moments, Moments) {
    let mut rng = stream_rng(seed, chunk);
    let mut re = Moments::default();
    let mut im = Moments::default();
    for _ in 0..samples {
        let t = TLaw::Chi.sample(m, &mut rng);
        let o = haar_rotation(m, &mut rng);
        let oz = o.apply(z);
        let phase = t * eta.iter().zip(&oz).map(|(a, b)| a * b).sum::<f64>();
        re.push(libm::cos(phase));
        im.push(libm::sin(phase));
    }
    (re, im)
}

/// Combines chunk moments, in chunk order, into the ratio estimate.
pub fn gaussian_identity_finish(m: usize, z: &[f64], eta: &[f64], chunks: &[(Moments, Moments)]) -> GaussianIdentityEstimate {
    let mut re = Moments::default();
    let mut im = Moments::default();
    for (r, i) in chunks {
        re.merge(r);
        im.merge(i);
    }
    let mass = block_weight_mass(m);
    let a = libm::sqrt(z.iter().map(|v| v * v).sum::<f64>()) * libm::sqrt(eta.iter().map(|v| v * v).sum::<f64>());
    let damp = libm::exp(-0.5 * a * a);
    GaussianIdentityEstimate {
        ratio: mass * re.mean() / damp,
        stderr: mass * re.stderr() / damp,
        imag: mass * im.mean(),
        imag_stderr: mass * im.stderr(),
        samples: re.count(),
    }
}

pub fn gaussian_identity_chunks(samples: u64) -> impl Iterator<Item = (u64, u64)> {
    let full = samples / GAUSSIAN_CHUNK;
    let rest = samples % GAUSSIAN_CHUNK;
    (0..full).map(|c| (c, GAUSSIAN_CHUNK)).chain((rest > 0).then_some((full, rest)))
}

pub fn gaussian_identity_ratio(m: usize, z: &[f64], eta: &[f64], samples: u64, seed: u64) -> Result<GaussianIdentityEstimate> {
    if z.len() != m || eta.len() != m {
        return Err(Error::ShapeMismatch { expected: m, got: if z.len() != m { z.len() } else { eta.len() } });
    }
    if samples < 1000 {
        return Err(Error::Precondition(format!("at least 1000 samples required, got {samples}")));
    }
    let chunks: Vec<_> = gaussian_identity_chunks(samples)
        .map(|(c, len)| gaussian_identity_chunk(m, z, eta, seed, c, len))
        .collect();
    Ok(gaussian_identity_finish(m, z, eta, &chunks))
}

/// Quadrature rule on the unit sphere `S^{k−1}` (unnormalized surface measure).
#[derive(Debug, Clone, PartialEq)]
pub struct SphereRule {
    pub k: usize,
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl SphereRule {
    /// `k = 1`: the two points `±1`. `k = 2`: trapezoid with `angular_points`
    /// nodes. `k ≥ 3`: Gauss–Legendre in the polar angle times the rule on
    /// `S^{k−2}` built with twice as many points.
    pub fn new(k: usize, angular_points: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Malformed("sphere dimension k must be positive".into()));
        }
        if k >= 2 && angular_points < 4 {
            return Err(Error::Precondition(format!("at least 4 angular points required, got {angular_points}")));
        }
        Ok(Self::build(k, angular_points))
    }

    fn build(k: usize, p: usize) -> Self {
        match k {
            1 => SphereRule { k, points: vec![1.0, -1.0], weights: vec![1.0, 1.0] },
            2 => {
                let mut points = Vec::with_capacity(2 * p);
                for j in 0..p {
                    let a = 2.0 * PI * j as f64 / p as f64;
                    points.push(libm::cos(a));
                    points.push(libm::sin(a));
                }
                SphereRule { k, points, weights: vec![2.0 * PI / p as f64; p] }
            }
            _ => {
                let sub = Self::build(k - 1, if k == 3 { 2 * p } else { p });
                let (x, w) = gauss_legendre(p);
                let mut points = Vec::new();
                let mut weights = Vec::new();
                for (xj, wj) in x.iter().zip(&w) {
                    let phi = 0.5 * PI * (xj + 1.0);
                    let (s, c) = (libm::sin(phi), libm::cos(phi));
                    let jac = 0.5 * PI * wj * libm::pow(s, (k - 2) as f64);
                    for (q, wq) in sub.points.chunks_exact(k - 1).zip(&sub.weights) {
                        points.push(c);
                        points.extend(q.iter().map(|v| s * v));
                        weights.push(jac * wq);
                    }
                }
                SphereRule { k, points, weights }
            }
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        compensated(self.weights.iter().copied())
    }
}

fn compensated(it: impl Iterator<Item = f64>) -> f64 {
    it.collect::<CompensatedSum>().value()
}

/// `Q = Σ_i z_i² π_i π_iᵀ`, so that `|D_{x,y} ξ|² = ξᵀ Q ξ`.
pub fn quadratic_form(map: &ProjectionMap, z: &[f64]) -> Vec<f64> {
    let k = map.k();
    let mut q = vec![0.0; k * k];
    for (i, &zi) in z.iter().enumerate() {
        let z2 = zi * zi;
        for c in map.blocks.columns(i) {
            for a in 0..k {
                let pa = map.get(a, c);
                for b in 0..k {
                    q[a * k + b] += z2 * pa * map.get(b, c);
                }
            }
        }
    }
    q
}

/// Cholesky with a pivot floor relative to the trace; fails with the smallest pivot.
fn check_positive_definite(q: &[f64], k: usize) -> Result<()> {
    let scale: f64 = (0..k).map(|a| q[a * k + a]).sum();
    let mut l = vec![0.0; k * k];
    for j in 0..k {
        let mut diag = q[j * k + j];
        for p in 0..j {
            diag -= l[j * k + p] * l[j * k + p];
        }
        if !(diag > 1e-13 * scale) {
            return Err(Error::RankDeficient(diag));
        }
        let root = libm::sqrt(diag);
        l[j * k + j] = root;
        for i in j + 1..k {
            let mut v = q[i * k + j];
            for p in 0..j {
                v -= l[i * k + p] * l[j * k + p];
            }
            l[i * k + j] = v / root;
        }
    }
    Ok(())
}

/// `∫ |ξ|^{𝔪−k} e^{−ξᵀQξ/2} dξ` by the polar factorization.
pub fn kernel_from_form(q: &[f64], mstar: f64, rule: &SphereRule) -> Result<f64> {
    let k = rule.k;
    check_positive_definite(q, k)?;
    let radial = libm::pow(2.0, 0.5 * mstar - 1.0) * libm::tgamma(0.5 * mstar);
    let mut acc = CompensatedSum::new();
    for (theta, w) in rule.points.chunks_exact(k).zip(&rule.weights) {
        let mut form = 0.0;
        for a in 0..k {
            let row: f64 = (0..k).map(|b| q[a * k + b] * theta[b]).sum();
            form += theta[a] * row;
        }
        acc.add(w * libm::pow(form, -0.5 * mstar));
    }
    Ok(radial * acc.value())
}

/// Everything about `(π, d)` needed to build kernel instances: 𝔪, its gap
/// class, and `d′` for each possible pivot block.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSetup {
    pub pi: RationalMatrix,
    pub map: ProjectionMap,
    pub d: DimensionVector,
    pub mstar: MStarResult,
    pub class: GapClass,
    /// Above `k`: one entry per pivot `i₀`. Fractional: a single entry.
    pub exponents: Vec<(Vec<Rational>, WeightAssignment)>,
}

impl KernelSetup {
    pub fn new(pi: &RationalMatrix, blocks: &BlockStructure, d: &DimensionVector) -> Result<Self> {
        let mstar = compute_mstar(pi, blocks, d)?;
        let class = gap_class(&mstar.value, blocks.k());
        let k = int(blocks.k() as i64);
        let exponents = match class {
            GapClass::ForbiddenInteger => {
                return Err(Error::Unsupported(format!(
                    "𝔪 = {} is an integer below k = {}",
                    crate::exactlin::format_rational(&mstar.value),
                    blocks.k()
                )))
            }
            GapClass::AboveK => {
                let excess = &mstar.value - &k;
                (0..blocks.n())
                    .map(|pivot| {
                        let mut shifted = d.as_slice().to_vec();
                        shifted[pivot] -= &excess;
                        let inst = WeightsInstance::new(pi.clone(), blocks.clone(), k.clone(), DimensionVector::new(shifted)?)?;
                        let w = find_weights(&inst)?;
                        let mut dprime = w.combination.clone();
                        dprime[pivot] += &excess;
                        Ok((dprime, w))
                    })
                    .collect::<Result<Vec<_>>>()?
            }
            GapClass::Fractional { .. } => {
                let inst = WeightsInstance::new(pi.clone(), blocks.clone(), mstar.value.clone(), d.clone())?;
                let w = find_weights(&inst)?;
                vec![(w.combination.clone(), w)]
            }
        };
        for (dprime, _) in &exponents {
            let ok = dprime.iter().zip(d.as_slice()).all(|(a, b)| !num_traits::Signed::is_negative(a) && a <= b);
            if !ok {
                return Err(Error::Inconsistent("constructed d′ is not within [0, d]".into()));
            }
        }
        Ok(KernelSetup { pi: pi.clone(), map: ProjectionMap::new(pi, blocks)?, d: d.clone(), mstar, class, exponents })
    }

    pub fn blocks(&self) -> &BlockStructure {
        &self.map.blocks
    }

    pub fn mstar_f64(&self) -> f64 {
        to_f64(&self.mstar.value)
    }

    /// `i₀ = argmin z_i` (smallest index on ties) above `k`; `None` otherwise.
    pub fn pivot(&self, z: &[f64]) -> Option<usize> {
        match self.class {
            GapClass::AboveK => {
                let mut best = 0;
                for (i, v) in z.iter().enumerate() {
                    if *v < z[best] {
                        best = i;
                    }
                }
                Some(best)
            }
            _ => None,
        }
    }

    pub fn dprime_for(&self, z: &[f64]) -> &[Rational] {
        &self.exponents[self.pivot(z).unwrap_or(0)].0
    }

    pub fn kernel_for_z(&self, z: &[f64], rule: &SphereRule) -> Result<f64> {
        kernel_from_form(&quadratic_form(&self.map, z), self.mstar_f64(), rule)
    }

    /// `K · Π z_i^{d′_i}`.
    pub fn bound_ratio_for_z(&self, z: &[f64], rule: &SphereRule) -> Result<f64> {
        let kernel = self.kernel_for_z(z, rule)?;
        Ok(kernel * z_power(z, self.dprime_for(z)))
    }

    pub fn instance(&self, x: &[f64], y: &[f64]) -> Result<KernelInstance> {
        let total = self.blocks().total_dim();
        for p in [x, y] {
            if p.len() != total {
                return Err(Error::ShapeMismatch { expected: total, got: p.len() });
            }
        }
        let z: Vec<f64> = (0..self.blocks().n()).map(|i| {
            let cols = self.blocks().columns(i);
            euclid(&x[cols.clone()], &y[cols])
        }).collect();
        if let Some(block) = z.iter().position(|&v| v == 0.0) {
            return Err(Error::DegeneratePair { block });
        }
        let pivot = self.pivot(&z);
        let (dprime, weights) = self.exponents[pivot.unwrap_or(0)].clone();
        Ok(KernelInstance {
            map: self.map.clone(),
            x: x.to_vec(),
            y: y.to_vec(),
            z,
            mstar: self.mstar.value.clone(),
            class: self.class,
            pivot,
            dprime,
            weights,
        })
    }

    /// Instance with `x = 0` and `y^i = z_i e_1` in each block.
    pub fn instance_from_z(&self, z: &[f64]) -> Result<KernelInstance> {
        let b = self.blocks();
        if z.len() != b.n() {
            return Err(Error::ShapeMismatch { expected: b.n(), got: z.len() });
        }
        let x = vec![0.0; b.total_dim()];
        let mut y = x.clone();
        for (i, zi) in z.iter().enumerate() {
            y[b.columns(i).start] = *zi;
        }
        self.instance(&x, &y)
    }
}

fn z_power(z: &[f64], exponents: &[Rational]) -> f64 {
    z.iter().zip(exponents).map(|(zi, e)| libm::pow(*zi, to_f64(e))).product()
}

/// One pair `(x, y)` with its separations, case and exponent vector.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelInstance {
    pub map: ProjectionMap,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub mstar: Rational,
    pub class: GapClass,
    pub pivot: Option<usize>,
    pub dprime: Vec<Rational>,
    pub weights: WeightAssignment,
}

pub fn build_kernel_instance(pi: &RationalMatrix, blocks: &BlockStructure, d: &DimensionVector, x: &[f64], y: &[f64]) -> Result<KernelInstance> {
    KernelSetup::new(pi, blocks, d)?.instance(x, y)
}

pub fn kernel_integral(instance: &KernelInstance, angular_points: usize) -> Result<f64> {
    let rule = SphereRule::new(instance.map.k(), angular_points)?;
    kernel_from_form(&quadratic_form(&instance.map, &instance.z), to_f64(&instance.mstar), &rule)
}

/// `K(x, y) · Π_i z_i^{d′_i}`.
pub fn kernel_bound_ratio(instance: &KernelInstance, angular_points: usize) -> Result<f64> {
    Ok(kernel_integral(instance, angular_points)? * z_power(&instance.z, &instance.dprime))
}

/// How the ξ-integral of the λ-averaged left-hand side is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XiMethod {
    /// λ-average in closed form (Gaussian averaging), then the kernel
    /// integral per atom pair. Deterministic.
    Reduced,
    /// Monte Carlo over λ; for each λ the ξ-integral of the Riesz kernel is
    /// `C(𝔪, k) |π_λ(y − x)|^{−𝔪}`. Only defined for 𝔪 < k.
    RieszMonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LhsOptions {
    pub lambda_samples: u64,
    pub xi_method: XiMethod,
    pub seed: u64,
    pub policy: PairPolicy,
    pub angular_points: usize,
}

impl Default for LhsOptions {
    fn default() -> Self {
        LhsOptions { lambda_samples: 1000, xi_method: XiMethod::Reduced, seed: 0, policy: PairPolicy::ExcludeDiagonal, angular_points: 64 }
    }
}

/// `∫_Λ ∫ |ξ|^{𝔪−k} |ν̂_λ(ξ)|² ρ(λ) dξ dλ` over off-diagonal pairs, and the
/// matching pair sum `Σ m_j m_l z^{−d′}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LhsEstimate {
    pub lhs: f64,
    pub stderr: f64,
    /// `∫ ρ = Π_i 2^{m_i/2} Γ(m_i/2)`.
    pub rho_mass: f64,
    pub rhs: Energy,
    /// `lhs / rhs` when the right side is finite.
    pub ratio: Option<f64>,
    pub pairs_used: usize,
    pub diagonal_pairs: usize,
    pub skipped_pairs: usize,
}

/// `C(s, k)` in `∫_{ℝ^k} |ξ|^{s−k} e^{iξ·v} dξ = C(s, k) |v|^{−s}`, `0 < s < k`.
pub fn riesz_constant(s: f64, k: usize) -> f64 {
    let kf = k as f64;
    libm::pow(PI, 0.5 * kf) * libm::pow(2.0, s) * libm::tgamma(0.5 * s) / libm::tgamma(0.5 * (kf - s))
}

pub fn energy_lhs_estimate(setup: &KernelSetup, measure: &DiscreteMeasure, options: &LhsOptions) -> Result<LhsEstimate> {
    let blocks = setup.blocks();
    if measure.blocks() != blocks.sizes() {
        return Err(Error::ShapeMismatch { expected: blocks.n(), got: measure.blocks().len() });
    }
    let nb = blocks.n();
    let rho_mass: f64 = blocks.sizes().iter().map(|&m| block_weight_mass(m)).product();
    let mstar = setup.mstar_f64();
    let rule = SphereRule::new(blocks.k(), options.angular_points)?;

    // Pairs j < l that enter the sums.
    let n = measure.len();
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    let mut skipped = 0usize;
    let mut z = vec![0.0; nb];
    let mut rhs = CompensatedSum::new();
    let mut rhs_infinite = false;
    let mut reduced = CompensatedSum::new();
    for j in 0..n {
        for l in j + 1..n {
            measure.block_distances(j, l, &mut z);
            if options.policy == PairPolicy::DistinctInEveryBlock && z.iter().any(|&v| v == 0.0) {
                skipped += 2;
                continue;
            }
            pairs.push((j, l));
            let mm = measure.mass(j) * measure.mass(l);
            let dprime = setup.dprime_for(&z);
            if z.iter().zip(dprime).any(|(zi, e)| *zi == 0.0 && !e.is_zero()) {
                rhs_infinite = true;
            } else {
                rhs.add(mm / z_power(&z, dprime));
            }
            if options.xi_method == XiMethod::Reduced {
                reduced.add(mm * setup.kernel_for_z(&z, &rule)?);
            }
        }
    }

    let (lhs, stderr) = match options.xi_method {
        XiMethod::Reduced => (2.0 * rho_mass * reduced.value(), 0.0),
        XiMethod::RieszMonteCarlo => {
            if !matches!(setup.class, GapClass::Fractional { .. }) {
                return Err(Error::Unsupported("the Riesz form of the ξ-integral needs 𝔪 < k".into()));
            }
            if options.lambda_samples < 2 {
                return Err(Error::Precondition("at least two λ samples required".into()));
            }
            let c = riesz_constant(mstar, blocks.k());
            let dim = blocks.total_dim();
            let mut mom = Moments::default();
            let mut diff = vec![0.0; dim];
            let mut v = vec![0.0; blocks.k()];
            for sample in 0..options.lambda_samples {
                let mut rng = stream_rng(options.seed, sample);
                let lambda = sample_lambda(blocks, &mut rng, TLaw::Chi)?;
                let m_lambda = setup.map.compose(&lambda)?;
                let mut acc = CompensatedSum::new();
                for &(j, l) in &pairs {
                    for ((d, a), b) in diff.iter_mut().zip(measure.atom(j)).zip(measure.atom(l)) {
                        *d = b - a;
                    }
                    m_lambda.apply_into(&diff, &mut v);
                    let r = libm::sqrt(v.iter().map(|u| u * u).sum::<f64>());
                    acc.add(measure.mass(j) * measure.mass(l) * libm::pow(r, -mstar));
                }
                mom.push(2.0 * rho_mass * c * acc.value());
            }
            (mom.mean(), mom.stderr())
        }
    };

    let rhs = if rhs_infinite { Energy::Infinite } else { Energy::Finite(2.0 * rhs.value()) };
    let ratio = rhs.value().filter(|v| *v > 0.0).map(|v| lhs / v);
    Ok(LhsEstimate {
        lhs,
        stderr,
        rho_mass,
        rhs,
        ratio,
        pairs_used: 2 * pairs.len(),
        diagonal_pairs: n,
        skipped_pairs: skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactlin::rat;

    fn sum_setup(d: (i64, i64, i64, i64)) -> KernelSetup {
        let pi = RationalMatrix::from_i64_rows(&[&[1, 1]]);
        let b = BlockStructure::new(vec![1, 1], 1).unwrap();
        let d = DimensionVector::new(vec![rat(d.0, d.1), rat(d.2, d.3)]).unwrap();
        KernelSetup::new(&pi, &b, &d).unwrap()
    }

    #[test]
    fn fourier_examples() {
        let mu = DiscreteMeasure::point_mass(vec![0.0, 0.0], 1.0).unwrap();
        assert_eq!(fourier(&mu, &[3.0, -2.0]).unwrap(), Complex64::new(1.0, 0.0));
        let mu = DiscreteMeasure::new(vec![1], vec![-1.0, 1.0], vec![0.5, 0.5]).unwrap();
        for xi in [0.0, 0.3, 1.7, -4.0] {
            let f = fourier(&mu, &[xi]).unwrap();
            assert!((f.re - libm::cos(xi)).abs() < 1e-15 && f.im.abs() < 1e-15);
        }
        let mu = DiscreteMeasure::new(vec![1], vec![0.2, 0.9, 5.0], vec![0.5, 1.5, 2.0]).unwrap();
        assert_eq!(fourier(&mu, &[0.0]).unwrap().re, 4.0);
        assert!(fourier(&mu, &[0.0, 1.0]).is_err());
    }

    #[test]
    fn energy_examples() {
        let single = DiscreteMeasure::point_mass(vec![1.0], 1.0).unwrap();
        assert_eq!(energy_s(&single, 1.0), Energy::Finite(0.0));
        let two = DiscreteMeasure::new(vec![1], vec![0.0, 2.0], vec![1.0, 1.0]).unwrap();
        assert_eq!(energy_s(&two, 1.0), Energy::Finite(1.0));
        let three = DiscreteMeasure::new(vec![1], vec![0.0, 1.0, 3.0], vec![0.5, 0.25, 0.25]).unwrap();
        let total: f64 = 1.0;
        let sq = 0.25 + 0.0625 + 0.0625;
        assert_eq!(energy_s(&three, 0.0), Energy::Finite(total - sq));
        let dup = DiscreteMeasure::new(vec![1], vec![1.0, 1.0], vec![1.0, 1.0]).unwrap();
        assert_eq!(energy_s(&dup, 0.5), Energy::Infinite);
        assert_eq!(energy_s(&dup, 0.0), Energy::Finite(2.0));
    }

    #[test]
    fn block_energy_examples() {
        let mu = DiscreteMeasure::new(vec![1, 1], vec![0.0, 0.0, 1.0, 2.0], vec![1.0, 1.0]).unwrap();
        let e = energy_vec(&mu, &[1.0, 1.0], PairPolicy::ExcludeDiagonal).unwrap();
        assert_eq!(e.energy, Energy::Finite(1.0));
        let e = energy_vec(&mu, &[0.0, 0.0], PairPolicy::ExcludeDiagonal).unwrap();
        assert_eq!(e.energy, Energy::Finite(2.0));

        // product of {0, 1} with {0, 1}: pairs sharing a coordinate
        let mu = DiscreteMeasure::new(vec![1, 1], vec![0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0], vec![0.25; 4]).unwrap();
        let e = energy_vec(&mu, &[0.5, 0.5], PairPolicy::ExcludeDiagonal).unwrap();
        assert!(e.energy.is_infinite());
        let e = energy_vec(&mu, &[0.5, 0.5], PairPolicy::DistinctInEveryBlock).unwrap();
        assert_eq!(e.skipped_pairs, 8);
        assert_eq!(e.energy, Energy::Finite(2.0 * 2.0 * 0.0625));
    }

    #[test]
    fn sphere_rules_have_full_area() {
        for (k, p) in [(1, 1), (2, 16), (3, 16), (4, 16), (5, 24)] {
            let rule = SphereRule::new(k, p).unwrap();
            let area = 2.0 * libm::pow(PI, 0.5 * k as f64) / libm::tgamma(0.5 * k as f64);
            assert!((rule.total_weight() - area).abs() < 1e-12 * area, "k = {k}");
            for pt in rule.points.chunks_exact(k) {
                let r: f64 = pt.iter().map(|v| v * v).sum();
                assert!((r - 1.0).abs() < 1e-12);
            }
        }
        assert!(SphereRule::new(2, 2).is_err());
    }

    #[test]
    fn above_k_instance() {
        let setup = sum_setup((3, 5, 7, 10));
        assert_eq!(setup.class, GapClass::AboveK);
        let inst = setup.instance(&[0.0, 0.0], &[1.0, 2.0]).unwrap();
        assert_eq!(inst.pivot, Some(0));
        assert_eq!(inst.dprime, vec![rat(3, 5), rat(7, 10)]);
        let alphas: Vec<_> = inst.weights.entries.iter().map(|e| (e.jhat.coords.clone(), e.alpha.clone())).collect();
        assert!(alphas.contains(&(vec![int(1), int(0)], rat(3, 10))));
        assert!(alphas.contains(&(vec![int(0), int(1)], rat(7, 10))));
        // the other pivot gives the same exponents here
        let inst = setup.instance(&[0.0, 0.0], &[2.0, 1.0]).unwrap();
        assert_eq!(inst.pivot, Some(1));
        assert_eq!(inst.dprime, vec![rat(3, 5), rat(7, 10)]);
    }

    #[test]
    fn fractional_instance() {
        let setup = sum_setup((2, 5, 2, 5));
        assert_eq!(setup.class, GapClass::Fractional { k_prime: 1 });
        let inst = setup.instance(&[0.0, 0.0], &[0.3, 0.7]).unwrap();
        assert_eq!(inst.pivot, None);
        assert_eq!(inst.dprime, vec![rat(2, 5), rat(2, 5)]);
        assert_eq!(inst.dprime.iter().sum::<Rational>(), inst.mstar);
    }

    #[test]
    fn single_block_instance() {
        let pi = RationalMatrix::from_i64_rows(&[&[2]]);
        let b = BlockStructure::new(vec![1], 1).unwrap();
        let d = DimensionVector::new(vec![rat(7, 4)]).unwrap();
        let inst = build_kernel_instance(&pi, &b, &d, &[0.0], &[0.5]).unwrap();
        assert_eq!(inst.dprime, vec![rat(7, 4)]);
    }

    #[test]
    fn kernel_instance_errors() {
        let setup = sum_setup((3, 5, 7, 10));
        assert_eq!(setup.instance(&[0.0, 1.0], &[2.0, 1.0]).unwrap_err(), Error::DegeneratePair { block: 1 });
        let pi = RationalMatrix::identity(2);
        let b = BlockStructure::new(vec![1, 1], 2).unwrap();
        // 𝔪 = min(1/2 + 1, 1/2 + 1, 1) = 1 < k = 2
        let d = DimensionVector::new(vec![rat(1, 2), rat(1, 2)]).unwrap();
        assert!(matches!(KernelSetup::new(&pi, &b, &d), Err(Error::Unsupported(_))));
    }

    #[test]
    fn kernel_closed_form_k1() {
        let setup = sum_setup((3, 5, 7, 10));
        let inst = setup.instance_from_z(&[1.0, 1.0]).unwrap();
        let m = 1.3;
        let expected = libm::pow(2.0, m / 2.0 - 1.0) * libm::tgamma(m / 2.0) * 2.0 * libm::pow(2.0, -m / 2.0);
        let got = kernel_integral(&inst, 0).unwrap();
        assert!((got - expected).abs() < 1e-14 * expected);
        // unit separations: the ratio is the kernel itself
        assert_eq!(kernel_bound_ratio(&inst, 0).unwrap(), got);
    }

    #[test]
    fn kernel_standard_gaussian_when_mstar_is_k() {
        // 𝔪 = k = 2 with Q = I: ∫ e^{−|ξ|²/2} = 2π
        let pi = RationalMatrix::identity(2);
        let b = BlockStructure::new(vec![1, 1], 2).unwrap();
        let d = DimensionVector::new(vec![int(1), int(1)]).unwrap();
        let setup = KernelSetup::new(&pi, &b, &d).unwrap();
        assert_eq!(setup.mstar.value, int(2));
        let rule = SphereRule::new(2, 8).unwrap();
        let v = setup.kernel_for_z(&[1.0, 1.0], &rule).unwrap();
        assert!((v - 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn kernel_rejects_degenerate_form() {
        let rule = SphereRule::new(2, 8).unwrap();
        assert!(matches!(kernel_from_form(&[1.0, 0.0, 0.0, 0.0], 1.5, &rule), Err(Error::RankDeficient(_))));
    }

    #[test]
    fn gaussian_identity_at_zero_separation() {
        let e = gaussian_identity_ratio(2, &[0.0, 0.0], &[1.0, 0.5], 2000, 1).unwrap();
        assert_eq!(e.ratio, block_weight_mass(2));
        assert_eq!(e.stderr, 0.0);
        assert!(gaussian_identity_ratio(2, &[0.0, 0.0], &[1.0, 0.5], 10, 1).is_err());
    }

    #[test]
    fn gaussian_chunks_cover_samples() {
        let c: Vec<_> = gaussian_identity_chunks(2 * GAUSSIAN_CHUNK + 5).collect();
        assert_eq!(c, vec![(0, GAUSSIAN_CHUNK), (1, GAUSSIAN_CHUNK), (2, 5)]);
        assert_eq!(gaussian_identity_chunks(GAUSSIAN_CHUNK).count(), 1);
    }

    #[test]
    fn lhs_single_atom_is_zero() {
        let setup = sum_setup((2, 5, 2, 5));
        let mu = DiscreteMeasure::new(vec![1, 1], vec![0.1, 0.2], vec![1.0]).unwrap();
        let e = energy_lhs_estimate(&setup, &mu, &LhsOptions::default()).unwrap();
        assert_eq!(e.lhs, 0.0);
        assert_eq!(e.pairs_used, 0);
        assert_eq!(e.diagonal_pairs, 1);
    }

    #[test]
    fn lhs_two_atoms_reduces_to_one_kernel() {
        let setup = sum_setup((3, 5, 7, 10));
        let mu = DiscreteMeasure::new(vec![1, 1], vec![0.0, 0.0, 0.5, 0.25], vec![0.5, 0.5]).unwrap();
        let e = energy_lhs_estimate(&setup, &mu, &LhsOptions::default()).unwrap();
        let rule = SphereRule::new(1, 1).unwrap();
        let k = setup.kernel_for_z(&[0.5, 0.25], &rule).unwrap();
        let expected = 2.0 * 0.25 * k * 2.0 * PI;
        assert!((e.lhs - expected).abs() < 1e-12 * expected);
        assert!(e.ratio.is_some());
    }

    #[test]
    fn riesz_form_needs_fractional_case() {
        let setup = sum_setup((3, 5, 7, 10));
        let mu = DiscreteMeasure::new(vec![1, 1], vec![0.0, 0.0, 0.5, 0.25], vec![0.5, 0.5]).unwrap();
        let opts = LhsOptions { xi_method: XiMethod::RieszMonteCarlo, ..LhsOptions::default() };
        assert!(matches!(energy_lhs_estimate(&setup, &mu, &opts), Err(Error::Unsupported(_))));
    }
}
