//! Self-similar Cantor sets, their natural measures at finite resolution,
//! box counting and grid coverage, and the random-λ projection experiments.
//!
//! Grids are anchored at the origin. A coordinate `x` falls in box
//! `floor(x / h)`, so a point on a boundary `j h` belongs to `[j h, (j+1) h)`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::analysis::DiscreteMeasure;
use crate::conformal::{sample_lambda, ConformalParameter, ProjectionMap, Rotation, TLaw};
use crate::error::{Error, Result};
use crate::exactlin::{BlockStructure, RationalMatrix};
use crate::mstar::{check_surjective, complement_dims, MAX_BLOCKS};
use crate::numeric::{median, stream_rng};

/// Default cap on the number of atoms a construction may produce.
pub const DEFAULT_ATOM_BUDGET: usize = 10_000_000;

/// `x ↦ r O x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Similarity {
    pub ratio: f64,
    pub translation: Vec<f64>,
    pub rotation: Option<Rotation>,
}

impl Similarity {
    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        match &self.rotation {
            Some(o) => {
                let ox = o.apply(x);
                for ((o, v), b) in out.iter_mut().zip(&ox).zip(&self.translation) {
                    *o = self.ratio * v + b;
                }
            }
            None => {
                for ((o, v), b) in out.iter_mut().zip(x).zip(&self.translation) {
                    *o = self.ratio * v + b;
                }
            }
        }
    }
}

/// An iterated function system of contracting similarities. The open set
/// condition is assumed, not checked.
#[derive(Debug, Clone, PartialEq)]
pub struct SelfSimilarSpec {
    pub ambient_dim: usize,
    pub maps: Vec<Similarity>,
    pub label: String,
}

impl SelfSimilarSpec {
    pub fn new(ambient_dim: usize, maps: Vec<Similarity>, label: impl Into<String>) -> Result<Self> {
        if ambient_dim == 0 || maps.is_empty() {
            return Err(Error::Malformed("a self-similar spec needs a dimension and at least one map".into()));
        }
        for (j, f) in maps.iter().enumerate() {
            if !(f.ratio > 0.0 && f.ratio < 1.0) {
                return Err(Error::Malformed(format!("map {} has ratio {} outside (0, 1)", j + 1, f.ratio)));
            }
            if f.translation.len() != ambient_dim {
                return Err(Error::ShapeMismatch { expected: ambient_dim, got: f.translation.len() });
            }
            if let Some(o) = &f.rotation {
                if o.dim() != ambient_dim {
                    return Err(Error::ShapeMismatch { expected: ambient_dim, got: o.dim() });
                }
            }
        }
        Ok(SelfSimilarSpec { ambient_dim, maps, label: label.into() })
    }

    /// `N` maps of ratio `r` on the line with translations `j (1 − r) / (N − 1)`,
    /// so the attractor spans `[0, 1]`.
    pub fn uniform_cantor(n_maps: usize, ratio: f64) -> Result<Self> {
        if n_maps < 2 {
            return Err(Error::Malformed("a uniform Cantor set needs at least two maps".into()));
        }
        if !(ratio * n_maps as f64 <= 1.0) {
            return Err(Error::Malformed(format!("{n_maps} maps of ratio {ratio} overlap")));
        }
        let gap = (1.0 - ratio) / (n_maps - 1) as f64;
        let maps = (0..n_maps)
            .map(|j| Similarity { ratio, translation: vec![j as f64 * gap], rotation: None })
            .collect();
        Self::new(1, maps, format!("cantor(N={n_maps}, r={ratio})"))
    }

    pub fn middle_third() -> Self {
        let maps = vec![
            Similarity { ratio: 1.0 / 3.0, translation: vec![0.0], rotation: None },
            Similarity { ratio: 1.0 / 3.0, translation: vec![2.0 / 3.0], rotation: None },
        ];
        SelfSimilarSpec { ambient_dim: 1, maps, label: "middle-third".into() }
    }

    /// Two maps on the line with similarity dimension `s ∈ (0, 1]`.
    pub fn two_map_cantor(s: f64) -> Result<Self> {
        if !(s > 0.0 && s <= 1.0) {
            return Err(Error::Malformed(format!("two-map dimension {s} outside (0, 1]")));
        }
        Self::uniform_cantor(2, libm::pow(2.0, -1.0 / s))
    }

    pub fn max_ratio(&self) -> f64 {
        self.maps.iter().map(|f| f.ratio).fold(0.0, f64::max)
    }

    pub fn similarity_dimension(&self) -> f64 {
        similarity_dimension(&self.maps.iter().map(|f| f.ratio).collect::<Vec<_>>())
    }
}

/// The `s` with `Σ_j r_j^s = 1`.
pub fn similarity_dimension(ratios: &[f64]) -> f64 {
    if ratios.is_empty() {
        return 0.0;
    }
    let r0 = ratios[0];
    if ratios.iter().all(|&r| r == r0) {
        return libm::log(ratios.len() as f64) / libm::log(1.0 / r0);
    }
    let f = |s: f64| ratios.iter().map(|&r| libm::pow(r, s)).sum::<f64>() - 1.0;
    let (mut lo, mut hi) = (0.0, 1.0);
    while f(hi) > 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Images of the origin under all `depth`-fold compositions `f_{w_1} ∘ … ∘ f_{w_depth}`,
/// in lexicographic order of the words, each with mass `N^{−depth}`.
pub fn build_cantor(spec: &SelfSimilarSpec, depth: usize, budget: usize) -> Result<DiscreteMeasure> {
    if depth == 0 {
        return Err(Error::Precondition("depth must be at least 1".into()));
    }
    let n = spec.maps.len();
    let count = checked_power(n, depth).filter(|&c| c <= budget).ok_or(Error::BudgetExceeded { budget })?;
    let m = spec.ambient_dim;
    let mut atoms = vec![0.0; m];
    for _ in 0..depth {
        let prev = core::mem::take(&mut atoms);
        let len = prev.len() / m;
        atoms = vec![0.0; prev.len() * n];
        for (j, f) in spec.maps.iter().enumerate() {
            for p in 0..len {
                let dst = (j * len + p) * m;
                f.apply_into(&prev[p * m..(p + 1) * m], &mut atoms[dst..dst + m]);
            }
        }
    }
    DiscreteMeasure::new(vec![m], atoms, vec![1.0 / count as f64; count])
}

fn checked_power(base: usize, exp: usize) -> Option<usize> {
    let mut acc: usize = 1;
    for _ in 0..exp {
        acc = acc.checked_mul(base)?;
    }
    Some(acc)
}

/// Cartesian product; the first factor varies slowest. Factor blocks are concatenated.
pub fn product_measure(measures: &[DiscreteMeasure], budget: usize) -> Result<DiscreteMeasure> {
    if measures.is_empty() {
        return Err(Error::Malformed("product of no measures".into()));
    }
    let count = measures
        .iter()
        .try_fold(1usize, |acc, m| acc.checked_mul(m.len()))
        .filter(|&c| c <= budget)
        .ok_or(Error::BudgetExceeded { budget })?;
    let blocks: Vec<usize> = measures.iter().flat_map(|m| m.blocks().iter().copied()).collect();
    let dim: usize = blocks.iter().sum();
    let mut atoms = Vec::with_capacity(count * dim);
    let mut masses = Vec::with_capacity(count);
    let mut idx = vec![0usize; measures.len()];
    for _ in 0..count {
        let mut mass = 1.0;
        for (f, &j) in measures.iter().zip(&idx) {
            atoms.extend_from_slice(f.atom(j));
            mass *= f.mass(j);
        }
        masses.push(mass);
        for pos in (0..measures.len()).rev() {
            idx[pos] += 1;
            if idx[pos] < measures[pos].len() {
                break;
            }
            idx[pos] = 0;
        }
    }
    Ok(DiscreteMeasure::new(blocks, atoms, masses)?.mark_product())
}

/// Which scales enter the slope fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FitPolicy {
    /// Scales with `10 ≤ N_j ≤ (point count) / 10`.
    #[default]
    Window,
    /// Every scale in the range.
    All,
}

/// Dyadic exponents `j` with box side `2^{−j}`, inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScaleRange {
    pub min: u32,
    pub max: u32,
}

impl ScaleRange {
    /// Down to the construction scale `r^depth` but no finer.
    pub fn for_construction(max_ratio: f64, depth: usize) -> Self {
        let j = libm::floor(depth as f64 * libm::log2(1.0 / max_ratio));
        ScaleRange { min: 0, max: j.clamp(0.0, 60.0) as u32 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DimensionEstimate {
    pub slope: f64,
    pub stderr: f64,
    pub scales_used: Vec<u32>,
    pub counts: Vec<usize>,
    /// `(j, N_j)` for every scale in the range.
    pub table: Vec<(u32, usize)>,
}

/// Distinct occupied boxes of side `h`; `points` is flat with dimension `k`.
pub fn occupied_boxes(points: &[f64], k: usize, h: f64) -> usize {
    let mut keys: Vec<i64> = points.iter().map(|x| libm::floor(x / h) as i64).collect();
    distinct_keys(&mut keys, k)
}

fn distinct_keys(keys: &mut [i64], k: usize) -> usize {
    if k == 1 {
        keys.sort_unstable();
        return keys.iter().enumerate().filter(|&(i, v)| i == 0 || keys[i - 1] != *v).count();
    }
    let n = keys.len() / k;
    let key = |i: usize| &keys[i * k..(i + 1) * k];
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_unstable_by(|&a, &b| key(a).cmp(key(b)));
    order.iter().enumerate().filter(|&(pos, &i)| pos == 0 || key(i) != key(order[pos - 1])).count()
}

pub const MIN_BOX_POINTS: usize = 1000;

pub fn box_dimension(points: &[f64], k: usize, range: ScaleRange, policy: FitPolicy) -> Result<DimensionEstimate> {
    if k == 0 || points.len() % k != 0 {
        return Err(Error::ShapeMismatch { expected: k, got: points.len() });
    }
    let n = points.len() / k;
    if n < MIN_BOX_POINTS {
        return Err(Error::Precondition(format!("box counting needs at least {MIN_BOX_POINTS} points, got {n}")));
    }
    if range.min > range.max {
        return Err(Error::InsufficientResolution(format!("empty scale range {}..{}", range.min, range.max)));
    }
    let table: Vec<(u32, usize)> =
        (range.min..=range.max).map(|j| (j, occupied_boxes(points, k, libm::ldexp(1.0, -(j as i32))))).collect();
    let used: Vec<(u32, usize)> = table
        .iter()
        .copied()
        .filter(|&(_, c)| policy == FitPolicy::All || (c >= 10 && c * 10 <= n))
        .collect();
    if used.len() < 4 {
        return Err(Error::InsufficientResolution(format!("{} scales in the regression window, need 4", used.len())));
    }
    let xs: Vec<f64> = used.iter().map(|&(j, _)| j as f64).collect();
    let ys: Vec<f64> = used.iter().map(|&(_, c)| libm::log2(c as f64)).collect();
    let (slope, stderr) = least_squares_slope(&xs, &ys);
    Ok(DimensionEstimate {
        slope,
        stderr,
        scales_used: used.iter().map(|p| p.0).collect(),
        counts: used.iter().map(|p| p.1).collect(),
        table,
    })
}

/// Slope and its standard error for `y ≈ a + b x`.
pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let sse: f64 = xs.iter().zip(ys).map(|(x, y)| (y - a - b * x) * (y - a - b * x)).sum();
    let se = if xs.len() > 2 { libm::sqrt(sse / (n - 2.0) / sxx) } else { 0.0 };
    (b, se)
}

/// Closed axis-aligned box `[lo, hi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl WindowBox {
    pub fn bounding(points: &[f64], k: usize) -> Self {
        let mut lo = vec![f64::INFINITY; k];
        let mut hi = vec![f64::NEG_INFINITY; k];
        for p in points.chunks_exact(k) {
            for a in 0..k {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        WindowBox { lo, hi }
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.iter().zip(&self.lo).zip(&self.hi).all(|((x, l), h)| l <= x && x <= h)
    }
}

/// Occupied boxes of side `scale` over the number of grid boxes meeting the
/// window in positive volume. A point on the upper face of the window is
/// counted in the last box below it.
pub fn coverage_fraction(points: &[f64], k: usize, scale: f64, window: &WindowBox) -> Result<f64> {
    if window.lo.len() != k || window.hi.len() != k || k == 0 {
        return Err(Error::ShapeMismatch { expected: k, got: window.lo.len() });
    }
    if !(scale > 0.0) {
        return Err(Error::Precondition(format!("grid side must be positive, got {scale}")));
    }
    if window.lo.iter().zip(&window.hi).any(|(l, h)| !(h > l)) {
        return Err(Error::Precondition("window has zero volume".into()));
    }
    if let Some(p) = points.chunks_exact(k).find(|p| !window.contains(p)) {
        return Err(Error::Precondition(format!("point {p:?} lies outside the window")));
    }
    let first: Vec<i64> = window.lo.iter().map(|l| libm::floor(l / scale) as i64).collect();
    let last: Vec<i64> = window.hi.iter().zip(&first).map(|(h, f)| (libm::ceil(h / scale) as i64 - 1).max(*f)).collect();
    let total: f64 = first.iter().zip(&last).map(|(f, l)| (l - f + 1) as f64).product();
    let mut keys: Vec<i64> = points
        .iter()
        .enumerate()
        .map(|(i, x)| (libm::floor(x / scale) as i64).clamp(first[i % k], last[i % k]))
        .collect();
    Ok(distinct_keys(&mut keys, k) as f64 / total)
}

/// Projection setup shared by the experiments: `π`, the factor specs and
/// the product measure at one depth.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSetup {
    pub pi: RationalMatrix,
    pub blocks: BlockStructure,
    pub specs: Vec<SelfSimilarSpec>,
    pub t_law: TLaw,
    pub seed: u64,
    pub trials: usize,
    pub budget: usize,
}

impl ExperimentSetup {
    pub fn new(pi: RationalMatrix, specs: Vec<SelfSimilarSpec>, seed: u64, trials: usize) -> Result<Self> {
        let sizes: Vec<usize> = specs.iter().map(|s| s.ambient_dim).collect();
        let blocks = BlockStructure::new(sizes, pi.rows())?;
        if blocks.n() > MAX_BLOCKS {
            return Err(Error::TooManyBlocks { n: blocks.n(), cap: MAX_BLOCKS });
        }
        check_surjective(&pi, &blocks)?;
        if trials == 0 {
            return Err(Error::Precondition("trials must be positive".into()));
        }
        Ok(ExperimentSetup { pi, blocks, specs, t_law: TLaw::EXPERIMENT_DEFAULT, seed, trials, budget: DEFAULT_ATOM_BUDGET })
    }

    pub fn with_t_law(mut self, law: TLaw) -> Result<Self> {
        law.validate()?;
        self.t_law = law;
        Ok(self)
    }

    pub fn with_budget(mut self, budget: usize) -> Self {
        self.budget = budget;
        self
    }

    pub fn similarity_dimensions(&self) -> Vec<f64> {
        self.specs.iter().map(|s| s.similarity_dimension()).collect()
    }

    /// 𝔪 for real dimensions `s_i`: the same subset minimum as for rationals.
    pub fn mstar(&self) -> Result<f64> {
        mstar_real(&self.pi, &self.blocks, &self.similarity_dimensions())
    }

    pub fn max_ratio(&self) -> f64 {
        self.specs.iter().map(|s| s.max_ratio()).fold(0.0, f64::max)
    }

    pub fn product(&self, depth: usize) -> Result<DiscreteMeasure> {
        let factors = self.specs.iter().map(|s| build_cantor(s, depth, self.budget)).collect::<Result<Vec<_>>>()?;
        product_measure(&factors, self.budget)
    }

    /// λ for trial `t`; a pure function of `(seed, t)`.
    pub fn lambda(&self, trial: usize) -> Result<ConformalParameter> {
        let mut rng = stream_rng(self.seed, trial as u64);
        sample_lambda(&self.blocks, &mut rng, self.t_law)
    }

    pub fn project(&self, measure: &DiscreteMeasure, lambda: &ConformalParameter) -> Result<Vec<f64>> {
        let map = ProjectionMap::new(&self.pi, &self.blocks)?.compose(lambda)?;
        Ok(map.apply_all(measure.atoms()))
    }
}

/// `min_{I ≠ ∅} Σ_{i∈I} s_i + dim π(⊕_{i∉I} ℝ^{m_i})` in floating point.
pub fn mstar_real(pi: &RationalMatrix, blocks: &BlockStructure, s: &[f64]) -> Result<f64> {
    if s.len() != blocks.n() {
        return Err(Error::ShapeMismatch { expected: blocks.n(), got: s.len() });
    }
    let dims = complement_dims(pi, blocks)?;
    Ok(crate::exactlin::BlockSet::nonempty(blocks.n())
        .map(|set| set.iter().map(|i| s[i]).sum::<f64>() + dims[set.0 as usize] as f64)
        .fold(f64::INFINITY, f64::min))
}

/// λ flattened as `t_1, O_1 entries, …, t_n, O_n entries`.
pub fn lambda_coordinates(lambda: &ConformalParameter) -> Vec<f64> {
    let mut out = Vec::new();
    for b in &lambda.blocks {
        out.push(b.t);
        out.extend_from_slice(b.rotation.entries());
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct DimensionTrial {
    pub trial: usize,
    pub lambda: Vec<f64>,
    pub estimate: DimensionEstimate,
}

pub fn dimension_trial(setup: &ExperimentSetup, measure: &DiscreteMeasure, range: ScaleRange, trial: usize) -> Result<DimensionTrial> {
    let lambda = setup.lambda(trial)?;
    let points = setup.project(measure, &lambda)?;
    let estimate = box_dimension(&points, setup.blocks.k(), range, FitPolicy::Window)?;
    Ok(DimensionTrial { trial, lambda: lambda_coordinates(&lambda), estimate })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DimensionReport {
    pub mstar: f64,
    /// Right side of the upper bound, `min(𝔪, rank π)`.
    pub bound: f64,
    pub depth: usize,
    pub atoms: usize,
    pub range: ScaleRange,
    pub trials: Vec<DimensionTrial>,
}

impl DimensionReport {
    pub fn slopes(&self) -> Vec<f64> {
        self.trials.iter().map(|t| t.estimate.slope).collect()
    }

    pub fn median(&self) -> f64 {
        median(&self.slopes())
    }

    pub fn fraction_within(&self, tol: f64) -> f64 {
        let hits = self.slopes().iter().filter(|s| libm::fabs(*s - self.mstar) <= tol).count();
        hits as f64 / self.trials.len() as f64
    }

    /// Largest `slope − bound` over the trials.
    pub fn max_bound_excess(&self) -> f64 {
        self.slopes().iter().map(|s| s - self.bound).fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn dimension_prepare(setup: &ExperimentSetup, depth: usize) -> Result<(f64, DiscreteMeasure, ScaleRange)> {
    let mstar = setup.mstar()?;
    if mstar > setup.blocks.k() as f64 {
        return Err(Error::Precondition(format!("𝔪 = {mstar} exceeds k = {}", setup.blocks.k())));
    }
    let measure = setup.product(depth)?;
    Ok((mstar, measure, ScaleRange::for_construction(setup.max_ratio(), depth)))
}

pub fn experiment_dimension(setup: &ExperimentSetup, depth: usize) -> Result<DimensionReport> {
    let (mstar, measure, range) = dimension_prepare(setup, depth)?;
    let trials = (0..setup.trials).map(|t| dimension_trial(setup, &measure, range, t)).collect::<Result<Vec<_>>>()?;
    Ok(finish_dimension(setup, depth, mstar, measure.len(), range, trials))
}

pub fn finish_dimension(
    setup: &ExperimentSetup,
    depth: usize,
    mstar: f64,
    atoms: usize,
    range: ScaleRange,
    trials: Vec<DimensionTrial>,
) -> DimensionReport {
    DimensionReport { mstar, bound: mstar.min(setup.blocks.k() as f64), depth, atoms, range, trials }
}

/// Grid side matched to the finest construction scale: twice the largest
/// possible extent `Σ_i |t_i| ‖π_i‖ r_i^depth diam K_i` of one projected cylinder.
pub fn matched_scale(setup: &ExperimentSetup, lambda: &ConformalParameter, factor_diams: &[f64], depth: usize) -> f64 {
    let map = ProjectionMap::new(&setup.pi, &setup.blocks).expect("validated setup");
    let mut extent = 0.0;
    for i in 0..setup.blocks.n() {
        let norm2: f64 = setup.blocks.columns(i).map(|c| (0..map.k()).map(|r| map.get(r, c) * map.get(r, c)).sum::<f64>()).sum();
        let r = setup.specs[i].max_ratio();
        extent += libm::fabs(lambda.blocks[i].t) * libm::sqrt(norm2) * libm::pow(r, depth as f64) * factor_diams[i];
    }
    2.0 * extent
}

/// Attractor diameters estimated from the atom clouds at `depth`: the cloud
/// diameter divided by `1 − r^depth`, exact for the uniform constructions on the line.
pub fn factor_diameters(setup: &ExperimentSetup, depth: usize) -> Result<Vec<f64>> {
    setup
        .specs
        .iter()
        .map(|s| {
            let mu = build_cantor(s, depth, setup.budget)?;
            let w = WindowBox::bounding(mu.atoms(), s.ambient_dim);
            let cloud = libm::sqrt(w.lo.iter().zip(&w.hi).map(|(l, h)| (h - l) * (h - l)).sum::<f64>());
            Ok(cloud / (1.0 - libm::pow(s.max_ratio(), depth as f64)))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageTrial {
    pub trial: usize,
    pub depth: usize,
    pub lambda: Vec<f64>,
    pub scale: f64,
    pub coverage: f64,
}

pub fn coverage_for_lambda(
    setup: &ExperimentSetup,
    measure: &DiscreteMeasure,
    diams: &[f64],
    depth: usize,
    lambda: &ConformalParameter,
) -> Result<(f64, f64)> {
    let points = setup.project(measure, lambda)?;
    let k = setup.blocks.k();
    let scale = matched_scale(setup, lambda, diams, depth);
    let window = WindowBox::bounding(&points, k);
    Ok((scale, coverage_fraction(&points, k, scale, &window)?))
}

pub fn coverage_trial(setup: &ExperimentSetup, measure: &DiscreteMeasure, diams: &[f64], depth: usize, trial: usize) -> Result<CoverageTrial> {
    let lambda = setup.lambda(trial)?;
    let (scale, coverage) = coverage_for_lambda(setup, measure, diams, depth, &lambda)?;
    Ok(CoverageTrial { trial, depth, lambda: lambda_coordinates(&lambda), scale, coverage })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DepthCoverage {
    pub depth: usize,
    pub atoms: usize,
    pub trials: Vec<CoverageTrial>,
    /// Coverage for `t_i = 1`, `O_i = Id`.
    pub control: f64,
}

impl DepthCoverage {
    pub fn coverages(&self) -> Vec<f64> {
        self.trials.iter().map(|t| t.coverage).collect()
    }

    pub fn median(&self) -> f64 {
        median(&self.coverages())
    }

    pub fn fraction_at_least(&self, threshold: f64) -> f64 {
        self.trials.iter().filter(|t| t.coverage >= threshold).count() as f64 / self.trials.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PositiveMeasureReport {
    pub mstar: f64,
    pub depths: Vec<DepthCoverage>,
}

impl PositiveMeasureReport {
    pub fn medians(&self) -> Vec<f64> {
        self.depths.iter().map(|d| d.median()).collect()
    }

    pub fn medians_non_decreasing(&self) -> bool {
        self.medians().windows(2).all(|w| w[1] >= w[0])
    }
}

pub fn positive_measure_check(setup: &ExperimentSetup) -> Result<f64> {
    let mstar = setup.mstar()?;
    if mstar <= setup.blocks.k() as f64 {
        return Err(Error::Precondition(format!("𝔪 = {mstar} does not exceed k = {}", setup.blocks.k())));
    }
    Ok(mstar)
}

pub fn coverage_at_depth(setup: &ExperimentSetup, depth: usize) -> Result<DepthCoverage> {
    let measure = setup.product(depth)?;
    let diams = factor_diameters(setup, depth)?;
    let trials = (0..setup.trials).map(|t| coverage_trial(setup, &measure, &diams, depth, t)).collect::<Result<Vec<_>>>()?;
    let control = coverage_for_lambda(setup, &measure, &diams, depth, &ConformalParameter::identity(&setup.blocks))?.1;
    Ok(DepthCoverage { depth, atoms: measure.len(), trials, control })
}

pub fn experiment_positive_measure(setup: &ExperimentSetup, depths: &[usize]) -> Result<PositiveMeasureReport> {
    let mstar = positive_measure_check(setup)?;
    if depths.is_empty() {
        return Err(Error::Precondition("at least one depth required".into()));
    }
    let depths = depths.iter().map(|&d| coverage_at_depth(setup, d)).collect::<Result<Vec<_>>>()?;
    Ok(PositiveMeasureReport { mstar, depths })
}
