//! Parallel drivers. Every unit of work is a pure function of `(seed, index)`
//! and results are collected in index order, so outputs do not depend on the
//! number of workers.

use marstrand_core::analysis::{
    energy_s, gaussian_identity_chunk, gaussian_identity_chunks, gaussian_identity_finish, kernel_bound_ratio, Energy,
    GaussianIdentityEstimate, KernelSetup, SphereRule,
};
use marstrand_core::conformal::ConformalParameter;
use marstrand_core::exactlin::{format_rational, int, BlockStructure, Rational, RationalMatrix};
use marstrand_core::fractal::{
    build_cantor, coverage_for_lambda, coverage_trial, dimension_prepare, dimension_trial, factor_diameters, finish_dimension,
    positive_measure_check, CoverageTrial, DepthCoverage, DimensionReport, ExperimentSetup, ScaleRange, SelfSimilarSpec,
    DEFAULT_ATOM_BUDGET,
};
use marstrand_core::numeric::{median, stream_rng};
use marstrand_core::random::{random_instance, random_point, random_point_in};
use marstrand_core::weights::{verify_vertex_claim_for, weights_for, JFamily, Polyhedron, VertexClaimReport, DEFAULT_BUDGET};
use marstrand_core::{Error, Result};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{LabError, LabResult};
use crate::formats::f64_digest;

/// Runs `f` on a dedicated pool of `workers` threads, or the global pool for `None`.
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> LabResult<T> {
    match workers {
        None => Ok(f()),
        Some(0) => Err(LabError::field("workers", "must be positive")),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().map_err(|e| LabError::field("workers", e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

fn csv_string(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> LabResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    let bytes = w.into_inner().map_err(|e| LabError::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
}

fn join_rational(values: &[Rational]) -> String {
    values.iter().map(format_rational).collect::<Vec<_>>().join(" ")
}

fn unit_vector<R: Rng + ?Sized>(rng: &mut R, m: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-12 {
            return v.iter().map(|x| x / n).collect();
        }
    }
}

// ---------------------------------------------------------------- polytope

#[derive(Debug, Clone, Serialize)]
pub struct Counterexample {
    pub check: String,
    pub k: usize,
    pub blocks: Vec<usize>,
    pub matrix: Vec<Vec<String>>,
    pub s: String,
    pub point: Vec<String>,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct PolytopeCase {
    pub index: usize,
    pub pi: RationalMatrix,
    pub blocks: BlockStructure,
    pub s: Rational,
    pub claim: VertexClaimReport,
    pub membership_checks: usize,
    pub members: usize,
    pub weight_checks: usize,
    /// Weight draws that fell back to `Ĵ + bump` after rejection sampling missed `P`.
    pub weight_fallbacks: usize,
    pub failures: Vec<Counterexample>,
}

impl PolytopeCase {
    pub fn passed(&self) -> bool {
        self.claim.passed() && self.failures.is_empty()
    }
}

fn counterexample(pi: &RationalMatrix, blocks: &BlockStructure, s: &Rational, check: &str, point: &[Rational], detail: String) -> Counterexample {
    Counterexample {
        check: check.into(),
        k: blocks.k(),
        blocks: blocks.sizes().to_vec(),
        matrix: (0..pi.rows()).map(|r| pi.row(r).iter().map(format_rational).collect()).collect(),
        s: format_rational(s),
        point: point.iter().map(format_rational).collect(),
        detail,
    }
}

/// Vertex claim, `membership ⇔ decomposition` on `points` random points, and
/// `find_weights` on `weight_draws` points of `P`, for one instance.
pub fn check_polytope<R: Rng + ?Sized>(
    index: usize,
    pi: &RationalMatrix,
    blocks: &BlockStructure,
    s: &Rational,
    rng: &mut R,
    points: usize,
    weight_draws: usize,
    budget: usize,
) -> Result<PolytopeCase> {
    let poly = Polyhedron::new(pi, blocks, s.clone())?;
    let family = JFamily::new(pi, blocks, s, budget)?;
    let claim = verify_vertex_claim_for(&poly, family.clone())?;
    let mut failures: Vec<Counterexample> = claim
        .unmatched()
        .map(|v| counterexample(pi, blocks, s, "vertex", &v.vertex, "vertex of P is no Ĵ(i)".into()))
        .collect();
    let n = blocks.n();
    let mut members = 0;
    for _ in 0..points {
        let x = random_point(rng, n, 3, 6);
        let inside = poly.contains(&x);
        members += inside as usize;
        match family.decompose(&x) {
            Some(_) if !inside => failures.push(counterexample(pi, blocks, s, "decomposition", &x, "decomposes but lies outside P".into())),
            Some(dec) if dec.reconstruct(&family) != x => failures.push(counterexample(pi, blocks, s, "decomposition", &x, "reconstruction differs".into())),
            None if inside => failures.push(counterexample(pi, blocks, s, "decomposition", &x, "in P but no decomposition".into())),
            _ => {}
        }
    }
    let mut fallbacks = 0;
    for _ in 0..weight_draws {
        let d = match random_point_in(rng, &poly, 3, 6, 200) {
            Some(d) => d,
            None => {
                fallbacks += 1;
                let j = &family.jbar[rng.random_range(0..family.jbar.len())];
                let bump = random_point(rng, n, 1, 6);
                j.coords.iter().zip(&bump).map(|(a, b)| a + b).collect()
            }
        };
        match weights_for(&family, &d) {
            Ok(a) if a.alpha_sum() == int(1) && a.verify(&d) => {}
            Ok(_) => failures.push(counterexample(pi, blocks, s, "weights", &d, "Σα ≠ 1 or Σα·Ĵ(i) ≰ d".into())),
            Err(e) => failures.push(counterexample(pi, blocks, s, "weights", &d, e.to_string())),
        }
    }
    Ok(PolytopeCase {
        index,
        pi: pi.clone(),
        blocks: blocks.clone(),
        s: s.clone(),
        claim,
        membership_checks: points,
        members,
        weight_checks: weight_draws,
        weight_fallbacks: fallbacks,
        failures,
    })
}

/// `instances` random instances; instance `i` draws from stream `i`.
pub fn polytope_suite(seed: u64, instances: usize, points: usize, weight_draws: usize) -> Result<Vec<PolytopeCase>> {
    (0..instances)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            let inst = random_instance(&mut rng);
            check_polytope(i, &inst.pi, &inst.blocks, &inst.s, &mut rng, points, weight_draws, DEFAULT_BUDGET)
        })
        .collect()
}

pub fn vertices_csv(cases: &[PolytopeCase]) -> LabResult<String> {
    let rows = cases.iter().flat_map(|c| {
        c.claim.matches.iter().map(move |m| {
            let witness = m.witness.map(|w| c.claim.family.jbar[w].to_string()).unwrap_or_default();
            vec![c.index.to_string(), join_rational(&m.vertex), m.witness.is_some().to_string(), witness]
        })
    });
    csv_string(&["instance", "vertex", "matched", "witness"], rows)
}

// ---------------------------------------------------------------- gaussian

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianEntry {
    pub m: usize,
    pub pair: usize,
    pub seed: u64,
    pub z: Vec<f64>,
    pub eta: Vec<f64>,
    pub estimate: GaussianIdentityEstimate,
}

impl GaussianEntry {
    pub fn product(&self) -> f64 {
        let n = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        n(&self.z) * n(&self.eta)
    }
}

/// Stream reserved for the geometry of a pair, far from the chunk streams.
const PAIR_STREAM: u64 = u64::MAX;

/// `pairs` pairs `(z, η)` in `ℝ^m` with `|z||η|` spread over `[0, 3]`.
pub fn gaussian_pair(m: usize, pair: usize, pairs: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = stream_rng(seed, PAIR_STREAM);
    let a = if pairs > 1 { 3.0 * pair as f64 / (pairs - 1) as f64 } else { 0.0 };
    let zn: f64 = rng.random_range(0.5..1.5);
    let z: Vec<f64> = unit_vector(&mut rng, m).iter().map(|v| zn * v).collect();
    let eta: Vec<f64> = unit_vector(&mut rng, m).iter().map(|v| a / zn * v).collect();
    (z, eta)
}

/// Entry `(m, j)` uses seed `seed + 1 + (m − 1)·pairs + j`; chunks run in parallel.
pub fn gaussian_table(dims: &[usize], pairs: usize, samples: u64, seed: u64) -> Result<Vec<GaussianEntry>> {
    if samples < 1000 {
        return Err(Error::Precondition(format!("at least 1000 samples required, got {samples}")));
    }
    let jobs: Vec<(usize, usize)> = dims.iter().flat_map(|&m| (0..pairs).map(move |j| (m, j))).collect();
    Ok(jobs
        .par_iter()
        .map(|&(m, j)| {
            let entry_seed = seed.wrapping_add(1 + ((m - 1) * pairs + j) as u64);
            let (z, eta) = gaussian_pair(m, j, pairs, entry_seed);
            let chunks: Vec<(u64, u64)> = gaussian_identity_chunks(samples).collect();
            let moments: Vec<_> = chunks.par_iter().map(|&(c, len)| gaussian_identity_chunk(m, &z, &eta, entry_seed, c, len)).collect();
            let estimate = gaussian_identity_finish(m, &z, &eta, &moments);
            GaussianEntry { m, pair: j, seed: entry_seed, z, eta, estimate }
        })
        .collect())
}

/// Pairs `(i, j)` of entries with equal `m` whose ratios differ by more than
/// `sigmas` combined standard errors.
pub fn constancy_violations(entries: &[GaussianEntry], sigmas: f64) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..entries.len() {
        for j in i + 1..entries.len() {
            let (a, b) = (&entries[i], &entries[j]);
            if a.m != b.m {
                continue;
            }
            let se = (a.estimate.stderr.powi(2) + b.estimate.stderr.powi(2)).sqrt();
            if (a.estimate.ratio - b.estimate.ratio).abs() > sigmas * se {
                out.push((i, j));
            }
        }
    }
    out
}

pub fn gaussian_csv(entries: &[GaussianEntry]) -> LabResult<String> {
    let rows = entries.iter().map(|e| {
        vec![
            e.m.to_string(),
            e.pair.to_string(),
            e.seed.to_string(),
            join(&e.z),
            join(&e.eta),
            e.product().to_string(),
            e.estimate.ratio.to_string(),
            e.estimate.stderr.to_string(),
            e.estimate.imag.to_string(),
            e.estimate.imag_stderr.to_string(),
            e.estimate.samples.to_string(),
        ]
    });
    csv_string(&["m", "pair", "seed", "z", "eta", "z_eta", "ratio", "stderr", "imag", "imag_stderr", "samples"], rows)
}

// ---------------------------------------------------------------- kernel

#[derive(Debug, Clone, PartialEq)]
pub struct KernelSample {
    pub index: usize,
    pub z: Vec<f64>,
    pub pivot: Option<usize>,
    pub dprime: Vec<Rational>,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelSweep {
    pub samples: Vec<KernelSample>,
    /// Injected pairs with a zero block separation, counted and skipped.
    pub skipped: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatioStats {
    pub min: f64,
    pub median: f64,
    pub max: f64,
    pub spread: f64,
}

impl KernelSweep {
    pub fn ratios(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.ratio).collect()
    }

    pub fn stats(&self) -> RatioStats {
        let r = self.ratios();
        let min = r.iter().copied().fold(f64::INFINITY, f64::min);
        let max = r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        RatioStats { min, median: median(&r), max, spread: max / min }
    }
}

/// One random pair: `x` uniform in `[−1, 1]^D`, `y^i = x^i + z_i u_i` with
/// `z_i` log-uniform in `[1e−4, 1]` and `u_i` a uniform unit vector. With
/// `degenerate = Some(i)` block `i` gets `y^i = x^i`.
pub fn random_pair(blocks: &BlockStructure, seed: u64, index: usize, degenerate: Option<usize>) -> (Vec<f64>, Vec<f64>) {
    let mut rng = stream_rng(seed, index as u64);
    let x: Vec<f64> = (0..blocks.total_dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut y = x.clone();
    for i in 0..blocks.n() {
        let z = 10f64.powf(rng.random_range(-4.0..0.0));
        let u = unit_vector(&mut rng, blocks.size(i));
        if degenerate == Some(i) {
            continue;
        }
        for (c, ui) in blocks.columns(i).zip(u) {
            y[c] += z * ui;
        }
    }
    (x, y)
}

/// `samples` random pairs, then `inject` degenerate ones (indices after the samples).
pub fn kernel_sweep(setup: &KernelSetup, samples: usize, seed: u64, angular_points: usize, inject: usize) -> Result<KernelSweep> {
    let blocks = setup.blocks().clone();
    let n = blocks.n();
    let results: Vec<Result<Option<KernelSample>>> = (0..samples + inject)
        .into_par_iter()
        .map(|index| {
            let degenerate = (index >= samples).then(|| (index - samples) % n);
            let (x, y) = random_pair(&blocks, seed, index, degenerate);
            match setup.instance(&x, &y) {
                Ok(inst) => {
                    let ratio = kernel_bound_ratio(&inst, angular_points)?;
                    Ok(Some(KernelSample { index, z: inst.z, pivot: inst.pivot, dprime: inst.dprime, ratio }))
                }
                Err(Error::DegeneratePair { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect();
    let mut out = Vec::with_capacity(samples);
    let mut skipped = 0;
    for r in results {
        match r? {
            Some(s) => out.push(s),
            None => skipped += 1,
        }
    }
    Ok(KernelSweep { samples: out, skipped })
}

pub fn kernel_csv(sweep: &KernelSweep) -> LabResult<String> {
    let rows = sweep.samples.iter().map(|s| {
        vec![
            s.index.to_string(),
            join(&s.z),
            s.pivot.map(|p| (p + 1).to_string()).unwrap_or_default(),
            join_rational(&s.dprime),
            s.ratio.to_string(),
        ]
    });
    csv_string(&["sample", "z", "pivot", "dprime", "ratio"], rows)
}

/// Largest relative residual of `K(c z) = c^{−𝔪} K(z)` over `points` random
/// separations and the given scalings.
pub fn homogeneity_residual(setup: &KernelSetup, rule: &SphereRule, seed: u64, points: usize, scalings: &[f64]) -> Result<f64> {
    let n = setup.blocks().n();
    let m = setup.mstar_f64();
    let residuals: Vec<Result<f64>> = (0..points)
        .into_par_iter()
        .map(|p| {
            let mut rng = stream_rng(seed, p as u64);
            let z: Vec<f64> = (0..n).map(|_| 10f64.powf(rng.random_range(-2.0..0.0))).collect();
            let base = setup.kernel_for_z(&z, rule)?;
            let mut worst: f64 = 0.0;
            for &c in scalings {
                let cz: Vec<f64> = z.iter().map(|v| c * v).collect();
                let want = base * c.powf(-m);
                worst = worst.max(((setup.kernel_for_z(&cz, rule)? - want) / want).abs());
            }
            Ok(worst)
        })
        .collect();
    residuals.into_iter().try_fold(0.0, |acc, r| Ok(f64::max(acc, r?)))
}

// ---------------------------------------------------------------- energy

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyRow {
    pub s: f64,
    pub depth: usize,
    pub atoms: usize,
    pub energy: Energy,
    /// `I_s` at this depth over `I_s` at the previous depth in the table.
    pub ratio: Option<f64>,
}

/// `I_s` of the natural measure of `spec` for every `s` and depth.
pub fn energy_table(spec: &SelfSimilarSpec, depths: &[usize], s_values: &[f64]) -> Result<Vec<EnergyRow>> {
    let measures = depths.par_iter().map(|&d| build_cantor(spec, d, DEFAULT_ATOM_BUDGET)).collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, usize)> = (0..s_values.len()).flat_map(|i| (0..depths.len()).map(move |j| (i, j))).collect();
    let energies: Vec<Energy> = jobs.par_iter().map(|&(i, j)| energy_s(&measures[j], s_values[i])).collect();
    let mut rows = Vec::with_capacity(jobs.len());
    for (&(i, j), e) in jobs.iter().zip(energies) {
        let ratio = match (rows.last().map(|r: &EnergyRow| r.energy), e) {
            (Some(Energy::Finite(prev)), Energy::Finite(cur)) if j > 0 => Some(cur / prev),
            _ => None,
        };
        rows.push(EnergyRow { s: s_values[i], depth: depths[j], atoms: measures[j].len(), energy: e, ratio });
    }
    Ok(rows)
}

fn energy_text(e: Energy) -> String {
    match e {
        Energy::Finite(v) => v.to_string(),
        Energy::Infinite => "inf".into(),
    }
}

pub fn energy_csv(rows: &[EnergyRow]) -> LabResult<String> {
    let rows = rows.iter().map(|r| {
        vec![r.s.to_string(), r.depth.to_string(), r.atoms.to_string(), energy_text(r.energy), r.ratio.map(|v| v.to_string()).unwrap_or_default()]
    });
    csv_string(&["s", "depth", "atoms", "energy", "ratio"], rows)
}

// ---------------------------------------------------------------- experiments

/// Dimension experiment with trials in parallel. `range` overrides the
/// construction-matched scale range.
pub fn run_dimension(setup: &ExperimentSetup, depth: usize, range: Option<ScaleRange>) -> Result<DimensionReport> {
    let (mstar, measure, default_range) = dimension_prepare(setup, depth)?;
    let range = range.unwrap_or(default_range);
    let trials = (0..setup.trials).into_par_iter().map(|t| dimension_trial(setup, &measure, range, t)).collect::<Result<Vec<_>>>()?;
    Ok(finish_dimension(setup, depth, mstar, measure.len(), range, trials))
}

pub fn coverage_depth(setup: &ExperimentSetup, depth: usize) -> Result<DepthCoverage> {
    let measure = setup.product(depth)?;
    let diams = factor_diameters(setup, depth)?;
    let trials = (0..setup.trials)
        .into_par_iter()
        .map(|t| coverage_trial(setup, &measure, &diams, depth, t))
        .collect::<Result<Vec<CoverageTrial>>>()?;
    let control = coverage_for_lambda(setup, &measure, &diams, depth, &ConformalParameter::identity(&setup.blocks))?.1;
    Ok(DepthCoverage { depth, atoms: measure.len(), trials, control })
}

/// Coverage at each depth in order; stops at the first error and returns the
/// depths completed so far with it.
pub fn run_coverage(setup: &ExperimentSetup, depths: &[usize]) -> Result<(f64, Vec<DepthCoverage>, Option<Error>)> {
    let mstar = positive_measure_check(setup)?;
    let mut done = Vec::new();
    for &d in depths {
        match coverage_depth(setup, d) {
            Ok(c) => done.push(c),
            Err(e) => return Ok((mstar, done, Some(e))),
        }
    }
    Ok((mstar, done, None))
}

pub fn dimension_trials_csv(report: &DimensionReport, seed: u64) -> LabResult<String> {
    let rows = report.trials.iter().map(|t| {
        vec![
            t.trial.to_string(),
            seed.to_string(),
            f64_digest(&t.lambda),
            report.depth.to_string(),
            t.estimate.slope.to_string(),
            t.estimate.stderr.to_string(),
        ]
    });
    csv_string(&["trial", "seed", "lambda_digest", "depth", "estimate", "stderr"], rows)
}

pub fn dimension_scales_csv(report: &DimensionReport) -> LabResult<String> {
    let rows = report.trials.iter().flat_map(|t| {
        t.estimate.table.iter().map(move |&(j, count)| {
            let used = t.estimate.scales_used.contains(&j);
            vec![t.trial.to_string(), j.to_string(), 0.5f64.powi(j as i32).to_string(), count.to_string(), used.to_string()]
        })
    });
    csv_string(&["trial", "j", "scale", "count", "fitted"], rows)
}

pub fn coverage_trials_csv(depths: &[DepthCoverage], seed: u64) -> LabResult<String> {
    let rows = depths.iter().flat_map(|d| {
        d.trials.iter().map(move |t| {
            vec![t.trial.to_string(), seed.to_string(), f64_digest(&t.lambda), t.depth.to_string(), t.scale.to_string(), t.coverage.to_string()]
        })
    });
    csv_string(&["trial", "seed", "lambda_digest", "depth", "scale", "coverage"], rows)
}

pub fn coverage_scales_csv(depths: &[DepthCoverage]) -> LabResult<String> {
    let rows = depths.iter().map(|d| {
        let scales: Vec<f64> = d.trials.iter().map(|t| t.scale).collect();
        vec![d.depth.to_string(), d.atoms.to_string(), median(&scales).to_string(), d.median().to_string(), d.control.to_string()]
    });
    csv_string(&["depth", "atoms", "median_scale", "median_coverage", "control"], rows)
}
