//! Acceptance criteria 1–10. Each criterion prints one `PASS`/`FAIL` line;
//! the process exits non-zero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use marstrand_core::analysis::{kernel_integral, KernelSetup, SphereRule};
use marstrand_core::exactlin::{int, rank, rat, Rational, RationalMatrix};
use marstrand_core::fractal::{ExperimentSetup, SelfSimilarSpec};
use marstrand_core::mstar::{check_transversality, compute_mstar, DimensionVector};
use marstrand_core::numeric::stream_rng;
use marstrand_core::random::random_instance;
use marstrand_lab::drivers::{self, with_workers};
use rand::Rng;

// Tolerances and sizes, fixed here.
const SUITE_SEED: u64 = 1;
const SUITE_INSTANCES: usize = 200;
const SUITE_POINTS: usize = 20;
const SUITE_WEIGHT_DRAWS: usize = 50;
const SUITE_SECONDS: f64 = 60.0;
const MSTAR_INSTANCES: usize = 200;
const TRANSVERSAL_INSTANCES: usize = 100;
const GAUSS_DIMS: [usize; 3] = [1, 2, 3];
const GAUSS_PAIRS: usize = 10;
const GAUSS_SAMPLES: u64 = 100_000;
const GAUSS_SEED: u64 = 0;
const GAUSS_SIGMAS: f64 = 3.0;
const GAUSS_SECONDS: f64 = 30.0;
const KERNEL_SAMPLES: usize = 1000;
const KERNEL_SEED: u64 = 0;
const KERNEL_ANGULAR: usize = 64;
const KERNEL_SPREAD: f64 = 1e2;
const HOMOGENEITY_TOL: f64 = 1e-6;
const QUADRATURE_TOL: f64 = 1e-6;
const QUADRATURE_PAIRS: usize = 20;
const ENERGY_DEPTHS: [usize; 7] = [4, 5, 6, 7, 8, 9, 10];
const ENERGY_S: [f64; 2] = [0.5, 0.7];
const ENERGY_FROM_DEPTH: usize = 8;
const ENERGY_RATIO: f64 = 1.05;
const DIM_DEPTH: usize = 8;
const DIM_MIN_ATOMS: usize = 10_000;
const DIM_TOL: f64 = 0.08;
const DIM_FRACTION: f64 = 0.9;
const DIM_SECONDS: f64 = 120.0;
const EXP_SEED: u64 = 42;
const EXP_TRIALS: usize = 20;
const COVER_DEPTHS: [usize; 5] = [6, 7, 8, 9, 10];
const COVER_THRESHOLD: f64 = 0.3;
const COVER_FRACTION: f64 = 0.9;
const CONTROL_THRESHOLD: f64 = 0.95;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn sum_setup(d: [(i64, i64); 2]) -> KernelSetup {
    let pi = RationalMatrix::from_i64_rows(&[&[1, 1]]);
    let b = marstrand_core::exactlin::BlockStructure::new(vec![1, 1], 1).unwrap();
    let d = DimensionVector::new(d.iter().map(|&(p, q)| rat(p, q)).collect()).unwrap();
    KernelSetup::new(&pi, &b, &d).unwrap()
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

// ---------------------------------------------------------------- 1–3

fn polytope_suite() -> (Vec<drivers::PolytopeCase>, f64) {
    let start = Instant::now();
    let cases = drivers::polytope_suite(SUITE_SEED, SUITE_INSTANCES, SUITE_POINTS, SUITE_WEIGHT_DRAWS).unwrap();
    (cases, start.elapsed().as_secs_f64())
}

fn criterion1(cases: &[drivers::PolytopeCase], secs: f64) -> Verdict {
    let vertices: usize = cases.iter().map(|c| c.claim.matches.len()).sum();
    let unmatched: usize = cases.iter().map(|c| c.claim.unmatched().count()).sum();
    let pass = cases.len() >= SUITE_INSTANCES && unmatched == 0 && secs < SUITE_SECONDS;
    verdict(pass, format!("{} instances, {vertices} vertices, {unmatched} without a Ĵ(i), {secs:.1} s (limit {SUITE_SECONDS} s)", cases.len()))
}

fn failures_of(cases: &[drivers::PolytopeCase], check: &str) -> usize {
    cases.iter().flat_map(|c| &c.failures).filter(|f| f.check == check).count()
}

fn criterion2(cases: &[drivers::PolytopeCase]) -> Verdict {
    let checks: usize = cases.iter().map(|c| c.membership_checks).sum();
    let members: usize = cases.iter().map(|c| c.members).sum();
    let bad = failures_of(cases, "decomposition");
    verdict(bad == 0 && checks == SUITE_INSTANCES * SUITE_POINTS, format!("{checks} points ({members} in P), {bad} mismatches between membership and decomposition"))
}

fn criterion3(cases: &[drivers::PolytopeCase]) -> Verdict {
    let checks: usize = cases.iter().map(|c| c.weight_checks).sum();
    let fallbacks: usize = cases.iter().map(|c| c.weight_fallbacks).sum();
    let bad = failures_of(cases, "weights");
    verdict(bad == 0 && checks == SUITE_INSTANCES * SUITE_WEIGHT_DRAWS, format!("{checks} points of P ({fallbacks} via Ĵ + bump), {bad} without valid weights"))
}

// ---------------------------------------------------------------- 4

/// Rank by plain Gaussian elimination over ℚ.
fn gauss_rank(rows: Vec<Vec<Rational>>) -> usize {
    let mut m = rows;
    let cols = m.first().map_or(0, |r| r.len());
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..m.len()).find(|&i| m[i][c] != int(0)) else { continue };
        m.swap(r, p);
        let inv = m[r][c].recip();
        for i in 0..m.len() {
            if i != r && m[i][c] != int(0) {
                let f = &m[i][c] * &inv;
                for j in c..cols {
                    let v = &f * &m[r][j];
                    m[i][j] -= v;
                }
            }
        }
        r += 1;
    }
    r
}

fn oracle_mstar(pi: &RationalMatrix, sizes: &[usize], d: &[Rational]) -> Rational {
    let n = sizes.len();
    let starts: Vec<usize> = sizes.iter().scan(0, |s, &m| { let v = *s; *s += m; Some(v) }).collect();
    let mut best: Option<Rational> = None;
    for mask in 1u32..(1 << n) {
        let cols: Vec<usize> = (0..n).filter(|i| mask & (1 << i) == 0).flat_map(|i| starts[i]..starts[i] + sizes[i]).collect();
        let sub: Vec<Vec<Rational>> = (0..pi.rows()).map(|r| cols.iter().map(|&c| pi.get(r, c).clone()).collect()).collect();
        let dim = if cols.is_empty() { 0 } else { gauss_rank(sub) };
        let v: Rational = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| d[i].clone()).sum::<Rational>() + int(dim as i64);
        if best.as_ref().is_none_or(|b| v < *b) {
            best = Some(v);
        }
    }
    best.unwrap()
}

fn criterion4() -> Verdict {
    let mut rng = stream_rng(4, 0);
    let mut mismatches = 0;
    for _ in 0..MSTAR_INSTANCES {
        let inst = random_instance(&mut rng);
        assert_eq!(rank(&inst.pi), gauss_rank((0..inst.pi.rows()).map(|r| inst.pi.row(r).to_vec()).collect()));
        let d: Vec<Rational> = inst.blocks.sizes().iter().map(|&m| {
            let q = rng.random_range(1..=6i64);
            rat(rng.random_range(0..=m as i64 * q), q)
        }).collect();
        let got = compute_mstar(&inst.pi, &inst.blocks, &DimensionVector::new(d.clone()).unwrap()).unwrap().value;
        mismatches += (got != oracle_mstar(&inst.pi, inst.blocks.sizes(), &d)) as usize;
    }
    let mut rng = stream_rng(4, 1);
    let (mut seen, mut broken) = (0, 0);
    while seen < TRANSVERSAL_INSTANCES {
        let inst = random_instance(&mut rng);
        if !check_transversality(&inst.pi, &inst.blocks).unwrap().holds {
            continue;
        }
        seen += 1;
        // d_i ∈ (0, m_i]: the equivalence fails on the boundary d_i = 0
        let d: Vec<Rational> = inst.blocks.sizes().iter().map(|&m| {
            let q = rng.random_range(1..=6i64);
            rat(rng.random_range(1..=m as i64 * q), q)
        }).collect();
        let m = compute_mstar(&inst.pi, &inst.blocks, &DimensionVector::new(d.clone()).unwrap()).unwrap().value;
        let k = int(inst.blocks.k() as i64);
        broken += ((m > k) != (d.iter().sum::<Rational>() > k)) as usize;
    }
    verdict(
        mismatches == 0 && broken == 0,
        format!("{MSTAR_INSTANCES} instances, {mismatches} disagreements with the enumerator; {seen} transversal instances, {broken} violate 𝔪 > k ⇔ Σd > k"),
    )
}

// ---------------------------------------------------------------- 5

fn gaussian_cos_quadrature(a: f64) -> f64 {
    simpson(|t| (a * t).cos() * (-0.5 * t * t).exp(), -12.0, 12.0, 20_000)
}

fn gaussian_table() -> Vec<drivers::GaussianEntry> {
    drivers::gaussian_table(&GAUSS_DIMS, GAUSS_PAIRS, GAUSS_SAMPLES, GAUSS_SEED).unwrap()
}

fn criterion5() -> Verdict {
    let start = Instant::now();
    let table = gaussian_table();
    let secs = start.elapsed().as_secs_f64();
    let violations = drivers::constancy_violations(&table, GAUSS_SIGMAS);
    let mut worst: f64 = 0.0;
    let mut oracle_bad = 0;
    for e in table.iter().filter(|e| e.m == 1) {
        let a = e.product();
        let oracle = gaussian_cos_quadrature(a) / (-0.5 * a * a).exp();
        // the quadrature itself is accurate to ~1e−12; that floor covers σ = 0 at z·η = 0
        let off = (e.estimate.ratio - oracle).abs();
        let allowed = GAUSS_SIGMAS * e.estimate.stderr + 1e-9;
        worst = worst.max(off / allowed);
        oracle_bad += (off > allowed) as usize;
    }
    verdict(
        violations.is_empty() && oracle_bad == 0 && secs < GAUSS_SECONDS,
        format!(
            "{} entries × {GAUSS_SAMPLES} samples, {} same-m pairs beyond {GAUSS_SIGMAS}σ, m = 1 oracle misses {oracle_bad} (worst {worst:.2} of the allowance), {secs:.1} s",
            table.len(),
            violations.len()
        ),
    )
}

// ---------------------------------------------------------------- 6

/// `∫_ℝ |ξ|^{𝔪−1} e^{−q ξ²/2} dξ = (2/𝔪) ∫_0^∞ exp(−q u^{2/𝔪}/2) du` with `u = ξ^𝔪`.
fn direct_k1(q: f64, m: f64) -> f64 {
    let upper = (100.0 / q).powf(m / 2.0);
    2.0 / m * simpson(|u| (-0.5 * q * u.powf(2.0 / m)).exp(), 0.0, upper, 200_000)
}

fn kernel_cases() -> [(&'static str, KernelSetup); 2] {
    [("above-k d=(3/5,7/10)", sum_setup([(3, 5), (7, 10)])), ("fractional d=(2/5,2/5)", sum_setup([(2, 5), (2, 5)]))]
}

fn criterion6() -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, setup) in kernel_cases() {
        let sweep = drivers::kernel_sweep(&setup, KERNEL_SAMPLES, KERNEL_SEED, KERNEL_ANGULAR, 0).unwrap();
        let stats = sweep.stats();
        let rule = SphereRule::new(1, KERNEL_ANGULAR).unwrap();
        let homog = drivers::homogeneity_residual(&setup, &rule, KERNEL_SEED, 16, &[0.5, 2.0, 17.0]).unwrap();
        let mut quad: f64 = 0.0;
        for s in sweep.samples.iter().take(QUADRATURE_PAIRS) {
            let inst = setup.instance_from_z(&s.z).unwrap();
            let got = kernel_integral(&inst, KERNEL_ANGULAR).unwrap();
            let want = direct_k1(s.z.iter().map(|z| z * z).sum(), setup.mstar_f64());
            quad = quad.max(((got - want) / want).abs());
        }
        let ok = stats.spread <= KERNEL_SPREAD && homog <= HOMOGENEITY_TOL && quad <= QUADRATURE_TOL;
        pass &= ok;
        parts.push(format!(
            "{name}: max/min {:.1} (limit {KERNEL_SPREAD}), homogeneity {homog:.1e}, quadrature {quad:.1e}{}",
            stats.spread,
            if ok { "" } else { " [over]" }
        ));
    }
    verdict(pass, parts.join("; "))
}

// ---------------------------------------------------------------- 7

fn energy_rows() -> Vec<drivers::EnergyRow> {
    drivers::energy_table(&SelfSimilarSpec::middle_third(), &ENERGY_DEPTHS, &ENERGY_S).unwrap()
}

fn criterion7() -> Verdict {
    let rows = energy_rows();
    let ratios = |s: f64| -> Vec<(usize, f64)> {
        rows.iter().filter(|r| r.s == s && r.depth >= ENERGY_FROM_DEPTH).map(|r| (r.depth, r.ratio.unwrap())).collect()
    };
    let bounded = ratios(ENERGY_S[0]);
    let growing = ratios(ENERGY_S[1]);
    let pass = bounded.iter().all(|&(_, q)| q <= ENERGY_RATIO) && growing.iter().all(|&(_, q)| q >= ENERGY_RATIO);
    let fmt = |v: &[(usize, f64)]| v.iter().map(|(d, q)| format!("L{d} {q:.3}")).collect::<Vec<_>>().join(", ");
    verdict(pass, format!("s = 0.5 ratios [{}] (need ≤ {ENERGY_RATIO}); s = 0.7 ratios [{}] (need ≥ {ENERGY_RATIO})", fmt(&bounded), fmt(&growing)))
}

// ---------------------------------------------------------------- 8, 9

fn dimension_setup() -> ExperimentSetup {
    let spec = SelfSimilarSpec::two_map_cantor(0.4).unwrap();
    ExperimentSetup::new(RationalMatrix::from_i64_rows(&[&[1, 1]]), vec![spec.clone(), spec], EXP_SEED, EXP_TRIALS).unwrap()
}

fn coverage_setup() -> ExperimentSetup {
    let mt = SelfSimilarSpec::middle_third();
    ExperimentSetup::new(RationalMatrix::from_i64_rows(&[&[1, 1]]), vec![mt.clone(), mt], EXP_SEED, EXP_TRIALS).unwrap()
}

fn criterion8() -> Verdict {
    let start = Instant::now();
    let setup = dimension_setup();
    let r = drivers::run_dimension(&setup, DIM_DEPTH, None).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let within = r.fraction_within(DIM_TOL);
    let pass = (r.mstar - 0.8).abs() < 1e-12 && r.atoms >= DIM_MIN_ATOMS && within >= DIM_FRACTION && secs < DIM_SECONDS;
    verdict(
        pass,
        format!(
            "𝔪 = {:.4}, depth {DIM_DEPTH} ({} atoms), median slope {:.4}, {:.0}% within {DIM_TOL} (need {:.0}%), {secs:.1} s",
            r.mstar,
            r.atoms,
            r.median(),
            100.0 * within,
            100.0 * DIM_FRACTION
        ),
    )
}

fn criterion9() -> Verdict {
    let setup = coverage_setup();
    let (mstar, depths, err) = drivers::run_coverage(&setup, &COVER_DEPTHS).unwrap();
    assert!(err.is_none(), "{err:?}");
    let medians: Vec<f64> = depths.iter().map(|d| d.median()).collect();
    let non_decreasing = medians.windows(2).all(|w| w[1] >= w[0]);
    let fractions: Vec<f64> = depths.iter().map(|d| d.fraction_at_least(COVER_THRESHOLD)).collect();
    let controls: Vec<f64> = depths.iter().map(|d| d.control).collect();
    let pass = (mstar - 2.0 * 2f64.ln() / 3f64.ln()).abs() < 1e-12
        && non_decreasing
        && fractions.iter().all(|&f| f >= COVER_FRACTION)
        && controls.iter().all(|&c| c >= CONTROL_THRESHOLD);
    verdict(
        pass,
        format!(
            "𝔪 = {mstar:.4}, medians {:?}, fraction ≥ {COVER_THRESHOLD} per depth {:?}, control {:?}",
            medians.iter().map(|m| format!("{m:.3}")).collect::<Vec<_>>(),
            fractions,
            controls
        ),
    )
}

// ---------------------------------------------------------------- 10

/// Every CSV produced by criteria 5–9, computed on the current pool.
fn all_csv() -> Vec<(&'static str, String)> {
    let mut out = vec![("gaussian", drivers::gaussian_csv(&gaussian_table()).unwrap())];
    for (name, setup) in kernel_cases() {
        out.push((name, drivers::kernel_csv(&drivers::kernel_sweep(&setup, KERNEL_SAMPLES, KERNEL_SEED, KERNEL_ANGULAR, 0).unwrap()).unwrap()));
    }
    out.push(("energy", drivers::energy_csv(&energy_rows()).unwrap()));
    let r = drivers::run_dimension(&dimension_setup(), DIM_DEPTH, None).unwrap();
    out.push(("dimension trials", drivers::dimension_trials_csv(&r, EXP_SEED).unwrap()));
    out.push(("dimension scales", drivers::dimension_scales_csv(&r).unwrap()));
    let (_, depths, _) = drivers::run_coverage(&coverage_setup(), &COVER_DEPTHS).unwrap();
    out.push(("coverage trials", drivers::coverage_trials_csv(&depths, EXP_SEED).unwrap()));
    out.push(("coverage scales", drivers::coverage_scales_csv(&depths).unwrap()));
    out
}

fn criterion10() -> Verdict {
    let runs: Vec<Vec<(&str, String)>> = [1, 4, 4].iter().map(|&w| with_workers(Some(w), all_csv).unwrap()).collect();
    let differing: Vec<&str> = runs[0]
        .iter()
        .enumerate()
        .filter(|(i, (_, text))| runs[1..].iter().any(|r| r[*i].1 != *text))
        .map(|(_, (name, _))| *name)
        .collect();
    let bytes: usize = runs[0].iter().map(|(_, t)| t.len()).sum();
    verdict(differing.is_empty(), format!("{} CSV files ({bytes} bytes) over workers 1, 4, 4; differing: {differing:?}", runs[0].len()))
}

fn main() {
    let start = Instant::now();
    let suite = catch_unwind(polytope_suite);
    let criteria: Vec<(u32, Box<dyn Fn() -> Verdict>)> = vec![
        (1, Box::new(|| suite.as_ref().map(|(c, s)| criterion1(c, *s)).unwrap_or_else(|_| verdict(false, "suite panicked".into())))),
        (2, Box::new(|| suite.as_ref().map(|(c, _)| criterion2(c)).unwrap_or_else(|_| verdict(false, "suite panicked".into())))),
        (3, Box::new(|| suite.as_ref().map(|(c, _)| criterion3(c)).unwrap_or_else(|_| verdict(false, "suite panicked".into())))),
        (4, Box::new(criterion4)),
        (5, Box::new(criterion5)),
        (6, Box::new(criterion6)),
        (7, Box::new(criterion7)),
        (8, Box::new(criterion8)),
        (9, Box::new(criterion9)),
        (10, Box::new(criterion10)),
    ];
    let mut failed = Vec::new();
    for (n, f) in &criteria {
        let v = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default();
            verdict(false, format!("panicked: {msg}"))
        });
        println!("{} criterion {n}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        if !v.pass {
            failed.push(*n);
        }
    }
    println!("acceptance: {} of {} criteria pass ({:.1} s); failing: {failed:?}", criteria.len() - failed.len(), criteria.len(), start.elapsed().as_secs_f64());
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
