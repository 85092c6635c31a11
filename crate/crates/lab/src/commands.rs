//! Subcommand implementations. Each returns a JSON report and an exit code;
//! failures surface as `LabError` and map to exit codes in `error`.

use std::path::{Path, PathBuf};

use marstrand_core::analysis::{KernelSetup, SphereRule};
use marstrand_core::exactlin::{format_rational, to_f64, BlockSet, Rational};
use marstrand_core::fractal::ExperimentSetup;
use marstrand_core::mstar::{check_surjective, check_transversality, compute_mstar, GapClass};
use marstrand_core::numeric::stream_rng;
use marstrand_core::weights::{family, weights_for, WeightsInstance, DEFAULT_BUDGET};
use marstrand_core::Error;
use serde_json::{json, Value};

use crate::drivers::{self, PolytopeCase};
use crate::error::{exit, LabError, LabResult};
use crate::formats::{sha256_hex, Experiment, Instance};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: Value,
    pub exit: i32,
}

impl Outcome {
    fn ok(report: Value) -> Self {
        Outcome { report, exit: exit::OK }
    }
}

pub fn header(command: &str, digest: &str) -> serde_json::Map<String, Value> {
    let mut m = serde_json::Map::new();
    m.insert("tool".into(), json!("marstrand"));
    m.insert("version".into(), json!(VERSION));
    m.insert("command".into(), json!(command));
    m.insert("instance_digest".into(), json!(digest));
    m
}

fn with_header(command: &str, digest: &str, body: Value) -> Value {
    let mut m = header(command, digest);
    if let Value::Object(b) = body {
        m.extend(b);
    }
    Value::Object(m)
}

fn rats(values: &[Rational]) -> Vec<String> {
    values.iter().map(format_rational).collect()
}

fn exact(r: &Rational) -> Value {
    json!({ "exact": format_rational(r), "decimal": to_f64(r) })
}

fn gap_json(class: GapClass) -> Value {
    match class {
        GapClass::AboveK => json!({ "class": "above_k" }),
        GapClass::Fractional { k_prime } => json!({ "class": "fractional", "k_prime": k_prime }),
        GapClass::ForbiddenInteger => json!({ "class": "forbidden_integer" }),
    }
}

fn subset_json(s: BlockSet) -> Value {
    json!(s.one_based())
}

/// Structured body for a failed command.
pub fn error_report(command: &str, digest: Option<&str>, err: &LabError) -> Value {
    let mut m = header(command, digest.unwrap_or(""));
    m.insert("error".into(), json!(err.to_string()));
    m.insert("exit_code".into(), json!(err.exit_code()));
    if let LabError::Core(Error::Infeasible { subset, lhs, s }) = err {
        m.insert("violated_subset".into(), subset_json(*subset));
        m.insert("lhs".into(), json!(lhs));
        m.insert("s".into(), json!(s));
    }
    Value::Object(m)
}

fn write_file(dir: &Path, name: &str, contents: &str) -> LabResult<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| LabError::io(dir, e))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| LabError::io(&path, e))?;
    Ok(path)
}

// ---------------------------------------------------------------- mstar

pub fn cmd_mstar(inst: &Instance) -> LabResult<Outcome> {
    check_surjective(&inst.pi, &inst.blocks)?;
    let d = inst.require_dims()?;
    let r = compute_mstar(&inst.pi, &inst.blocks, d)?;
    let t = check_transversality(&inst.pi, &inst.blocks)?;
    let k = inst.blocks.k();
    let per_subset: Vec<Value> = r.per_subset.iter().map(|row| json!({ "subset": subset_json(row.subset), "value": format_rational(&row.value) })).collect();
    let body = json!({
        "k": k,
        "blocks": inst.blocks.sizes(),
        "dims": rats(d.as_slice()),
        "mstar": exact(&r.value),
        "per_subset": per_subset,
        "minimizers": r.minimizers.iter().map(|s| subset_json(*s)).collect::<Vec<_>>(),
        "transversal": t.holds,
        "transversality_failures": t.failing.iter().map(|s| subset_json(*s)).collect::<Vec<_>>(),
        "gap": gap_json(marstrand_core::mstar::gap_class(&r.value, k)),
    });
    Ok(Outcome::ok(with_header("mstar", &inst.digest(), body)))
}

// ---------------------------------------------------------------- weights

pub fn cmd_weights(inst: &Instance, budget: Option<usize>) -> LabResult<Outcome> {
    check_surjective(&inst.pi, &inst.blocks)?;
    let d = inst.require_dims()?.clone();
    let s = inst.require_s()?.clone();
    if s > marstrand_core::exactlin::int(inst.blocks.k() as i64) {
        return Err(LabError::field("s", format!("must not exceed k = {}", inst.blocks.k())));
    }
    let w = WeightsInstance::new(inst.pi.clone(), inst.blocks.clone(), s.clone(), d.clone())?.with_budget(budget.unwrap_or(DEFAULT_BUDGET));
    w.check_conditions()?;
    let fam = family(&w)?;
    let a = weights_for(&fam, d.as_slice())?;
    let verified = a.verify(d.as_slice());
    if !verified || a.alpha_sum() != marstrand_core::exactlin::int(1) {
        return Err(LabError::Falsified(format!("weights fail Σα·Ĵ(i) ≤ d for d = {:?}", rats(d.as_slice()))));
    }
    let alpha: Vec<Value> = a
        .entries
        .iter()
        .map(|e| {
            let parts: Vec<Vec<usize>> = fam.tuples[e.jhat.tuple].parts.iter().map(|p| p.iter().map(|c| c + 1).collect()).collect();
            json!({ "tuple": parts, "pivot": e.jhat.pivot + 1, "jhat": rats(&e.jhat.coords), "alpha": format_rational(&e.alpha) })
        })
        .collect();
    let inequality: Vec<Value> = a
        .combination
        .iter()
        .zip(d.as_slice())
        .enumerate()
        .map(|(i, (c, di))| json!({ "block": i + 1, "combination": format_rational(c), "d": format_rational(di), "holds": c <= di }))
        .collect();
    let body = json!({
        "s": format_rational(&s),
        "dims": rats(d.as_slice()),
        "jbar_size": a.jbar_size,
        "alpha": alpha,
        "alpha_sum": format_rational(&a.alpha_sum()),
        "combination": rats(&a.combination),
        "inequality": inequality,
        "verified": verified,
    });
    Ok(Outcome::ok(with_header("weights", &inst.digest(), body)))
}

// ---------------------------------------------------------------- verify-polytope

pub struct PolytopeOptions {
    pub points: usize,
    pub weight_draws: usize,
    pub seed: u64,
    pub budget: Option<usize>,
    pub out: Option<PathBuf>,
}

fn polytope_report(command: &str, digest: &str, cases: &[PolytopeCase], opts: &PolytopeOptions) -> LabResult<Outcome> {
    let vertices: usize = cases.iter().map(|c| c.claim.matches.len()).sum();
    let matched: usize = cases.iter().map(|c| c.claim.matches.iter().filter(|m| m.witness.is_some()).count()).sum();
    let failures: Vec<&drivers::Counterexample> = cases.iter().flat_map(|c| &c.failures).collect();
    let passed = cases.iter().all(|c| c.passed());
    let mut files = Vec::new();
    if let Some(dir) = &opts.out {
        files.push(write_file(dir, "vertices.csv", &drivers::vertices_csv(cases)?)?.display().to_string());
    }
    let body = json!({
        "seed": opts.seed,
        "instances": cases.len(),
        "vertices": vertices,
        "vertices_matched": matched,
        "membership_checks": cases.iter().map(|c| c.membership_checks).sum::<usize>(),
        "members": cases.iter().map(|c| c.members).sum::<usize>(),
        "weight_checks": cases.iter().map(|c| c.weight_checks).sum::<usize>(),
        "weight_fallbacks": cases.iter().map(|c| c.weight_fallbacks).sum::<usize>(),
        "passed": passed,
        "counterexamples": failures,
        "files": files,
    });
    Ok(Outcome { report: with_header(command, digest, body), exit: if passed { exit::OK } else { exit::FALSIFIED } })
}

pub fn cmd_verify_polytope(inst: &Instance, opts: &PolytopeOptions) -> LabResult<Outcome> {
    check_surjective(&inst.pi, &inst.blocks)?;
    let s = inst.require_s()?;
    let mut rng = stream_rng(opts.seed, 0);
    let case = drivers::check_polytope(0, &inst.pi, &inst.blocks, s, &mut rng, opts.points, opts.weight_draws, opts.budget.unwrap_or(DEFAULT_BUDGET))?;
    polytope_report("verify-polytope", &inst.digest(), &[case], opts)
}

pub fn cmd_verify_random(instances: usize, opts: &PolytopeOptions) -> LabResult<Outcome> {
    if instances == 0 {
        return Err(LabError::field("random", "must be positive"));
    }
    let cases = drivers::polytope_suite(opts.seed, instances, opts.points, opts.weight_draws)?;
    let digest = sha256_hex(format!("random:{}:{}", opts.seed, instances).as_bytes());
    polytope_report("verify-polytope", &digest, &cases, opts)
}

// ---------------------------------------------------------------- kernel-check

pub struct KernelOptions {
    pub samples: usize,
    pub seed: u64,
    pub angular_points: usize,
    pub inject_degenerate: usize,
    pub gaussian_samples: u64,
    pub out: Option<PathBuf>,
}

pub fn cmd_kernel_check(inst: &Instance, opts: &KernelOptions) -> LabResult<Outcome> {
    check_surjective(&inst.pi, &inst.blocks)?;
    if opts.samples == 0 {
        return Err(LabError::field("samples", "must be positive"));
    }
    let d = inst.require_dims()?;
    let setup = KernelSetup::new(&inst.pi, &inst.blocks, d)?;
    let sweep = drivers::kernel_sweep(&setup, opts.samples, opts.seed, opts.angular_points, opts.inject_degenerate)?;
    let rule = SphereRule::new(inst.blocks.k(), opts.angular_points)?;
    let homogeneity = drivers::homogeneity_residual(&setup, &rule, opts.seed, 16, &[0.5, 2.0, 17.0])?;
    let gaussian = drivers::gaussian_table(&[1, 2, 3], 10, opts.gaussian_samples, opts.seed)?;
    let violations = drivers::constancy_violations(&gaussian, 3.0);
    let mut files = Vec::new();
    if let Some(dir) = &opts.out {
        files.push(write_file(dir, "kernel.csv", &drivers::kernel_csv(&sweep)?)?.display().to_string());
        files.push(write_file(dir, "gaussian.csv", &drivers::gaussian_csv(&gaussian)?)?.display().to_string());
    }
    let table: Vec<Value> = gaussian
        .iter()
        .map(|e| json!({ "m": e.m, "pair": e.pair, "z_eta": e.product(), "ratio": e.estimate.ratio, "stderr": e.estimate.stderr }))
        .collect();
    let body = json!({
        "mstar": exact(&setup.mstar.value),
        "gap": gap_json(setup.class),
        "dprime": setup.exponents.iter().map(|(dp, _)| rats(dp)).collect::<Vec<_>>(),
        "seed": opts.seed,
        "samples": sweep.samples.len(),
        "degenerate_skipped": sweep.skipped,
        "ratio": sweep.stats(),
        "homogeneity_residual": homogeneity,
        "gaussian_identity": { "samples": opts.gaussian_samples, "table": table, "pairs_beyond_3_sigma": violations.len() },
        "files": files,
    });
    Ok(Outcome::ok(with_header("kernel-check", &inst.digest(), body)))
}

// ---------------------------------------------------------------- experiment

fn setup_of(e: &Experiment) -> LabResult<ExperimentSetup> {
    let mut s = ExperimentSetup::new(e.instance.pi.clone(), e.specs.clone(), e.seed, e.trials)?.with_t_law(e.t_law)?;
    if let Some(b) = e.budget {
        s = s.with_budget(b);
    }
    Ok(s)
}

pub fn cmd_experiment(e: &Experiment) -> LabResult<Outcome> {
    let setup = setup_of(e)?;
    let digest = e.instance.digest();
    let mstar = setup.mstar()?;
    let k = setup.blocks.k() as f64;
    let th = e.thresholds;
    let mut files = Vec::new();
    let mut flush = |name: &str, text: &str| -> LabResult<()> {
        if let Some(dir) = &e.out {
            files.push(write_file(dir, name, text)?.display().to_string());
        }
        Ok(())
    };
    let common = json!({
        "seed": e.seed,
        "trials": e.trials,
        "t_law": e.t_law.to_string(),
        "similarity_dimensions": setup.similarity_dimensions(),
        "mstar": mstar,
        "k": setup.blocks.k(),
    });
    let (mut body, exit_code, error) = if mstar <= k {
        if e.depths.len() != 1 {
            return Err(LabError::field("depths", "a dimension experiment (𝔪 ≤ k) takes a single depth"));
        }
        let depth = e.depths[0];
        match drivers::run_dimension(&setup, depth, e.scale_window) {
            Ok(r) => {
                flush("trials.csv", &drivers::dimension_trials_csv(&r, e.seed)?)?;
                flush("scales.csv", &drivers::dimension_scales_csv(&r)?)?;
                let within = r.fraction_within(th.tolerance);
                let passed = within >= th.fraction;
                (
                    json!({
                        "experiment": "dimension",
                        "depth": depth,
                        "atoms": r.atoms,
                        "scale_range": [r.range.min, r.range.max],
                        "bound": r.bound,
                        "median": r.median(),
                        "max_bound_excess": r.max_bound_excess(),
                        "fraction_within": within,
                        "thresholds": { "tolerance": th.tolerance, "fraction": th.fraction },
                        "passed": passed,
                    }),
                    if passed { exit::OK } else { exit::FALSIFIED },
                    None,
                )
            }
            Err(err) => {
                flush("trials.csv", "trial,seed,lambda_digest,depth,estimate,stderr\n")?;
                (json!({ "experiment": "dimension", "depth": depth }), 0, Some(LabError::from(err)))
            }
        }
    } else {
        let (_, depths, err) = drivers::run_coverage(&setup, &e.depths)?;
        flush("trials.csv", &drivers::coverage_trials_csv(&depths, e.seed)?)?;
        flush("scales.csv", &drivers::coverage_scales_csv(&depths)?)?;
        let per_depth: Vec<Value> = depths
            .iter()
            .map(|d| {
                json!({
                    "depth": d.depth,
                    "atoms": d.atoms,
                    "median": d.median(),
                    "fraction_at_least": d.fraction_at_least(th.coverage),
                    "control": d.control,
                })
            })
            .collect();
        let medians: Vec<f64> = depths.iter().map(|d| d.median()).collect();
        let non_decreasing = medians.windows(2).all(|w| w[1] >= w[0]);
        let passed = err.is_none()
            && non_decreasing
            && depths.iter().all(|d| d.fraction_at_least(th.coverage) >= th.fraction && d.control >= th.control);
        (
            json!({
                "experiment": "positive_measure",
                "depths": per_depth,
                "medians_non_decreasing": non_decreasing,
                "thresholds": { "coverage": th.coverage, "fraction": th.fraction, "control": th.control },
                "passed": passed,
            }),
            if passed { exit::OK } else { exit::FALSIFIED },
            err.map(LabError::from),
        )
    };
    if let (Value::Object(b), Value::Object(c)) = (&mut body, common) {
        b.extend(c);
    }
    let exit_code = match &error {
        Some(err) => {
            if let Value::Object(b) = &mut body {
                b.insert("error".into(), json!(err.to_string()));
                b.insert("partial".into(), json!(true));
            }
            err.exit_code()
        }
        None => exit_code,
    };
    if let Value::Object(b) = &mut body {
        b.insert("files".into(), json!(files));
    }
    let report = with_header("experiment", &digest, body);
    if let Some(dir) = &e.out {
        write_file(dir, "summary.json", &serde_json::to_string_pretty(&report).expect("serializable"))?;
    }
    Ok(Outcome { report, exit: exit_code })
}
