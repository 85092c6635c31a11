use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use marstrand_lab::commands::{self, KernelOptions, Outcome, PolytopeOptions};
use marstrand_lab::drivers::with_workers;
use marstrand_lab::formats::{self, Instance};
use marstrand_lab::{LabError, LabResult};

#[derive(Parser)]
#[command(name = "marstrand", version, about = "Exact projection-dimension bounds, weights, kernel checks and fractal experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct InstanceArgs {
    /// Instance JSON file.
    #[arg(short = 'i', long = "instance")]
    instance: PathBuf,
    /// Override the dimension vector, e.g. `3/5,7/10`.
    #[arg(long)]
    dims: Option<String>,
    /// Override the target sum `s`.
    #[arg(long)]
    s: Option<String>,
}

#[derive(Args)]
struct RunArgs {
    /// Worker threads (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Compute 𝔪 with its per-subset table.
    Mstar {
        #[command(flatten)]
        instance: InstanceArgs,
    },
    /// Solve for convex weights α over 𝕁̄ with Σα·Ĵ(i) ≤ d.
    Weights {
        #[command(flatten)]
        instance: InstanceArgs,
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Check that the vertices of P are Ĵ(i) vectors and that P decomposes.
    VerifyPolytope {
        #[arg(short = 'i', long = "instance", required_unless_present = "random")]
        instance: Option<PathBuf>,
        #[arg(long)]
        s: Option<String>,
        /// Check this many seeded random instances instead of a file.
        #[arg(long, conflicts_with = "instance")]
        random: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Random points per instance for membership against decomposition.
        #[arg(long, default_value_t = 20)]
        points: usize,
        /// Random points of P per instance given to the weights solver.
        #[arg(long, default_value_t = 50)]
        weight_draws: usize,
        #[arg(long)]
        budget: Option<usize>,
        /// Directory for vertices.csv.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Kernel bound ratios over random pairs, homogeneity and the Gaussian identity table.
    KernelCheck {
        #[command(flatten)]
        instance: InstanceArgs,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Angular quadrature points per sphere coordinate.
        #[arg(long, default_value_t = 64)]
        angular: usize,
        /// Extra pairs with a zero block separation, counted and skipped.
        #[arg(long, default_value_t = 0)]
        inject_degenerate: usize,
        #[arg(long, default_value_t = 100_000)]
        gaussian_samples: u64,
        /// Directory for kernel.csv and gaussian.csv.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run a box-dimension or coverage experiment from a config file.
    Experiment {
        config: PathBuf,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        depth: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// `chi` or `uniform:a,b`.
        #[arg(long)]
        t_law: Option<String>,
        #[arg(long)]
        budget: Option<usize>,
        /// Directory for trials.csv, scales.csv and summary.json.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
    },
}

fn load(args: &InstanceArgs) -> LabResult<Instance> {
    let mut inst = formats::load_instance(&args.instance)?;
    if let Some(d) = &args.dims {
        inst.dims = Some(formats::parse_dims("--dims", &formats::parse_rational_list("--dims", d)?, inst.blocks.n())?);
    }
    if let Some(s) = &args.s {
        inst.s = Some(formats::parse_rational_arg("--s", s)?);
    }
    Ok(inst)
}

fn override_s(inst: &mut Instance, s: &Option<String>) -> LabResult<()> {
    if let Some(s) = s {
        inst.s = Some(formats::parse_rational_arg("--s", s)?);
    }
    Ok(())
}

fn experiment(config: &Path, trials: Option<usize>, depth: Option<usize>, seed: Option<u64>, t_law: &Option<String>, budget: Option<usize>, out: &Option<PathBuf>) -> LabResult<formats::Experiment> {
    let mut e = formats::load_experiment(config)?;
    if let Some(t) = trials {
        if t == 0 {
            return Err(LabError::field("--trials", "must be positive"));
        }
        e.trials = t;
    }
    if let Some(d) = depth {
        if d == 0 {
            return Err(LabError::field("--depth", "must be positive"));
        }
        e.depths = vec![d];
    }
    if let Some(s) = seed {
        e.seed = s;
    }
    if let Some(t) = t_law {
        e.t_law = t.parse().map_err(|err: marstrand_core::Error| LabError::field("--t-law", err.to_string()))?;
    }
    if budget.is_some() {
        e.budget = budget;
    }
    if out.is_some() {
        e.out = out.clone();
    }
    Ok(e)
}

type Ran = (&'static str, Option<String>, LabResult<Outcome>);

fn on_instance(name: &'static str, inst: LabResult<Instance>, f: impl FnOnce(&Instance) -> LabResult<Outcome>) -> Ran {
    match inst {
        Ok(i) => (name, Some(i.digest()), f(&i)),
        Err(e) => (name, None, Err(e)),
    }
}

fn run(cli: &Cli) -> Ran {
    match &cli.command {
        Command::Mstar { instance } => on_instance("mstar", load(instance), commands::cmd_mstar),
        Command::Weights { instance, budget } => on_instance("weights", load(instance), |i| commands::cmd_weights(i, *budget)),
        Command::VerifyPolytope { instance, s, random, seed, points, weight_draws, budget, out, run } => {
            let opts = PolytopeOptions { points: *points, weight_draws: *weight_draws, seed: *seed, budget: *budget, out: out.clone() };
            match (instance, random) {
                (_, Some(n)) => ("verify-polytope", None, with_workers(run.workers, || commands::cmd_verify_random(*n, &opts)).and_then(|r| r)),
                (Some(path), None) => {
                    let inst = formats::load_instance(path).and_then(|mut i| override_s(&mut i, s).map(|_| i));
                    on_instance("verify-polytope", inst, |i| with_workers(run.workers, || commands::cmd_verify_polytope(i, &opts))?)
                }
                (None, None) => ("verify-polytope", None, Err(LabError::field("--instance", "required unless --random is given"))),
            }
        }
        Command::KernelCheck { instance, samples, seed, angular, inject_degenerate, gaussian_samples, out, run } => {
            let opts = KernelOptions {
                samples: *samples,
                seed: *seed,
                angular_points: *angular,
                inject_degenerate: *inject_degenerate,
                gaussian_samples: *gaussian_samples,
                out: out.clone(),
            };
            on_instance("kernel-check", load(instance), |i| with_workers(run.workers, || commands::cmd_kernel_check(i, &opts))?)
        }
        Command::Experiment { config, trials, depth, seed, t_law, budget, out, run } => {
            match experiment(config, *trials, *depth, *seed, t_law, *budget, out) {
                Ok(e) => ("experiment", Some(e.instance.digest()), with_workers(run.workers, || commands::cmd_experiment(&e)).and_then(|r| r)),
                Err(err) => ("experiment", None, Err(err)),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, digest, result) = run(&cli);
    let (report, code) = match result {
        Ok(o) => (o.report, o.exit),
        Err(e) => {
            eprintln!("error: {e}");
            (commands::error_report(name, digest.as_deref(), &e), e.exit_code())
        }
    };
    // a closed stdout must not turn a result into a panic
    let _ = writeln!(std::io::stdout().lock(), "{}", serde_json::to_string_pretty(&report).expect("serializable"));
    ExitCode::from(code as u8)
}
