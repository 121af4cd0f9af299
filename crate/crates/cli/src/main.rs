use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use cdk_core::branching::find_branching_pairs;
use cdk_core::instances::random_tree;
use cdk_core::io::{GeodesicPlanFile, MeasureSpec, SpaceFile, SpaceSource};
use cdk_core::{
    build_space, check_k_convexity, lift_plan, FiniteMMSpace, LiftStrategy, Log2DemoConfig, Norm,
    ProbMeasure, SpaceGenSpec, TransportPlan,
};
use cdk_lab::report::{canonicalize, emit, plot_csv};
use cdk_lab::scenario::{self, execute, geodesic_plan_json, Inputs, Op, StepOutcome};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "cdk-lab", version, about = "Finite optimal transport and CD(K,∞) experiments")]
struct Cli {
    /// Seed for every randomized choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Numerical tolerance for verdicts.
    #[arg(long, global = true, default_value_t = 1e-9)]
    tol: f64,
    /// Time resolution T of discrete geodesics.
    #[arg(long, global = true)]
    steps: Option<usize>,
    /// Enumeration budget for vertex searches.
    #[arg(long, global = true, default_value_t = 1000)]
    budget: usize,
    /// Output path (stdout when absent; a directory for `run`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Pair {
    /// Space file (JSON).
    #[arg(long)]
    space: PathBuf,
    /// Source measure file (JSON).
    #[arg(long)]
    mu0: PathBuf,
    /// Target measure file (JSON).
    #[arg(long)]
    mu1: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a space file.
    Gen {
        /// Square grid with this many points per side.
        #[arg(long, group = "shape")]
        grid: Option<usize>,
        /// Path graph on this many vertices.
        #[arg(long, group = "shape")]
        path: Option<usize>,
        /// Random tree on this many vertices.
        #[arg(long, group = "shape")]
        tree: Option<usize>,
        /// Grid spacing (dyadic).
        #[arg(long, default_value_t = 0.5)]
        step: f64,
        /// Grid norm: 1, 2 or inf.
        #[arg(long, default_value = "inf")]
        norm: Norm,
    },
    /// Solve for an optimal W2 plan.
    W2 {
        #[command(flatten)]
        pair: Pair,
        /// Also write the plan as `source_id,target_id,mass` CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Lift a plan CSV to a geodesic plan.
    Lift {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        plan: PathBuf,
        #[arg(long, default_value = "uniform")]
        strategy: LiftStrategy,
    },
    /// Check K-convexity of entropy along a geodesic plan.
    CdCheck {
        #[arg(long)]
        space: PathBuf,
        /// Geodesic plan file (JSON).
        #[arg(long)]
        plan: PathBuf,
        #[arg(long = "K", default_value_t = 0.0, allow_negative_numbers = true)]
        k: f64,
    },
    /// Search optimal geodesic plans for a strong CD violation.
    StrongCd {
        #[command(flatten)]
        pair: Pair,
        #[arg(long = "K", default_value_t = 0.0, allow_negative_numbers = true)]
        k: f64,
        /// Random interior plans checked on top of the vertex plans.
        #[arg(long, default_value_t = 100)]
        samples: usize,
    },
    /// Find branching pairs in a geodesic plan.
    BranchScan {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        plan: PathBuf,
    },
    /// Best cut of a pair measure on n points.
    Split {
        #[arg(long)]
        n: usize,
        /// JSON list of `[a, b, mass]`; random when absent.
        #[arg(long)]
        pairs: Option<PathBuf>,
    },
    /// Entropy drop of log 2 from mixing branching families.
    Log2Demo {
        #[arg(long)]
        t1: Option<f64>,
        #[arg(long)]
        t2: Option<f64>,
        #[arg(long = "K", default_value_t = 0.0, allow_negative_numbers = true)]
        k: f64,
        #[arg(long)]
        atoms: Option<usize>,
        /// Plot data CSV.
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Mix two optimal sub-plans at an interior time.
    MixDemo {
        #[command(flatten)]
        pair: Pair,
        #[arg(long)]
        t: Option<f64>,
    },
    /// Decide uniqueness of the optimal plan.
    Unique {
        #[command(flatten)]
        pair: Pair,
    },
    /// Run scenario files; independent scenarios run in parallel.
    Run {
        #[arg(required = true)]
        scenarios: Vec<PathBuf>,
    },
}

const DEFAULT_STEPS: usize = 4;

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| {
        anyhow!("{}: line {}, column {}: {e}", path.display(), e.line(), e.column())
    })
}

fn load_space(path: &Path) -> Result<FiniteMMSpace> {
    Ok(read_json::<SpaceSource>(path)?.build()?)
}

fn load_measure(space: &FiniteMMSpace, path: &Path) -> Result<ProbMeasure> {
    let spec: MeasureSpec = read_json(path)?;
    spec.resolve(space).with_context(|| format!("in {}", path.display()))
}

fn pair_inputs(pair: &Pair) -> Result<Inputs> {
    let space = load_space(&pair.space)?;
    let mu0 = load_measure(&space, &pair.mu0)?;
    let mu1 = load_measure(&space, &pair.mu1)?;
    Ok(Inputs {
        space: Some(space),
        measures: [("mu0".to_string(), mu0), ("mu1".to_string(), mu1)].into(),
    })
}

/// Writes a report with rounded floats and returns whether the verdict passed.
/// Data files (spaces, plans) go through `emit` directly to keep full precision.
fn finish(report: Value, pass: bool, out: Option<&Path>) -> Result<bool> {
    emit(&canonicalize(report), out)?;
    Ok(pass)
}

fn step_report(o: &StepOutcome) -> Value {
    json!({"outcome": o.outcome, "pass": o.pass, "details": o.details})
}

fn run_op(cli: &Cli, op: Op, inputs: &Inputs) -> Result<StepOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
    execute(&op, inputs, &mut rng, cli.tol)
}

fn dispatch(cli: &Cli) -> Result<bool> {
    let out = cli.out.as_deref();
    let steps = cli.steps.unwrap_or(DEFAULT_STEPS);
    let names = || ("mu0".to_string(), "mu1".to_string());
    match &cli.command {
        Command::Gen { grid, path, tree, step, norm } => {
            let spec = match (grid, path, tree) {
                (Some(n), _, _) => SpaceGenSpec::grid(*n, *step, *norm),
                (_, Some(n), _) => SpaceGenSpec::path(*n),
                (_, _, Some(n)) => random_tree(&mut ChaCha8Rng::seed_from_u64(cli.seed), *n),
                _ => return Err(anyhow!("gen needs one of --grid, --path or --tree")),
            };
            let space = build_space(&spec)?;
            emit(&serde_json::to_value(SpaceFile::from_space(&space))?, out)?;
            Ok(true)
        }
        Command::W2 { pair, csv } => {
            let inputs = pair_inputs(pair)?;
            let (mu0, mu1) = names();
            let o = run_op(cli, Op::W2 { mu0, mu1 }, &inputs)?;
            if let Some(p) = csv {
                let space = inputs.space()?;
                let sol = cdk_core::solve_w2(space, inputs.measure("mu0")?, inputs.measure("mu1")?)?;
                let file = fs::File::create(p).with_context(|| format!("writing {}", p.display()))?;
                sol.plan.write_csv(space, file)?;
            }
            finish(step_report(&o), o.pass, out)
        }
        Command::Lift { space, plan, strategy } => {
            let s = load_space(space)?;
            let file = fs::File::open(plan).with_context(|| format!("reading {}", plan.display()))?;
            let p = TransportPlan::read_csv(&s, file)?;
            let g = lift_plan(&s, &p, steps, *strategy)?;
            emit(&geodesic_plan_json(&s, &g), out)?;
            Ok(true)
        }
        Command::CdCheck { space, plan, k } => {
            let s = load_space(space)?;
            let g = read_json::<GeodesicPlanFile>(plan)?.to_plan(&s, cli.tol)?;
            let r = check_k_convexity(&s, &g, *k, cli.tol)?;
            finish(serde_json::to_value(&r)?, r.verdict.is_pass(), out)
        }
        Command::StrongCd { pair, k, samples } => {
            let inputs = pair_inputs(pair)?;
            let (mu0, mu1) = names();
            let op = Op::StrongCd { mu0, mu1, steps, k: *k, budget: cli.budget, samples: *samples };
            let o = run_op(cli, op, &inputs)?;
            finish(step_report(&o), o.pass, out)
        }
        Command::BranchScan { space, plan } => {
            let s = load_space(space)?;
            let g = read_json::<GeodesicPlanFile>(plan)?.to_plan(&s, cli.tol)?;
            let r = find_branching_pairs(&g);
            finish(serde_json::to_value(&r)?, r.essentially_nonbranching, out)
        }
        Command::Split { n, pairs } => {
            let pairs = pairs.as_deref().map(read_json).transpose()?;
            let o = run_op(cli, Op::Split { n: *n, pairs }, &Inputs { space: None, measures: Default::default() })?;
            finish(step_report(&o), o.pass, out)
        }
        Command::Log2Demo { t1, t2, k, atoms, plot } => {
            let d = Log2DemoConfig::default();
            let cfg = Log2DemoConfig {
                steps: cli.steps.unwrap_or(d.steps),
                t1: t1.unwrap_or(d.t1),
                t2: t2.unwrap_or(d.t2),
                k: *k,
                atoms: *atoms,
                tol: cli.tol,
            };
            let demo = cdk_core::log2_drop_experiment(&cfg)?;
            if let Some(p) = plot {
                fs::write(p, plot_csv(&demo.report.plot_rows()))
                    .with_context(|| format!("writing {}", p.display()))?;
            }
            finish(serde_json::to_value(&demo.report)?, demo.report.verdict.is_pass(), out)
        }
        Command::MixDemo { pair, t } => {
            let inputs = pair_inputs(pair)?;
            let (mu0, mu1) = names();
            let o = run_op(cli, Op::MixDemo { mu0, mu1, steps, t: *t }, &inputs)?;
            finish(step_report(&o), o.pass, out)
        }
        Command::Unique { pair } => {
            let inputs = pair_inputs(pair)?;
            let (mu0, mu1) = names();
            let o = run_op(cli, Op::Unique { mu0, mu1, steps, budget: cli.budget }, &inputs)?;
            finish(o.details.clone(), o.pass, out)
        }
        Command::Run { scenarios } => {
            let results: Vec<Result<bool>> = scenarios
                .par_iter()
                .map(|p| {
                    let r = scenario::run_file(p, out, cli.tol)?;
                    Ok(r.pass)
                })
                .collect();
            let mut pass = true;
            for (p, r) in scenarios.iter().zip(results) {
                let ok = r.with_context(|| format!("scenario {}", p.display()))?;
                eprintln!("{}: {}", p.display(), if ok { "pass" } else { "fail" });
                pass &= ok;
            }
            Ok(pass)
        }
    }
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("CDK_LAB_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| anyhow!("CDK_LAB_THREADS must be a positive integer, got {v:?}"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match init_threads().and_then(|_| dispatch(&cli)) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
