//! Scenario files: a space, named measures and a pipeline of operations.
//!
//! ```json
//! {
//!   "name": "path_unique",
//!   "seed": 1,
//!   "space": {"kind": "graph", "nodes": 3, "edges": [[0, 1, 1.0], [1, 2, 1.0]]},
//!   "measures": {"a": {"uniform": ["0"]}, "b": {"dirac": "2"}},
//!   "pipeline": [{"op": "unique", "mu0": "a", "mu1": "b", "steps": 2}],
//!   "outputs": {"report": "path_unique.json"}
//! }
//! ```
//!
//! Each step may carry `"expect"`; the step then passes iff its outcome
//! string equals the expectation.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use cdk_core::branching::{best_split, find_branching_pairs, split_lower_bound, DEFAULT_SPLIT_CAP};
use cdk_core::entropy::{certify_strong_cd, check_k_convexity, log2_drop_experiment, StrongCdOptions};
use cdk_core::instances::random_pair_measure;
use cdk_core::io::{GeodesicPlanFile, MeasureSpec, SpaceSource};
use cdk_core::mapmix::{certify_unique_optimal, is_induced_by_map, mix_plans, UniquenessReport};
use cdk_core::ot::check_cyclical_monotonicity;
use cdk_core::{
    lift_plan, solve_w2, tol, Error, FiniteMMSpace, GeodesicPlan, LiftStrategy, Log2DemoConfig,
    ProbMeasure, TransportPlan,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::report::{canonicalize, emit, plot_csv};

fn default_budget() -> usize {
    1000
}

fn default_samples() -> usize {
    100
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Op {
    W2 {
        mu0: String,
        mu1: String,
    },
    Lift {
        mu0: String,
        mu1: String,
        steps: usize,
        #[serde(default)]
        strategy: LiftStrategy,
    },
    CdCheck {
        mu0: String,
        mu1: String,
        steps: usize,
        #[serde(rename = "K", default)]
        k: f64,
        #[serde(default)]
        strategy: LiftStrategy,
    },
    StrongCd {
        mu0: String,
        mu1: String,
        steps: usize,
        #[serde(rename = "K", default)]
        k: f64,
        #[serde(default = "default_budget")]
        budget: usize,
        #[serde(default = "default_samples")]
        samples: usize,
    },
    BranchScan {
        mu0: String,
        mu1: String,
        steps: usize,
        #[serde(default)]
        strategy: LiftStrategy,
    },
    Split {
        n: usize,
        /// `[a, b, mass]` triples; random when absent.
        #[serde(default)]
        pairs: Option<Vec<(usize, usize, f64)>>,
    },
    Log2Demo(Log2DemoConfig),
    MixDemo {
        mu0: String,
        mu1: String,
        steps: usize,
        #[serde(default)]
        t: Option<f64>,
    },
    Unique {
        mu0: String,
        mu1: String,
        steps: usize,
        #[serde(default = "default_budget")]
        budget: usize,
    },
}

#[derive(Debug, Clone, Deserialize)]
pub struct Step {
    #[serde(flatten)]
    pub op: Op,
    #[serde(default)]
    pub expect: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct Outputs {
    #[serde(default)]
    pub report: Option<PathBuf>,
    #[serde(default)]
    pub plot: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub space: Option<SpaceSource>,
    #[serde(default)]
    pub measures: BTreeMap<String, MeasureSpec>,
    #[serde(default)]
    pub pipeline: Vec<Step>,
    #[serde(default)]
    pub outputs: Outputs,
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| anyhow!("scenario parse error at line {}, column {}: {e}", e.line(), e.column()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }
}

/// Result of one pipeline step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub outcome: String,
    pub pass: bool,
    pub details: Value,
    pub plot: Option<Vec<(f64, f64, &'static str)>>,
}

impl StepOutcome {
    fn verdict(pass: bool, details: Value) -> Self {
        Self {
            outcome: if pass { "pass" } else { "fail" }.into(),
            pass,
            details,
            plot: None,
        }
    }
}

/// Shared inputs of a pipeline.
pub struct Inputs {
    pub space: Option<FiniteMMSpace>,
    pub measures: BTreeMap<String, ProbMeasure>,
}

impl Inputs {
    pub fn space(&self) -> Result<&FiniteMMSpace> {
        self.space.as_ref().ok_or_else(|| anyhow!("operation needs a space"))
    }

    pub fn measure(&self, name: &str) -> Result<&ProbMeasure> {
        self.measures
            .get(name)
            .ok_or_else(|| anyhow!("undefined measure {name:?}"))
    }
}

pub fn plan_json(space: &FiniteMMSpace, plan: &TransportPlan) -> Value {
    plan.entries()
        .iter()
        .map(|&(i, j, m)| json!({"source": space.id(i), "target": space.id(j), "mass": m}))
        .collect()
}

pub fn geodesic_plan_json(space: &FiniteMMSpace, plan: &GeodesicPlan) -> Value {
    serde_json::to_value(GeodesicPlanFile::from_plan(space, plan)).expect("plan file serializes")
}

pub fn uniqueness_json(space: &FiniteMMSpace, r: &UniquenessReport) -> Value {
    let mut v = json!({
        "verdict": r.verdict,
        "vertices_found": r.vertices_found,
        "exhaustive": r.exhaustive,
    });
    if let Some((a, b)) = &r.witness_pair {
        v["witness_pair"] = json!([plan_json(space, a), plan_json(space, b)]);
    }
    if let Some(avg) = &r.averaged {
        v["averaged"] = plan_json(space, avg);
    }
    if let Some(w) = &r.branch_witness {
        v["branch_witness"] = serde_json::to_value(w).expect("witness serializes");
    }
    if let Some(e) = &r.mix_error {
        v["mix_error"] = json!(e);
    }
    v
}

fn optimal_lift(ctx: &Inputs, mu0: &str, mu1: &str, steps: usize, strategy: LiftStrategy) -> Result<GeodesicPlan> {
    let space = ctx.space()?;
    let sol = solve_w2(space, ctx.measure(mu0)?, ctx.measure(mu1)?)?;
    Ok(lift_plan(space, &sol.plan, steps, strategy)?)
}

/// Runs a single operation. `rng` drives every random choice of the step.
pub fn execute(op: &Op, ctx: &Inputs, rng: &mut ChaCha8Rng, tol: f64) -> Result<StepOutcome> {
    Ok(match op {
        Op::W2 { mu0, mu1 } => {
            let space = ctx.space()?;
            let sol = solve_w2(space, ctx.measure(mu0)?, ctx.measure(mu1)?)?;
            let mono = check_cyclical_monotonicity(space, &sol.plan, 3, tol);
            StepOutcome::verdict(
                mono.pass,
                json!({
                    "cost": sol.cost,
                    "w2": sol.w2(),
                    "plan": plan_json(space, &sol.plan),
                    "map_induced": is_induced_by_map(&sol.plan).map_induced,
                }),
            )
        }
        Op::Lift { mu0, mu1, steps, strategy } => {
            let space = ctx.space()?;
            let g = optimal_lift(ctx, mu0, mu1, *steps, *strategy)?;
            let check = g.is_wasserstein_geodesic(space, tol)?;
            StepOutcome::verdict(
                check.pass,
                json!({"geodesic_check": check, "plan": geodesic_plan_json(space, &g)}),
            )
        }
        Op::CdCheck { mu0, mu1, steps, k, strategy } => {
            let space = ctx.space()?;
            let g = optimal_lift(ctx, mu0, mu1, *steps, *strategy)?;
            let r = check_k_convexity(space, &g, *k, tol)?;
            StepOutcome::verdict(r.verdict.is_pass(), serde_json::to_value(&r)?)
        }
        Op::StrongCd { mu0, mu1, steps, k, budget, samples } => {
            let space = ctx.space()?;
            let opts = StrongCdOptions {
                budget: *budget,
                samples: *samples,
                seed: rng.gen(),
                tol,
            };
            let r = certify_strong_cd(space, ctx.measure(mu0)?, ctx.measure(mu1)?, *k, *steps, &opts)?;
            let mut details = json!({
                "verdict": r.verdict,
                "exhaustive": r.exhaustive,
                "vertices_checked": r.vertices_checked,
                "samples_checked": r.samples_checked,
                "worst_slack": r.worst_slack,
            });
            if let (Some(w), Some(rep)) = (&r.witness, &r.witness_report) {
                details["witness"] = geodesic_plan_json(space, w);
                details["witness_interval"] = json!(r.witness_interval);
                details["witness_report"] = serde_json::to_value(rep)?;
            }
            StepOutcome::verdict(r.verdict.is_pass(), details)
        }
        Op::BranchScan { mu0, mu1, steps, strategy } => {
            let g = optimal_lift(ctx, mu0, mu1, *steps, *strategy)?;
            let r = find_branching_pairs(&g);
            StepOutcome {
                outcome: if r.essentially_nonbranching { "nonbranching" } else { "branching" }.into(),
                pass: r.essentially_nonbranching,
                details: serde_json::to_value(&r)?,
                plot: None,
            }
        }
        Op::Split { n, pairs } => {
            let pairs = match pairs {
                Some(p) => p.clone(),
                None => random_pair_measure(rng, *n),
            };
            let s = best_split(*n, &pairs, DEFAULT_SPLIT_CAP)?;
            let bound = split_lower_bound(*n);
            let total: f64 = pairs.iter().map(|p| p.2).sum();
            StepOutcome::verdict(
                s.value >= bound * total - tol && s.value > 0.25 * total,
                json!({"set": s.set, "value": s.value, "bound": bound, "mass": total}),
            )
        }
        Op::Log2Demo(cfg) => {
            let demo = log2_drop_experiment(cfg)?;
            let mut out = StepOutcome::verdict(demo.report.verdict.is_pass(), serde_json::to_value(&demo.report)?);
            out.plot = Some(demo.report.plot_rows());
            out
        }
        Op::MixDemo { mu0, mu1, steps, t } => {
            let space = ctx.space()?;
            let g = optimal_lift(ctx, mu0, mu1, *steps, LiftStrategy::Uniform)?;
            let sub = |rng: &mut ChaCha8Rng| -> Result<GeodesicPlan> {
                for _ in 0..64 {
                    let f: Vec<f64> = (0..g.len())
                        .map(|_| if rng.gen_bool(0.6) { rng.gen_range(0.1..1.0) } else { 0.0 })
                        .collect();
                    match g.reweight(&f) {
                        Ok(p) => return Ok(p),
                        Err(Error::EmptyRestriction) => continue,
                        Err(e) => return Err(e.into()),
                    }
                }
                Ok(g.clone())
            };
            let (p1, p2) = (sub(rng)?, sub(rng)?);
            if *steps < 2 {
                bail!("mixing needs at least two time steps");
            }
            let t = match t {
                Some(t) => *t,
                None => rng.gen_range(1..*steps) as f64 / *steps as f64,
            };
            match mix_plans(space, &p1, &p2, t, tol::GEO) {
                Ok(mix) => {
                    let half = GeodesicPlan::mixture(space, &[(&p1, 0.5), (&p2, 0.5)])?;
                    let cost = |p: &GeodesicPlan| -> Result<f64> { Ok(p.endpoint_plan(space)?.cost()) };
                    let (cm, c1, c2) = (cost(&mix)?, cost(&p1)?, cost(&p2)?);
                    let source_err = mix.source().max_diff(half.source());
                    let target_err = mix.target().max_diff(half.target());
                    let cost_err = (cm - 0.5 * (c1 + c2)).abs();
                    StepOutcome::verdict(
                        source_err <= tol::MASS && target_err <= tol::MASS && cost_err <= tol,
                        json!({
                            "t": t,
                            "atoms": mix.len(),
                            "cost_mix": cm,
                            "cost_half": 0.5 * (c1 + c2),
                            "source_error": source_err,
                            "target_error": target_err,
                        }),
                    )
                }
                Err(e @ Error::Mix { .. }) => StepOutcome {
                    outcome: "mix_error".into(),
                    pass: false,
                    details: json!({"t": t, "error": e.to_string()}),
                    plot: None,
                },
                Err(e) => return Err(e.into()),
            }
        }
        Op::Unique { mu0, mu1, steps, budget } => {
            let space = ctx.space()?;
            let r = certify_unique_optimal(space, ctx.measure(mu0)?, ctx.measure(mu1)?, *steps, *budget)?;
            let details = uniqueness_json(space, &r);
            let outcome = details["verdict"].as_str().unwrap_or_default().to_string();
            StepOutcome {
                pass: outcome == "unique_map_induced",
                outcome,
                details,
                plot: None,
            }
        }
    })
}

impl Op {
    pub fn name(&self) -> &'static str {
        match self {
            Op::W2 { .. } => "w2",
            Op::Lift { .. } => "lift",
            Op::CdCheck { .. } => "cd_check",
            Op::StrongCd { .. } => "strong_cd",
            Op::BranchScan { .. } => "branch_scan",
            Op::Split { .. } => "split",
            Op::Log2Demo(_) => "log2_demo",
            Op::MixDemo { .. } => "mix_demo",
            Op::Unique { .. } => "unique",
        }
    }
}

/// Report and overall verdict of a scenario run.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub pass: bool,
    pub report: Value,
    pub plot: Option<String>,
}

/// Executes every step in order. Step `i` draws from a generator seeded by
/// `(seed, i)`, so steps are independent of one another.
pub fn run(scenario: &Scenario, tol: f64) -> Result<RunResult> {
    let space = scenario.space.as_ref().map(SpaceSource::build).transpose()?;
    let mut measures = BTreeMap::new();
    for (name, spec) in &scenario.measures {
        let space = space
            .as_ref()
            .ok_or_else(|| anyhow!("measure {name:?} needs a space"))?;
        measures.insert(name.clone(), spec.resolve(space).with_context(|| format!("measure {name:?}"))?);
    }
    let ctx = Inputs { space, measures };
    let mut steps = Vec::new();
    let mut plot = None;
    let mut pass = true;
    for (i, step) in scenario.pipeline.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
        rng.set_stream(i as u64);
        let out = execute(&step.op, &ctx, &mut rng, tol)
            .with_context(|| format!("pipeline step {i} ({})", step.op.name()))?;
        let ok = match &step.expect {
            Some(e) => *e == out.outcome,
            None => out.pass,
        };
        pass &= ok;
        if let Some(rows) = &out.plot {
            plot = Some(plot_csv(rows));
        }
        steps.push(json!({
            "op": step.op.name(),
            "outcome": out.outcome,
            "expect": step.expect,
            "pass": ok,
            "details": out.details,
        }));
    }
    let report = canonicalize(json!({
        "name": scenario.name,
        "seed": scenario.seed,
        "pass": pass,
        "steps": steps,
    }));
    Ok(RunResult { pass, report, plot })
}

/// Runs a scenario file and writes its outputs under `out_dir`
/// (default: next to the scenario).
pub fn run_file(path: &Path, out_dir: Option<&Path>, tol: f64) -> Result<RunResult> {
    let scenario = Scenario::load(path)?;
    let result = run(&scenario, tol)?;
    let dir = out_dir
        .map(Path::to_path_buf)
        .unwrap_or_else(|| path.parent().map(Path::to_path_buf).unwrap_or_default());
    let report = scenario
        .outputs
        .report
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{}.json", scenario.name)));
    emit(&result.report, Some(&dir.join(report)))?;
    if let (Some(plot), Some(csv)) = (&scenario.outputs.plot, &result.plot) {
        let p = dir.join(plot);
        fs::write(&p, csv).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(result)
}
