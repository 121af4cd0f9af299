//! Relative entropy and its K-convexity along geodesic plans.

use std::collections::HashMap;
use std::f64::consts::LN_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geoplan::GeodesicPlan;
use crate::grid::{grid_index, grid_time};
use crate::mms::{build_space, enumerate_geodesics, DiscreteGeodesic, FiniteMMSpace, Norm, SpaceGenSpec};
use crate::ot::{optimal_vertices, solve_w2, ProbMeasure, TransportPlan};
use crate::{tol, Verdict};

/// `Ent_m(μ)` in nats; infinite when `μ` charges an `m`-null point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EntropyValue {
    pub value: f64,
    pub finite: bool,
}

/// `Σ m(x) ρ(x) log ρ(x)` with `ρ = μ / m` and `0 log 0 = 0`.
pub fn entropy(mu: &ProbMeasure, reference: &[f64]) -> EntropyValue {
    let mut value = 0.0;
    for (&p, &m) in mu.weights().iter().zip(reference) {
        if p <= 0.0 {
            continue;
        }
        if m <= 0.0 {
            return EntropyValue {
                value: f64::INFINITY,
                finite: false,
            };
        }
        value += p * (p / m).ln();
    }
    EntropyValue {
        value,
        finite: true,
    }
}

/// Entropy along `t -> (e_t)_# π` compared with the K-convex bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CDReport {
    #[serde(rename = "K")]
    pub k: f64,
    pub times: Vec<f64>,
    /// Infinite values serialize as `null`.
    pub entropies: Vec<f64>,
    pub w2_squared: f64,
    /// `max_t Ent(μ_t) - [(1-t) Ent(μ_0) + t Ent(μ_1) - K/2 t(1-t) W2²]`.
    pub slack: f64,
    pub worst_time: f64,
    pub verdict: Verdict,
}

/// Checks the K-convexity inequality at every grid time of `plan`.
pub fn check_k_convexity(
    space: &FiniteMMSpace,
    plan: &GeodesicPlan,
    k: f64,
    tol: f64,
) -> Result<CDReport> {
    let w2sq = solve_w2(space, plan.source(), plan.target())?.cost;
    Ok(convexity_report(space, plan, k, w2sq, tol))
}

fn convexity_report(space: &FiniteMMSpace, plan: &GeodesicPlan, k: f64, w2sq: f64, tol: f64) -> CDReport {
    let steps = plan.resolution();
    let entropies: Vec<f64> = (0..=steps)
        .map(|i| entropy(&plan.evaluate_index(i), space.measure()).value)
        .collect();
    let (e0, e1) = (entropies[0], entropies[steps]);
    let mut slack = 0.0;
    let mut worst_time = 0.0;
    if e0.is_finite() && e1.is_finite() {
        for (i, &e) in entropies.iter().enumerate() {
            let t = grid_time(i, steps);
            let bound = (1.0 - t) * e0 + t * e1 - 0.5 * k * t * (1.0 - t) * w2sq;
            let s = e - bound;
            if s > slack {
                slack = s;
                worst_time = t;
            }
        }
    }
    CDReport {
        k,
        times: (0..=steps).map(|i| grid_time(i, steps)).collect(),
        entropies,
        w2_squared: w2sq,
        slack,
        worst_time,
        verdict: Verdict::from(slack <= tol),
    }
}

/// Largest convexity slack over all restrictions `res_s^t` with at least one interior grid time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalSlack {
    pub slack: f64,
    pub interval: (f64, f64),
}

pub fn max_subinterval_slack(space: &FiniteMMSpace, plan: &GeodesicPlan, k: f64) -> Result<IntervalSlack> {
    let steps = plan.resolution();
    let mut best = IntervalSlack {
        slack: 0.0,
        interval: (0.0, 1.0),
    };
    for a in 0..steps {
        for b in a + 2..=steps {
            let sub = plan.restrict_indices(a, b)?;
            let r = check_k_convexity(space, &sub, k, 0.0)?;
            if r.slack > best.slack {
                best = IntervalSlack {
                    slack: r.slack,
                    interval: (grid_time(a, steps), grid_time(b, steps)),
                };
            }
        }
    }
    Ok(best)
}

/// Sub-interval slack of a plan that is a constant-speed Wasserstein
/// geodesic with `W2² = w2sq`, so each restriction to `[a, b]` has
/// `W2² = (b - a)² w2sq`. Intervals with an infinite endpoint entropy are skipped.
fn geodesic_interval_slack(space: &FiniteMMSpace, plan: &GeodesicPlan, k: f64, w2sq: f64) -> IntervalSlack {
    let steps = plan.resolution();
    let h: Vec<f64> = (0..=steps)
        .map(|i| entropy(&plan.evaluate_index(i), space.measure()).value)
        .collect();
    let mut best = IntervalSlack {
        slack: 0.0,
        interval: (0.0, 1.0),
    };
    for a in 0..steps {
        for b in a + 2..=steps {
            if !(h[a].is_finite() && h[b].is_finite()) {
                continue;
            }
            let len = (b - a) as f64 / steps as f64;
            for t in a + 1..b {
                let lam = (t - a) as f64 / (b - a) as f64;
                let bound = (1.0 - lam) * h[a] + lam * h[b] - 0.5 * k * lam * (1.0 - lam) * len * len * w2sq;
                let s = h[t] - bound;
                if s > best.slack {
                    best = IntervalSlack {
                        slack: s,
                        interval: (grid_time(a, steps), grid_time(b, steps)),
                    };
                }
            }
        }
    }
    best
}

/// `sqrt(log 2 / (6|K| + 1))`.
pub fn length_bound(k: f64) -> f64 {
    (LN_2 / (6.0 * k.abs() + 1.0)).sqrt()
}

/// Budget and sampling parameters for [`certify_strong_cd`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrongCdOptions {
    /// Cap on enumerated lifted vertices.
    pub budget: usize,
    /// Random interior plans checked on top of the vertices.
    pub samples: usize,
    pub seed: u64,
    pub tol: f64,
}

impl Default for StrongCdOptions {
    fn default() -> Self {
        Self {
            budget: 1000,
            samples: 1000,
            seed: 0,
            tol: tol::CD,
        }
    }
}

#[derive(Debug, Clone)]
pub struct StrongCdReport {
    pub verdict: Verdict,
    /// All lifted vertices were checked.
    pub exhaustive: bool,
    pub vertices_checked: usize,
    pub samples_checked: usize,
    pub worst_slack: f64,
    /// Worst plan, present on failure.
    pub witness: Option<GeodesicPlan>,
    /// Sub-interval where the witness is least convex.
    pub witness_interval: Option<(f64, f64)>,
    /// Convexity report of the witness restricted to `witness_interval`.
    pub witness_report: Option<CDReport>,
}

/// Checks K-convexity along every optimal geodesic plan from `mu0` to `mu1`
/// at resolution `steps`, on every grid sub-interval.
///
/// Restrictions of optimal plans are optimal, so K-convexity is required on
/// each `[s, t]`, not only between the endpoints. Candidates are every plan
/// that puts one optimal-vertex coupling on a single geodesic per pair
/// (`exhaustive` reports whether all of them fit in the budget), plus
/// `samples` random interior plans mixing all vertices and geodesics. The
/// sub-interval slack is not convex in the plan, so interior plans can fail
/// where every vertex passes. Only pairs in optimal couplings need geodesics.
pub fn certify_strong_cd(
    space: &FiniteMMSpace,
    mu0: &ProbMeasure,
    mu1: &ProbMeasure,
    k: f64,
    steps: usize,
    opts: &StrongCdOptions,
) -> Result<StrongCdReport> {
    let faces = optimal_vertices(space, mu0, mu1, opts.budget.max(1), opts.tol)?;
    let mut cache: HashMap<(usize, usize), Vec<DiscreteGeodesic>> = HashMap::new();
    for v in &faces.vertices {
        for &(i, j, _) in v.entries() {
            if cache.contains_key(&(i, j)) {
                continue;
            }
            let found = enumerate_geodesics(space, i, j, steps, tol::GEO)?;
            if found.is_empty() {
                return Err(Error::NoGeodesic {
                    from: space.id(i).to_string(),
                    to: space.id(j).to_string(),
                    steps,
                });
            }
            cache.insert((i, j), found);
        }
    }

    let mut candidates: Vec<Vec<(DiscreteGeodesic, f64)>> = Vec::new();
    let mut exhaustive = faces.exhaustive;
    'vertices: for v in &faces.vertices {
        let choices: Vec<&Vec<DiscreteGeodesic>> = v.entries().iter().map(|e| &cache[&(e.0, e.1)]).collect();
        let mut digits = vec![0usize; choices.len()];
        loop {
            if candidates.len() == opts.budget {
                exhaustive = false;
                break 'vertices;
            }
            candidates.push(
                v.entries()
                    .iter()
                    .zip(&digits)
                    .zip(&choices)
                    .map(|((e, &d), c)| (c[d].clone(), e.2))
                    .collect(),
            );
            let mut pos = 0;
            loop {
                if pos == digits.len() {
                    break;
                }
                digits[pos] += 1;
                if digits[pos] < choices[pos].len() {
                    break;
                }
                digits[pos] = 0;
                pos += 1;
            }
            if pos == digits.len() {
                break;
            }
        }
    }
    let vertices_checked = candidates.len();

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for _ in 0..opts.samples {
        let w: Vec<f64> = faces.vertices.iter().map(|_| -rng.gen::<f64>().max(1e-300).ln()).collect();
        let total: f64 = w.iter().sum();
        let mut atoms = Vec::new();
        for (v, wv) in faces.vertices.iter().zip(&w) {
            for &(i, j, m) in v.entries() {
                let geos = &cache[&(i, j)];
                let split: Vec<f64> = geos.iter().map(|_| rng.gen::<f64>() + 1e-3).collect();
                let s: f64 = split.iter().sum();
                for (g, x) in geos.iter().zip(&split) {
                    atoms.push((g.clone(), m * wv / total * x / s));
                }
            }
        }
        candidates.push(atoms);
    }

    let plans: Vec<GeodesicPlan> = candidates
        .into_iter()
        .map(|atoms| GeodesicPlan::from_atoms(space, atoms))
        .collect::<Result<_>>()?;
    let slacks: Vec<IntervalSlack> = plans
        .par_iter()
        .map(|p| geodesic_interval_slack(space, p, k, faces.cost))
        .collect();
    let worst = slacks
        .iter()
        .enumerate()
        .fold(None, |acc: Option<(usize, f64)>, (i, s)| match acc {
            Some((_, best)) if best >= s.slack => acc,
            _ => Some((i, s.slack)),
        });
    let worst_slack = worst.map_or(0.0, |w| w.1);
    let verdict = Verdict::from(worst_slack <= opts.tol);
    let (witness, witness_interval, witness_report) = match (verdict, worst) {
        (Verdict::Fail, Some((i, _))) => {
            let (s, t) = slacks[i].interval;
            let (a, b) = (grid_index(s, steps)?, grid_index(t, steps)?);
            let sub = plans[i].restrict_indices(a, b)?;
            let report = convexity_report(space, &sub, k, (t - s).powi(2) * faces.cost, opts.tol);
            (Some(plans[i].clone()), Some((s, t)), Some(report))
        }
        _ => (None, None, None),
    };
    Ok(StrongCdReport {
        verdict,
        exhaustive,
        vertices_checked,
        samples_checked: opts.samples,
        worst_slack,
        witness,
        witness_interval,
        witness_report,
    })
}

/// Parameters of the two-family branching experiment on an `ℓ∞` grid.
///
/// Both families are `atoms` parallel horizontal geodesics; after `t1` one
/// family turns diagonally up and the other diagonally down, so they share
/// `[0, t1]` and are disjoint after `t2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Log2DemoConfig {
    pub steps: usize,
    pub t1: f64,
    pub t2: f64,
    #[serde(rename = "K", default)]
    pub k: f64,
    /// Family size; defaults to `2 (t2 - t1) T`.
    #[serde(default)]
    pub atoms: Option<usize>,
    #[serde(default = "default_cd_tol")]
    pub tol: f64,
}

fn default_cd_tol() -> f64 {
    tol::CD
}

impl Default for Log2DemoConfig {
    fn default() -> Self {
        Self {
            steps: 16,
            t1: 0.875,
            t2: 0.9375,
            k: 0.0,
            atoms: None,
            tol: tol::CD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Log2Report {
    #[serde(rename = "K")]
    pub k: f64,
    pub times: Vec<f64>,
    pub ent_up: Vec<f64>,
    pub ent_down: Vec<f64>,
    pub ent_mix: Vec<f64>,
    /// `½ Ent_up + ½ Ent_down - Ent_mix` at each grid time.
    pub drops: Vec<f64>,
    /// The drop after `t2` farthest from `log 2`.
    pub drop: f64,
    /// Largest convexity slack of the mixture over grid sub-intervals.
    pub slack: f64,
    pub slack_interval: (f64, f64),
    /// Convexity slack between the two endpoints only.
    pub endpoint_slack: f64,
    pub grid_step: f64,
    pub atoms: usize,
    pub verdict: Verdict,
}

impl Log2Report {
    /// Rows `(time, entropy, series)` for plotting.
    pub fn plot_rows(&self) -> Vec<(f64, f64, &'static str)> {
        let mut rows = Vec::new();
        for (series, values) in [("up", &self.ent_up), ("down", &self.ent_down), ("mix", &self.ent_mix)] {
            rows.extend(self.times.iter().zip(values.iter()).map(|(&t, &e)| (t, e, series)));
        }
        rows
    }
}

#[derive(Debug, Clone)]
pub struct Log2Demo {
    pub space: FiniteMMSpace,
    pub up: GeodesicPlan,
    pub down: GeodesicPlan,
    pub mix: GeodesicPlan,
    pub report: Log2Report,
}

/// Builds the two families, measures the entropy drop of their mixture and
/// its convexity deficit.
///
/// The verdict passes when the drop is `log 2` after `t2` and `0` up to `t1`, within `tol`.
pub fn log2_drop_experiment(cfg: &Log2DemoConfig) -> Result<Log2Demo> {
    let steps = cfg.steps;
    if !(0.0 < cfg.t1 && cfg.t1 < cfg.t2 && cfg.t2 < 1.0) {
        return Err(Error::Precondition(format!(
            "branch times must satisfy 0 < t1 < t2 < 1, got {} and {}",
            cfg.t1, cfg.t2
        )));
    }
    let i1 = grid_index(cfg.t1, steps)?;
    let i2 = grid_index(cfg.t2, steps)?;
    let gap = i2 - i1;
    let atoms = cfg.atoms.unwrap_or(2 * gap);
    if atoms == 0 || atoms > 2 * (gap + 1) {
        return Err(Error::Construction(format!(
            "{atoms} parallel geodesics cannot separate after t2 (at most {})",
            2 * (gap + 1)
        )));
    }
    let bound = length_bound(cfg.k);
    let h = (0..=30)
        .map(|j| f64::powi(2.0, -j))
        .find(|h| steps as f64 * h <= bound)
        .ok_or_else(|| Error::Construction(format!("no dyadic step fits {steps} steps under {bound}")))?;
    let turn = steps - i1;
    let side = (steps + 1).max(atoms + 2 * turn);
    let space = build_space(&SpaceGenSpec::grid(side, h, Norm::Inf))?;

    let family = |dir: i64| -> Result<GeodesicPlan> {
        let mut geos = Vec::with_capacity(atoms);
        for a in 0..atoms {
            let row = (turn + a) as i64;
            let seq = (0..=steps)
                .map(|c| {
                    let y = row + dir * c.saturating_sub(i1) as i64;
                    space
                        .index_of(&format!("{c}_{y}"))
                        .ok_or_else(|| Error::Construction(format!("point {c}_{y} outside grid")))
                })
                .collect::<Result<Vec<_>>>()?;
            geos.push((DiscreteGeodesic::new(&space, seq, tol::GEO)?, 1.0 / atoms as f64));
        }
        GeodesicPlan::from_atoms(&space, geos)
    };
    let up = family(1)?;
    let down = family(-1)?;
    let mix = GeodesicPlan::mixture(&space, &[(&up, 0.5), (&down, 0.5)])?;

    let curve = |p: &GeodesicPlan| -> Vec<f64> {
        (0..=steps)
            .map(|i| entropy(&p.evaluate_index(i), space.measure()).value)
            .collect()
    };
    let (ent_up, ent_down, ent_mix) = (curve(&up), curve(&down), curve(&mix));
    let drops: Vec<f64> = (0..=steps)
        .map(|i| 0.5 * ent_up[i] + 0.5 * ent_down[i] - ent_mix[i])
        .collect();
    let tail = &drops[i2 + 1..];
    let drop = tail
        .iter()
        .copied()
        .fold(LN_2, |acc, d| if (d - LN_2).abs() > (acc - LN_2).abs() { d } else { acc });
    let ok_tail = tail.iter().all(|d| (d - LN_2).abs() <= cfg.tol);
    let ok_head = drops[..=i1].iter().all(|d| d.abs() <= cfg.tol);

    let endpoint = check_k_convexity(&space, &mix, cfg.k, cfg.tol)?;
    let local = max_subinterval_slack(&space, &mix, cfg.k)?;
    let report = Log2Report {
        k: cfg.k,
        times: (0..=steps).map(|i| grid_time(i, steps)).collect(),
        ent_up,
        ent_down,
        ent_mix,
        drops,
        drop,
        slack: local.slack,
        slack_interval: local.interval,
        endpoint_slack: endpoint.slack,
        grid_step: h,
        atoms,
        verdict: Verdict::from(ok_tail && ok_head),
    };
    Ok(Log2Demo {
        space,
        up,
        down,
        mix,
        report,
    })
}

/// Uniform plan on the given coupling entries with one chosen geodesic each.
pub fn concentrated_lift(
    space: &FiniteMMSpace,
    plan: &TransportPlan,
    pick: impl Fn(&[DiscreteGeodesic]) -> usize,
    steps: usize,
) -> Result<GeodesicPlan> {
    let mut atoms = Vec::new();
    for &(i, j, m) in plan.entries() {
        let found = enumerate_geodesics(space, i, j, steps, tol::GEO)?;
        if found.is_empty() {
            return Err(Error::NoGeodesic {
                from: space.id(i).to_string(),
                to: space.id(j).to_string(),
                steps,
            });
        }
        let k = pick(&found).min(found.len() - 1);
        atoms.push((found[k].clone(), m));
    }
    GeodesicPlan::from_atoms(space, atoms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geoplan::{lift_plan, LiftStrategy};

    #[test]
    fn entropy_examples() {
        let m = vec![1.0; 4];
        let u = ProbMeasure::uniform_on(4, &[0, 1, 2]).unwrap();
        assert!((entropy(&u, &m).value + 3f64.ln()).abs() < 1e-15);
        assert_eq!(entropy(&ProbMeasure::dirac(4, 2), &m).value, 0.0);
        let zero = vec![1.0, 1.0, 0.0, 1.0];
        let e = entropy(&u, &zero);
        assert!(!e.finite && e.value.is_infinite());
    }

    #[test]
    fn length_bound_values() {
        assert!((length_bound(0.0) - 0.8325546111576977).abs() < 1e-15);
        assert_eq!(length_bound(-1.0), (LN_2 / 7.0).sqrt());
        assert!(length_bound(100.0) < length_bound(10.0));
    }

    #[test]
    fn translation_is_flat() {
        let s = build_space(&SpaceGenSpec::path(6)).unwrap();
        let mu0 = ProbMeasure::uniform_on(6, &[0, 1]).unwrap();
        let mu1 = ProbMeasure::uniform_on(6, &[4, 5]).unwrap();
        let plan = solve_w2(&s, &mu0, &mu1).unwrap().plan;
        let g = lift_plan(&s, &plan, 4, LiftStrategy::Uniform).unwrap();
        let r = check_k_convexity(&s, &g, 0.0, 1e-9).unwrap();
        assert!(r.entropies.iter().all(|e| (e + LN_2).abs() < 1e-12));
        assert!(r.slack.abs() < 1e-12);
        assert_eq!(r.verdict, Verdict::Pass);
    }

    #[test]
    fn concentrated_lift_fails_on_linf_grid() {
        let s = build_space(&SpaceGenSpec::grid(3, 0.5, Norm::Inf)).unwrap();
        let ix = |id: &str| s.index_of(id).unwrap();
        let mu0 = ProbMeasure::uniform_on(9, &[ix("0_0"), ix("0_1")]).unwrap();
        let mu1 = ProbMeasure::uniform_on(9, &[ix("2_0"), ix("2_1")]).unwrap();
        let plan = TransportPlan::from_entries(&s, [(ix("0_0"), ix("2_0"), 0.5), (ix("0_1"), ix("2_1"), 0.5)]).unwrap();
        let g = concentrated_lift(&s, &plan, |_| 0, 2).unwrap();
        assert_eq!(g.evaluate_index(1), ProbMeasure::dirac(9, ix("1_0")));
        let r = check_k_convexity(&s, &g, 0.0, 1e-9).unwrap();
        assert!((r.slack - LN_2).abs() < 1e-12);

        let cert = certify_strong_cd(&s, &mu0, &mu1, 0.0, 2, &StrongCdOptions::default()).unwrap();
        assert_eq!(cert.verdict, Verdict::Fail);
        assert!(cert.exhaustive);
        assert!(cert.worst_slack >= LN_2 - 1e-12);
        assert!(cert.witness.is_some());
    }

    #[test]
    fn strong_cd_on_path() {
        let s = build_space(&SpaceGenSpec::path(6)).unwrap();
        let mu0 = ProbMeasure::uniform_on(6, &[0, 1, 2]).unwrap();
        let mu1 = ProbMeasure::uniform_on(6, &[3, 4, 5]).unwrap();
        let r = certify_strong_cd(&s, &mu0, &mu1, 0.0, 3, &StrongCdOptions::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Pass);
        assert!(r.exhaustive);
        assert_eq!(r.vertices_checked, 1);

        let same = certify_strong_cd(&s, &mu0, &mu0, 0.0, 3, &StrongCdOptions::default()).unwrap();
        assert_eq!(same.verdict, Verdict::Pass);
    }

    #[test]
    fn log2_demo_default() {
        let d = log2_drop_experiment(&Log2DemoConfig::default()).unwrap();
        let r = &d.report;
        assert_eq!(r.verdict, Verdict::Pass);
        assert!((r.drop - LN_2).abs() < 1e-9);
        assert!(r.slack >= LN_2 - 0.1, "slack {}", r.slack);
        assert!(r.endpoint_slack > 0.0);
    }

    #[test]
    fn log2_rejects_bad_config() {
        let off_grid = Log2DemoConfig { t1: 0.3, ..Default::default() };
        assert!(matches!(log2_drop_experiment(&off_grid), Err(Error::OffGrid { .. })));
        let reversed = Log2DemoConfig { t1: 0.95, ..Default::default() };
        assert!(matches!(log2_drop_experiment(&reversed), Err(Error::Precondition(_))));
        let cfg = Log2DemoConfig {
            atoms: Some(9),
            ..Log2DemoConfig::default()
        };
        assert!(matches!(log2_drop_experiment(&cfg), Err(Error::Construction(_))));
    }
}
