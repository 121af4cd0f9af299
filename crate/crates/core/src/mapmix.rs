//! Map-induced tests, splitting and mixing of geodesic plans, and
//! uniqueness certification of optimal couplings.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::branching::{find_branching_pairs, BranchPair};
use crate::error::{Error, Result};
use crate::geoplan::{lift_plan, GeodesicPlan, LiftStrategy};
use crate::grid::{grid_index, grid_time};
use crate::mms::{DiscreteGeodesic, FiniteMMSpace};
use crate::ot::{optimal_vertices, TransportPlan};
use crate::tol;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MapVerdict {
    pub map_induced: bool,
    /// First source point whose mass is split.
    pub witness: Option<usize>,
}

/// Anything whose mass leaves each source point along identifiable branches.
pub trait Coupling {
    /// `(source, branch key, mass)` for every atom.
    fn branches(&self) -> Vec<(usize, Vec<usize>, f64)>;
}

impl Coupling for TransportPlan {
    fn branches(&self) -> Vec<(usize, Vec<usize>, f64)> {
        self.entries().iter().map(|&(i, j, m)| (i, vec![j], m)).collect()
    }
}

impl Coupling for GeodesicPlan {
    fn branches(&self) -> Vec<(usize, Vec<usize>, f64)> {
        self.atoms()
            .iter()
            .map(|(g, m)| (g.start(), g.steps().to_vec(), *m))
            .collect()
    }
}

/// True iff every charged source point sends its mass along a single target
/// (coupling) or a single geodesic (geodesic plan). Atoms of mass at most
/// `1e-12` are ignored.
pub fn is_induced_by_map<C: Coupling + ?Sized>(coupling: &C) -> MapVerdict {
    let mut seen: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let mut witness = None;
    for (src, key, m) in coupling.branches() {
        if m <= tol::MAP {
            continue;
        }
        match seen.get(&src) {
            Some(k) if *k != key => {
                witness = Some(witness.map_or(src, |w: usize| w.min(src)));
            }
            Some(_) => {}
            None => {
                seen.insert(src, key);
            }
        }
    }
    MapVerdict {
        map_induced: witness.is_none(),
        witness,
    }
}

/// Which side of the anchor time a half plan lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// Curves on `[0, t]`, anchored at their endpoint.
    Left,
    /// Curves on `[t, 1]`, anchored at their start.
    Right,
}

/// A plan of half-geodesics cut at the anchor time.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfPlan {
    pub side: Side,
    pub anchor_time: f64,
    pub atoms: Vec<(DiscreteGeodesic, f64)>,
}

/// Conditionals of a half plan over its anchor points.
#[derive(Debug, Clone, PartialEq)]
pub struct Disintegration {
    pub side: Side,
    pub anchor_time: f64,
    /// Mass of each anchor point.
    pub base: BTreeMap<usize, f64>,
    /// Normalized conditional atoms at each anchor.
    pub conditionals: BTreeMap<usize, Vec<(DiscreteGeodesic, f64)>>,
}

impl HalfPlan {
    pub fn disintegrate(&self) -> Disintegration {
        let mut base: BTreeMap<usize, f64> = BTreeMap::new();
        let mut groups: BTreeMap<usize, Vec<(DiscreteGeodesic, f64)>> = BTreeMap::new();
        for (g, m) in &self.atoms {
            let x = match self.side {
                Side::Left => g.end(),
                Side::Right => g.start(),
            };
            *base.entry(x).or_default() += m;
            groups.entry(x).or_default().push((g.clone(), *m));
        }
        let conditionals = groups
            .into_iter()
            .map(|(x, atoms)| {
                let w = base[&x];
                (x, atoms.into_iter().map(|(g, m)| (g, m / w)).collect())
            })
            .collect();
        Disintegration {
            side: self.side,
            anchor_time: self.anchor_time,
            base,
            conditionals,
        }
    }
}

impl Disintegration {
    /// `Σ_x base(x) · conditional_x`, sorted by geodesic.
    pub fn reconstruct(&self) -> Vec<(DiscreteGeodesic, f64)> {
        let mut merged: BTreeMap<DiscreteGeodesic, f64> = BTreeMap::new();
        for (x, atoms) in &self.conditionals {
            for (g, q) in atoms {
                *merged.entry(g.clone()).or_default() += self.base[x] * q;
            }
        }
        merged.into_iter().collect()
    }
}

fn halves(p1: &GeodesicPlan, p2: &GeodesicPlan, t: f64) -> Result<(HalfPlan, HalfPlan)> {
    let steps = p1.resolution();
    if p2.resolution() != steps {
        return Err(Error::Precondition(format!(
            "plans have resolutions {steps} and {}",
            p2.resolution()
        )));
    }
    let k = grid_index(t, steps)?;
    if k == 0 || k == steps {
        return Err(Error::Precondition(format!("anchor time {t} must lie in (0, 1)")));
    }
    let mut left = Vec::new();
    let mut right = Vec::new();
    for p in [p1, p2] {
        for (g, m) in p.atoms() {
            left.push((g.restrict_indices(0, k)?, 0.5 * m));
            right.push((g.restrict_indices(k, steps)?, 0.5 * m));
        }
    }
    let merge = |atoms: Vec<(DiscreteGeodesic, f64)>| {
        let mut merged: BTreeMap<DiscreteGeodesic, f64> = BTreeMap::new();
        for (g, m) in atoms {
            *merged.entry(g).or_default() += m;
        }
        merged.into_iter().collect()
    };
    Ok((
        HalfPlan {
            side: Side::Left,
            anchor_time: t,
            atoms: merge(left),
        },
        HalfPlan {
            side: Side::Right,
            anchor_time: t,
            atoms: merge(right),
        },
    ))
}

/// Disintegrates `½ (res_0^t)_# (π¹ + π²)` over endpoints and
/// `½ (res_t^1)_# (π¹ + π²)` over starting points.
pub fn split_and_disintegrate(
    p1: &GeodesicPlan,
    p2: &GeodesicPlan,
    t: f64,
) -> Result<(Disintegration, Disintegration)> {
    let (l, r) = halves(p1, p2, t)?;
    Ok((l.disintegrate(), r.disintegrate()))
}

/// Glues every left half arriving at `x` to every right half leaving `x`,
/// weighted by the product of conditionals.
///
/// Fails with [`Error::Mix`] when a concatenation is not a constant-speed
/// geodesic, which happens when the inputs are not sub-plans of one optimal plan.
pub fn mix_plans(
    space: &FiniteMMSpace,
    p1: &GeodesicPlan,
    p2: &GeodesicPlan,
    t: f64,
    tol: f64,
) -> Result<GeodesicPlan> {
    let (left, right) = split_and_disintegrate(p1, p2, t)?;
    let mut atoms = Vec::new();
    for (&x, w) in &left.base {
        let ls = &left.conditionals[&x];
        let rs = right
            .conditionals
            .get(&x)
            .ok_or_else(|| Error::Structural(format!("anchor {} has no right half", space.id(x))))?;
        for (l, ql) in ls {
            for (r, qr) in rs {
                let seq: Vec<usize> = l.steps().iter().chain(&r.steps()[1..]).copied().collect();
                let g = DiscreteGeodesic::new(space, seq, tol).map_err(|_| Error::Mix {
                    anchor: space.id(x).to_string(),
                    left: l.ids(space).into_iter().map(String::from).collect(),
                    right: r.ids(space).into_iter().map(String::from).collect(),
                })?;
                atoms.push((g, w * ql * qr));
            }
        }
    }
    GeodesicPlan::from_atoms(space, atoms)
}

/// Two support geodesics through the same point at time `t` with different lengths.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LengthWitness {
    pub i: usize,
    pub j: usize,
    pub t: f64,
    pub lengths: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LengthReport {
    pub pass: bool,
    pub witnesses: Vec<LengthWitness>,
}

/// Checks that support geodesics meeting at an interior grid time have equal
/// lengths; `t = None` scans every interior grid time.
pub fn verify_length_equality(plan: &GeodesicPlan, t: Option<f64>, tol: f64) -> Result<LengthReport> {
    let steps = plan.resolution();
    let times: Vec<usize> = match t {
        Some(t) => vec![grid_index(t, steps)?],
        None => (1..steps).collect(),
    };
    let atoms = plan.atoms();
    let mut witnesses = Vec::new();
    for &k in times.iter().filter(|&&k| k > 0 && k < steps) {
        for i in 0..atoms.len() {
            for j in i + 1..atoms.len() {
                let (a, b) = (&atoms[i].0, &atoms[j].0);
                if a.at(k) == b.at(k) && (a.length() - b.length()).abs() > tol {
                    witnesses.push(LengthWitness {
                        i,
                        j,
                        t: grid_time(k, steps),
                        lengths: (a.length(), b.length()),
                    });
                }
            }
        }
    }
    Ok(LengthReport {
        pass: witnesses.is_empty(),
        witnesses,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum UniquenessVerdict {
    UniqueMapInduced,
    /// One optimal coupling that splits some source point.
    UniqueNotMapInduced,
    NonUnique,
}

/// A branching pair found in the mixed plan or its time reverse.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchWitness {
    /// Found in the time-reversed mixed plan.
    pub reversed: bool,
    pub crossing_time: f64,
    pub pair: BranchPair,
    pub geodesics: (Vec<String>, Vec<String>),
}

#[derive(Debug, Clone)]
pub struct UniquenessReport {
    pub verdict: UniquenessVerdict,
    pub vertices_found: usize,
    /// Whether the optimal face was enumerated completely.
    pub exhaustive: bool,
    pub witness_pair: Option<(TransportPlan, TransportPlan)>,
    /// `½ (π¹ + π²)`, optimal by linearity of the cost.
    pub averaged: Option<TransportPlan>,
    pub mixed: Option<GeodesicPlan>,
    pub branch_witness: Option<BranchWitness>,
    /// Set when the mixing step failed.
    pub mix_error: Option<String>,
}

/// Decides whether the optimal coupling is unique and map-induced.
///
/// With two optimal vertices, both are lifted, their common part set aside,
/// and the singular parts are mixed at the first interior time where their
/// interpolants share a point; the mixed plan and its reverse are then
/// scanned for branching.
pub fn certify_unique_optimal(
    space: &FiniteMMSpace,
    mu0: &crate::ot::ProbMeasure,
    mu1: &crate::ot::ProbMeasure,
    steps: usize,
    budget: usize,
) -> Result<UniquenessReport> {
    let faces = optimal_vertices(space, mu0, mu1, budget.max(2), tol::W2)?;
    let mut report = UniquenessReport {
        verdict: UniquenessVerdict::UniqueMapInduced,
        vertices_found: faces.vertices.len(),
        exhaustive: faces.exhaustive,
        witness_pair: None,
        averaged: None,
        mixed: None,
        branch_witness: None,
        mix_error: None,
    };
    if faces.vertices.len() == 1 {
        if !is_induced_by_map(&faces.vertices[0]).map_induced {
            report.verdict = UniquenessVerdict::UniqueNotMapInduced;
        }
        return Ok(report);
    }
    report.verdict = UniquenessVerdict::NonUnique;
    let (v1, v2) = (&faces.vertices[0], &faces.vertices[1]);
    report.averaged = Some(TransportPlan::mixture(space, &[(v1, 0.5), (v2, 0.5)])?);
    report.witness_pair = Some((v1.clone(), v2.clone()));

    let l1 = lift_plan(space, v1, steps, LiftStrategy::Uniform)?;
    let l2 = lift_plan(space, v2, steps, LiftStrategy::Uniform)?;
    let mass2: BTreeMap<&DiscreteGeodesic, f64> = l2.atoms().iter().map(|(g, m)| (g, *m)).collect();
    let common: Vec<(DiscreteGeodesic, f64)> = l1
        .atoms()
        .iter()
        .filter_map(|(g, m)| mass2.get(g).map(|m2| (g.clone(), m.min(*m2))))
        .collect();
    let shared: f64 = common.iter().map(|a| a.1).sum();
    let singular = |p: &GeodesicPlan| -> Result<GeodesicPlan> {
        let c: BTreeMap<&DiscreteGeodesic, f64> = common.iter().map(|(g, m)| (g, *m)).collect();
        let factors: Vec<f64> = p
            .atoms()
            .iter()
            .map(|(g, m)| (m - c.get(g).copied().unwrap_or(0.0)).max(0.0) / m)
            .collect();
        p.reweight(&factors)
    };
    let (s1, s2) = (singular(&l1)?, singular(&l2)?);

    let crossing = (1..steps).find(|&k| {
        let (a, b) = (s1.evaluate_index(k), s2.evaluate_index(k));
        a.weights().iter().zip(b.weights()).any(|(x, y)| *x > tol::MASS && *y > tol::MASS)
    });
    let Some(k) = crossing else {
        return Ok(report);
    };
    let t = grid_time(k, steps);
    let mixed = match mix_plans(space, &s1, &s2, t, tol::GEO) {
        Ok(m) => m,
        Err(e) => {
            report.mix_error = Some(e.to_string());
            return Ok(report);
        }
    };
    let mixed = if shared > tol::MASS_DROP {
        let kept = GeodesicPlan::from_atoms(space, common.iter().map(|(g, m)| (g.clone(), m / shared)))?;
        GeodesicPlan::mixture(space, &[(&kept, shared), (&mixed, 1.0 - shared)])?
    } else {
        mixed
    };
    for (reversed, plan) in [(false, mixed.clone()), (true, mixed.time_reverse())] {
        if let Some(&pair) = find_branching_pairs(&plan).pairs.first() {
            let ids = |g: &DiscreteGeodesic| g.ids(space).into_iter().map(String::from).collect();
            report.branch_witness = Some(BranchWitness {
                reversed,
                crossing_time: t,
                pair,
                geodesics: (ids(&plan.atoms()[pair.i].0), ids(&plan.atoms()[pair.j].0)),
            });
            break;
        }
    }
    report.mixed = Some(mixed);
    Ok(report)
}
