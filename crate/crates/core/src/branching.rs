//! Branching of geodesic plans.
//!
//! Two geodesics "agree on `[0, t]`" when their points coincide at every
//! grid index up to and including `t T`; profile and detection both use this
//! inclusive convention.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geoplan::GeodesicPlan;
use crate::grid::{grid_index, grid_time};
use crate::mms::{DiscreteGeodesic, FiniteMMSpace};
use crate::tol;

/// A finite measure on pairs of geodesics with a common resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct PairMeasure {
    steps: usize,
    atoms: Vec<((DiscreteGeodesic, DiscreteGeodesic), f64)>,
}

impl PairMeasure {
    pub fn resolution(&self) -> usize {
        self.steps
    }

    pub fn atoms(&self) -> &[((DiscreteGeodesic, DiscreteGeodesic), f64)] {
        &self.atoms
    }

    /// Mass of pairs `(γ, γ)`.
    pub fn diagonal_mass(&self) -> f64 {
        self.atoms.iter().filter(|((a, b), _)| a == b).map(|a| a.1).sum()
    }

    /// Off-diagonal part as a weighted pair list over an indexed ground set of geodesics.
    pub fn off_diagonal(&self) -> (Vec<DiscreteGeodesic>, Vec<(usize, usize, f64)>) {
        let mut ground: Vec<DiscreteGeodesic> = self
            .atoms
            .iter()
            .filter(|((a, b), _)| a != b)
            .flat_map(|((a, b), _)| [a.clone(), b.clone()])
            .collect();
        ground.sort();
        ground.dedup();
        let pos = |g: &DiscreteGeodesic| ground.binary_search(g).unwrap();
        let pairs = self
            .atoms
            .iter()
            .filter(|((a, b), _)| a != b)
            .map(|((a, b), m)| (pos(a), pos(b), *m))
            .collect();
        (ground, pairs)
    }
}

/// `∫ π_γ × π_γ`, where `π_γ` is `π` conditioned on the head `res_0^{t}`.
///
/// Atoms are grouped by their restriction to `[0, t_split]`; a group with
/// mass `w` and conditionals `q_i` contributes `w q_i q_j` to each pair.
pub fn pair_product_measure(plan: &GeodesicPlan, t_split: f64) -> Result<PairMeasure> {
    let steps = plan.resolution();
    let k = grid_index(t_split, steps)?;
    if k == 0 || k == steps {
        return Err(Error::Precondition(format!("split time {t_split} must lie in (0, 1)")));
    }
    Ok(product_by_head(plan, k))
}

fn product_by_head(plan: &GeodesicPlan, k: usize) -> PairMeasure {
    let mut groups: BTreeMap<&[usize], Vec<(&DiscreteGeodesic, f64)>> = BTreeMap::new();
    for (g, m) in plan.atoms() {
        groups.entry(&g.steps()[..=k]).or_default().push((g, *m));
    }
    let mut atoms = Vec::new();
    for members in groups.values() {
        let w: f64 = members.iter().map(|a| a.1).sum();
        for &(a, ma) in members {
            for &(b, mb) in members {
                atoms.push(((a.clone(), b.clone()), ma * mb / w));
            }
        }
    }
    PairMeasure {
        steps: plan.resolution(),
        atoms,
    }
}

/// `f(t)`: mass of pairs agreeing on `[0, t]`, at every grid time.
pub fn branching_profile(sigma: &PairMeasure) -> Vec<(f64, f64)> {
    let steps = sigma.steps;
    let mut f = vec![0.0; steps + 1];
    for ((a, b), m) in &sigma.atoms {
        if let Some(last) = a.common_prefix(b) {
            for v in &mut f[..=last] {
                *v += m;
            }
        }
    }
    f.into_iter()
        .enumerate()
        .map(|(i, v)| (grid_time(i, steps), v))
        .collect()
}

/// Grid time `t*` maximizing `f(t*) - f(t* + 1/T)`, lowest on ties, with the drop.
pub fn steepest_drop(profile: &[(f64, f64)]) -> Option<(f64, f64)> {
    profile
        .windows(2)
        .map(|w| (w[0].0, w[0].1 - w[1].1))
        .fold(None, |best, cur| match best {
            Some((_, d)) if d >= cur.1 => best,
            _ => Some(cur),
        })
}

/// Two atoms agreeing on `[0, t_branch]` with `t_branch > 0` and differing later.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BranchPair {
    pub i: usize,
    pub j: usize,
    /// Last common grid time.
    pub t_branch: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchReport {
    pub pairs: Vec<BranchPair>,
    pub essentially_nonbranching: bool,
    /// Profile of the pair product grouped by the head on `[0, 1/T]`.
    pub profile: Vec<ProfilePoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfilePoint {
    pub t: f64,
    pub f: f64,
}

/// Scans all pairs of support geodesics for branching.
pub fn find_branching_pairs(plan: &GeodesicPlan) -> BranchReport {
    let steps = plan.resolution();
    let atoms = plan.atoms();
    let mut pairs = Vec::new();
    for i in 0..atoms.len() {
        for j in i + 1..atoms.len() {
            match atoms[i].0.common_prefix(&atoms[j].0) {
                Some(last) if last >= 1 && last < steps => pairs.push(BranchPair {
                    i,
                    j,
                    t_branch: grid_time(last, steps),
                }),
                _ => {}
            }
        }
    }
    let head = if steps >= 2 { 1 } else { 0 };
    let profile = branching_profile(&product_by_head(plan, head))
        .into_iter()
        .map(|(t, f)| ProfilePoint { t, f })
        .collect();
    BranchReport {
        essentially_nonbranching: pairs.is_empty(),
        pairs,
        profile,
    }
}

pub const DEFAULT_SPLIT_CAP: usize = 20;

/// `σ(E × (X \ E))` for the subset `E` encoded by `mask`.
pub fn cut_value(mask: u64, pairs: &[(usize, usize, f64)]) -> f64 {
    pairs
        .iter()
        .filter(|&&(a, b, _)| mask >> a & 1 == 1 && mask >> b & 1 == 0)
        .map(|p| p.2)
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Split {
    /// Ground-set indices in `E`.
    pub set: Vec<usize>,
    pub value: f64,
}

/// Exhaustively maximizes `σ(E × (X \ E))` over nonempty proper subsets of
/// `{0, ..., n-1}`; ties go to the lowest bitmask.
pub fn best_split(n: usize, pairs: &[(usize, usize, f64)], cap: usize) -> Result<Split> {
    if n > cap || n > 63 {
        return Err(Error::Size { size: n, cap });
    }
    if n < 2 {
        return Err(Error::Precondition("splitting needs at least two points".into()));
    }
    if let Some(&(a, b, _)) = pairs.iter().find(|&&(a, b, _)| a >= n || b >= n) {
        return Err(Error::Structural(format!("pair ({a}, {b}) outside ground set of {n}")));
    }
    let diagonal: f64 = pairs.iter().filter(|p| p.0 == p.1).map(|p| p.2).sum();
    if diagonal > tol::MASS {
        return Err(Error::Precondition(format!("diagonal mass {diagonal:e} must be dropped first")));
    }
    let full = (1u64 << n) - 1;
    let better = |a: (u64, f64), b: (u64, f64)| {
        if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) {
            b
        } else {
            a
        }
    };
    let (mask, value) = (1..full)
        .into_par_iter()
        .map(|mask| (mask, cut_value(mask, pairs)))
        .reduce(|| (full, f64::NEG_INFINITY), better);
    Ok(Split {
        set: (0..n).filter(|&i| mask >> i & 1 == 1).collect(),
        value,
    })
}

/// `2^{n-2} / (2^n - 2)`: the average cut fraction over nonempty proper subsets.
pub fn split_lower_bound(n: usize) -> f64 {
    2f64.powi(n as i32 - 2) / (2f64.powi(n as i32) - 2.0)
}

/// Replaces a pair agreeing on `[0, t_split]` by one whose disagreement set
/// is a single grid interval, keeping `γ¹` and the endpoints.
///
/// With distinct endpoints the second curve follows `γ¹` up to the last
/// common time and `γ²` afterwards; with equal endpoints it follows `γ²`
/// only across the first disagreement interval. The spliced curve is
/// re-verified for constant speed.
pub fn single_branch_normalize(
    space: &FiniteMMSpace,
    g1: &DiscreteGeodesic,
    g2: &DiscreteGeodesic,
    t_split: f64,
    tol: f64,
) -> Result<(DiscreteGeodesic, DiscreteGeodesic)> {
    let steps = g1.resolution();
    if g2.resolution() != steps {
        return Err(Error::Precondition("pair must share the resolution".into()));
    }
    let k = grid_index(t_split, steps)?;
    if g1.common_prefix(g2).is_none_or(|last| last < k) {
        return Err(Error::Precondition(format!("pair does not agree on [0, {t_split}]")));
    }
    if g1 == g2 {
        return Ok((g1.clone(), g2.clone()));
    }
    let (a, b) = (g1.steps(), g2.steps());
    let spliced: Vec<usize> = if g1.end() != g2.end() {
        let last = (0..=steps).rev().find(|&i| a[i] == b[i]).unwrap();
        a[..=last].iter().chain(&b[last + 1..]).copied().collect()
    } else {
        let first = (0..=steps).find(|&i| a[i] != b[i]).unwrap();
        let rejoin = (first..=steps).find(|&i| a[i] == b[i]).unwrap();
        a[..first].iter().chain(&b[first..rejoin]).chain(&a[rejoin..]).copied().collect()
    };
    let ids: Vec<&str> = spliced.iter().map(|&p| space.id(p)).collect();
    let g4 = DiscreteGeodesic::new(space, spliced.clone(), tol)
        .map_err(|_| Error::Normalization(format!("spliced curve {ids:?} is not a geodesic")))?;
    Ok((g1.clone(), g4))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geoplan::{lift_plan, LiftStrategy};
    use crate::mms::{build_space, Norm, SpaceGenSpec};
    use crate::ot::TransportPlan;

    fn geo(space: &FiniteMMSpace, ids: &[&str]) -> DiscreteGeodesic {
        let steps = ids.iter().map(|id| space.index_of(id).unwrap()).collect();
        DiscreteGeodesic::new(space, steps, 1e-9).unwrap()
    }

    fn linf(side: usize, step: f64) -> FiniteMMSpace {
        build_space(&SpaceGenSpec::grid(side, step, Norm::Inf)).unwrap()
    }

    #[test]
    fn product_examples() {
        let s = linf(3, 0.5);
        let a = geo(&s, &["0_0", "1_0", "2_0"]);
        let b = geo(&s, &["0_0", "1_1", "2_0"]);
        let single = GeodesicPlan::from_atoms(&s, [(a.clone(), 1.0)]).unwrap();
        let p = pair_product_measure(&single, 0.5).unwrap();
        assert_eq!(p.atoms().len(), 1);
        assert_eq!(p.diagonal_mass(), 1.0);

        let two = GeodesicPlan::from_atoms(&s, [(a.clone(), 0.5), (b.clone(), 0.5)]).unwrap();
        let separate = pair_product_measure(&two, 0.5).unwrap();
        assert_eq!(separate.atoms().len(), 2);
        assert!(separate.atoms().iter().all(|x| x.1 == 0.5 && x.0 .0 == x.0 .1));
        assert!(pair_product_measure(&two, 0.0).is_err());
        assert!(pair_product_measure(&two, 0.3).is_err());
    }

    #[test]
    fn shared_head_gives_quarter_pairs() {
        let s = linf(5, 0.25);
        let a = geo(&s, &["0_2", "1_2", "2_2", "3_2", "4_2"]);
        let b = geo(&s, &["0_2", "1_2", "2_2", "3_3", "4_2"]);
        let plan = GeodesicPlan::from_atoms(&s, [(a, 0.5), (b, 0.5)]).unwrap();
        let p = pair_product_measure(&plan, 0.25).unwrap();
        assert_eq!(p.atoms().len(), 4);
        assert!(p.atoms().iter().all(|x| x.1 == 0.25));
        let f: Vec<f64> = branching_profile(&p).into_iter().map(|x| x.1).collect();
        assert_eq!(f, vec![1.0, 1.0, 1.0, 0.5, 0.5]);
        assert_eq!(steepest_drop(&branching_profile(&p)), Some((0.5, 0.5)));
    }

    #[test]
    fn detects_branching_on_linf_grid() {
        let s = linf(5, 0.25);
        let a = geo(&s, &["0_0", "1_0", "2_0", "3_0", "4_0"]);
        let b = geo(&s, &["0_0", "1_0", "2_1", "3_1", "4_0"]);
        let plan = GeodesicPlan::from_atoms(&s, [(a, 0.5), (b, 0.5)]).unwrap();
        let r = find_branching_pairs(&plan);
        assert!(!r.essentially_nonbranching);
        assert_eq!(r.pairs, vec![BranchPair { i: 0, j: 1, t_branch: 0.25 }]);

        let c = geo(&s, &["0_0", "1_1", "2_1", "3_1", "4_0"]);
        let d = geo(&s, &["0_0", "1_0", "2_0", "3_0", "4_0"]);
        let early = GeodesicPlan::from_atoms(&s, [(c, 0.5), (d, 0.5)]).unwrap();
        assert!(find_branching_pairs(&early).essentially_nonbranching);
    }

    #[test]
    fn uniform_lift_of_dirac_branches() {
        let s = linf(5, 0.25);
        let plan = TransportPlan::from_entries(&s, [(s.index_of("0_0").unwrap(), s.index_of("4_0").unwrap(), 1.0)]).unwrap();
        let g = lift_plan(&s, &plan, 4, LiftStrategy::Uniform).unwrap();
        let r = find_branching_pairs(&g);
        assert!(r.pairs.iter().any(|p| p.t_branch == 0.25));
        let lex = lift_plan(&s, &plan, 4, LiftStrategy::LexMin).unwrap();
        assert!(find_branching_pairs(&lex).essentially_nonbranching);
    }

    #[test]
    fn split_examples() {
        assert_eq!(
            best_split(2, &[(0, 1, 1.0)], DEFAULT_SPLIT_CAP).unwrap(),
            Split { set: vec![0], value: 1.0 }
        );
        let all: Vec<_> = (0..3)
            .flat_map(|a| (0..3).map(move |b| (a, b)))
            .filter(|(a, b)| a != b)
            .map(|(a, b)| (a, b, 1.0 / 6.0))
            .collect();
        let s = best_split(3, &all, DEFAULT_SPLIT_CAP).unwrap();
        assert!((s.value - 1.0 / 3.0).abs() < 1e-15);
        assert!(matches!(best_split(3, &[(1, 1, 1.0)], 20), Err(Error::Precondition(_))));
        assert!(matches!(best_split(21, &[], 20), Err(Error::Size { .. })));
        assert!((split_lower_bound(2) - 0.5).abs() < 1e-15);
        assert!((split_lower_bound(3) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn normalize_distinct_endpoints() {
        let s = linf(5, 0.25);
        let a = geo(&s, &["0_2", "1_1", "2_2", "3_2", "4_2"]);
        let b = geo(&s, &["0_2", "1_3", "2_2", "3_3", "4_3"]);
        assert!(single_branch_normalize(&s, &a, &b, 0.25, 1e-9).is_err());
        let (g3, g4) = single_branch_normalize(&s, &a, &b, 0.0, 1e-9).unwrap();
        assert_eq!(g3, a);
        assert_eq!(g4.ids(&s), vec!["0_2", "1_1", "2_2", "3_3", "4_3"]);
    }

    #[test]
    fn normalize_equal_endpoints() {
        let s = linf(9, 0.125);
        let a = geo(&s, &["0_4", "1_4", "2_4", "3_4", "4_4", "5_4", "6_4", "7_4", "8_4"]);
        let b = geo(&s, &["0_4", "1_4", "2_4", "3_5", "4_4", "5_4", "6_4", "7_3", "8_4"]);
        let (g3, g4) = single_branch_normalize(&s, &a, &b, 0.25, 1e-9).unwrap();
        assert_eq!(g3, a);
        let differ: Vec<usize> = (0..=8).filter(|&i| g3.at(i) != g4.at(i)).collect();
        assert_eq!(differ, vec![3]);
        let (_, same) = single_branch_normalize(&s, &a, &a, 0.5, 1e-9).unwrap();
        assert_eq!(same, a);
    }

    #[test]
    fn normalize_keeps_endpoints_and_lengths() {
        let s = build_space(&SpaceGenSpec::line(5, 0.5)).unwrap();
        let a = geo(&s, &["0", "2", "4"]);
        let b = geo(&s, &["0", "1", "2"]);
        let (g3, g4) = single_branch_normalize(&s, &a, &b, 0.0, 1e-9).unwrap();
        assert_eq!((g3.start(), g3.end(), g4.end()), (a.start(), a.end(), b.end()));
        assert_eq!((g3.length(), g4.length()), (a.length(), b.length()));
        assert!(single_branch_normalize(&s, &a, &b, 0.5, 1e-9).is_err());
    }
}
