use std::f64::consts::LN_2;

use cdk_core::entropy::{certify_strong_cd, check_k_convexity, entropy, StrongCdOptions};
use cdk_core::geoplan::{lift_plan, LiftStrategy};
use cdk_core::instances::{geodesic_instance, random_measure, random_subset, GeodesicFamily};
use cdk_core::mms::{build_space, Norm, SpaceGenSpec};
use cdk_core::{solve_w2, ProbMeasure, Verdict};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn direct_entropy(mu: &[f64], m: &[f64]) -> f64 {
    mu.iter()
        .zip(m)
        .filter(|(p, _)| **p > 0.0)
        .map(|(p, m)| p * (p.ln() - m.ln()))
        .sum()
}

#[test]
fn mixture_identity_for_singular_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let n = rng.gen_range(2..=12);
        let m: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..2.0)).collect();
        let all: Vec<usize> = (0..n).collect();
        let cut = rng.gen_range(1..n);
        let (ka, kb) = (rng.gen_range(1..=cut), rng.gen_range(1..=n - cut));
        let a = random_subset(&mut rng, &all[..cut], ka);
        let b = random_subset(&mut rng, &all[cut..], kb);
        let mu1 = random_measure(&mut rng, n, &a);
        let mu2 = random_measure(&mut rng, n, &b);
        let mix = ProbMeasure::new(
            mu1.weights().iter().zip(mu2.weights()).map(|(x, y)| 0.5 * x + 0.5 * y).collect(),
        )
        .unwrap();
        let lhs = entropy(&mix, &m).value;
        let rhs = 0.5 * entropy(&mu1, &m).value + 0.5 * entropy(&mu2, &m).value - LN_2;
        assert!((lhs - rhs).abs() <= 1e-9);
        assert!((lhs - direct_entropy(mix.weights(), &m)).abs() <= 1e-12);
    }
}

proptest! {
    #[test]
    fn jensen_lower_bound(seed in any::<u64>(), n in 1usize..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m: Vec<f64> = (0..n).map(|_| rng.gen_range(0.25..4.0)).collect();
        let all: Vec<usize> = (0..n).collect();
        let k = rng.gen_range(1..=n);
        let support = random_subset(&mut rng, &all, k);
        let mu = random_measure(&mut rng, n, &support);
        let mass: f64 = support.iter().map(|&i| m[i]).sum();
        let e = entropy(&mu, &m).value;
        prop_assert!(e >= -mass.ln() - 1e-12);

        let flat: Vec<f64> = (0..n).map(|i| if support.contains(&i) { m[i] / mass } else { 0.0 }).collect();
        let flat = ProbMeasure::new(flat).unwrap();
        prop_assert!((entropy(&flat, &m).value + mass.ln()).abs() <= 1e-12);
    }

    #[test]
    fn slack_is_permutation_equivariant(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = geodesic_instance(&mut rng, GeodesicFamily::Grid(Norm::Inf), 2, 5).unwrap();
        let n = inst.space.len();
        let sol = solve_w2(&inst.space, &inst.mu0, &inst.mu1).unwrap();
        let g = lift_plan(&inst.space, &sol.plan, 2, LiftStrategy::Uniform).unwrap();
        let k = rng.gen_range(-2.0..2.0);
        let base = check_k_convexity(&inst.space, &g, k, 1e-9).unwrap();

        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            perm.swap(i, rng.gen_range(0..=i));
        }
        let inv = {
            let mut inv = vec![0; n];
            for (new, &old) in perm.iter().enumerate() {
                inv[old] = new;
            }
            inv
        };
        let relabeled = inst.space.permuted(&perm).unwrap();
        let atoms = g.atoms().iter().map(|(geo, m)| {
            let steps = geo.steps().iter().map(|&p| inv[p]).collect();
            (cdk_core::DiscreteGeodesic::new(&relabeled, steps, 1e-9).unwrap(), *m)
        });
        let h = cdk_core::GeodesicPlan::from_atoms(&relabeled, atoms).unwrap();
        let moved = check_k_convexity(&relabeled, &h, k, 1e-9).unwrap();
        prop_assert!((base.slack - moved.slack).abs() <= 1e-12);
    }

    #[test]
    fn pass_is_monotone_in_k(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = geodesic_instance(&mut rng, GeodesicFamily::Grid(Norm::L1), 2, 5).unwrap();
        let sol = solve_w2(&inst.space, &inst.mu0, &inst.mu1).unwrap();
        let g = lift_plan(&inst.space, &sol.plan, 2, LiftStrategy::Uniform).unwrap();
        let ks = [-4.0, -1.0, 0.0, 1.0, 4.0];
        let slacks: Vec<f64> = ks.iter().map(|&k| check_k_convexity(&inst.space, &g, k, 1e-9).unwrap().slack).collect();
        for w in slacks.windows(2) {
            prop_assert!(w[0] <= w[1] + 1e-12);
        }
    }
}

#[test]
fn strong_cd_path_halves_exhaustive() {
    let s = build_space(&SpaceGenSpec::path(6)).unwrap();
    let mu0 = ProbMeasure::uniform_on(6, &[0, 1, 2]).unwrap();
    let mu1 = ProbMeasure::uniform_on(6, &[3, 4, 5]).unwrap();
    let r = certify_strong_cd(&s, &mu0, &mu1, 0.0, 3, &StrongCdOptions::default()).unwrap();
    assert_eq!(r.verdict, Verdict::Pass);
    assert!(r.exhaustive);
}

/// Star `0-1, 0-2, 0-3, 0-4, 2-5` with edges split into `steps` pieces.
fn split_star(steps: usize) -> cdk_core::FiniteMMSpace {
    use cdk_core::instances::subdivide;
    use cdk_core::mms::WeightedEdge;
    let edges = [(0, 1), (0, 2), (0, 3), (0, 4), (2, 5)]
        .into_iter()
        .map(|(a, b)| WeightedEdge(a, b, 1.0))
        .collect();
    build_space(&subdivide(&SpaceGenSpec::graph(6, edges), steps)).unwrap()
}

#[test]
fn interior_plans_fail_where_vertices_pass() {
    // Two optimal permutations; each alone keeps the entropy flat, any mixture
    // branches at the centre after t = 1/2.
    let s = split_star(4);
    let mu0 = ProbMeasure::uniform_on(s.len(), &[0, 4]).unwrap();
    let mu1 = ProbMeasure::uniform_on(s.len(), &[2, 3]).unwrap();
    let vertices_only = StrongCdOptions { samples: 0, ..Default::default() };
    let r = certify_strong_cd(&s, &mu0, &mu1, 0.0, 4, &vertices_only).unwrap();
    assert_eq!(r.verdict, Verdict::Pass);
    assert_eq!(r.vertices_checked, 2);

    let r = certify_strong_cd(&s, &mu0, &mu1, 0.0, 4, &StrongCdOptions::default()).unwrap();
    assert_eq!(r.verdict, Verdict::Fail);
    assert_eq!(r.witness_interval, Some((0.25, 0.75)));
    let report = r.witness_report.unwrap();
    assert!(report.slack > 0.0 && report.slack <= 0.25 * LN_2 + 1e-12);
    // The full-interval inequality alone does not see the defect.
    let full = check_k_convexity(&s, r.witness.as_ref().unwrap(), 0.0, 1e-9).unwrap();
    assert_eq!(full.verdict, Verdict::Pass);
}

#[test]
fn two_steps_cannot_see_a_midpoint_branch() {
    // At T = 2 the same pair has a single interior time, which is where the
    // mixture branches, so strong CD holds although the optimal plan is not unique.
    let s = split_star(2);
    let mu0 = ProbMeasure::uniform_on(s.len(), &[0, 4]).unwrap();
    let mu1 = ProbMeasure::uniform_on(s.len(), &[2, 3]).unwrap();
    let r = certify_strong_cd(&s, &mu0, &mu1, 0.0, 2, &StrongCdOptions::default()).unwrap();
    assert_eq!(r.verdict, Verdict::Pass);
    let u = cdk_core::certify_unique_optimal(&s, &mu0, &mu1, 2, 100).unwrap();
    assert_eq!(u.verdict, cdk_core::UniquenessVerdict::NonUnique);
}
