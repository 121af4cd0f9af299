//! Seeded random instance generators for tests, experiments and benchmarks.

use rand::seq::index::sample;
use rand::Rng;

use crate::error::Result;
use crate::mms::{build_space, FiniteMMSpace, Norm, SpaceGenSpec, SpaceKind, WeightedEdge};
use crate::ot::ProbMeasure;

/// A space with two probability measures on it.
#[derive(Debug, Clone)]
pub struct OtInstance {
    pub space: FiniteMMSpace,
    pub mu0: ProbMeasure,
    pub mu1: ProbMeasure,
}

/// Random recursive tree on `n` nodes with unit edges.
pub fn random_tree<R: Rng>(rng: &mut R, n: usize) -> SpaceGenSpec {
    SpaceGenSpec::graph(
        n,
        (1..n).map(|i| WeightedEdge(rng.gen_range(0..i), i, 1.0)).collect(),
    )
}

/// Splits every edge into `parts` equal edges. Original vertices keep their indices.
pub fn subdivide(spec: &SpaceGenSpec, parts: usize) -> SpaceGenSpec {
    let SpaceKind::Graph { nodes, edges } = &spec.kind else {
        return spec.clone();
    };
    let mut next = *nodes;
    let mut out = Vec::new();
    for &WeightedEdge(a, b, w) in edges {
        let mut prev = a;
        for _ in 1..parts {
            out.push(WeightedEdge(prev, next, w / parts as f64));
            prev = next;
            next += 1;
        }
        out.push(WeightedEdge(prev, b, w / parts as f64));
    }
    SpaceGenSpec::graph(next, out)
}

/// Random positive weights on `support`, normalized.
pub fn random_measure<R: Rng>(rng: &mut R, n: usize, support: &[usize]) -> ProbMeasure {
    let mut w = vec![0.0; n];
    for &i in support {
        w[i] = rng.gen_range(1..=8) as f64;
    }
    ProbMeasure::normalized(w).expect("support is nonempty")
}

/// `k` distinct elements of `candidates`.
pub fn random_subset<R: Rng>(rng: &mut R, candidates: &[usize], k: usize) -> Vec<usize> {
    let mut out: Vec<usize> = sample(rng, candidates.len(), k.min(candidates.len()))
        .into_iter()
        .map(|i| candidates[i])
        .collect();
    out.sort_unstable();
    out
}

/// Random zero-diagonal pair measure on `n` points with total mass 1.
pub fn random_pair_measure<R: Rng>(rng: &mut R, n: usize) -> Vec<(usize, usize, f64)> {
    let density = rng.gen_range(0.2..=1.0);
    let mut pairs = Vec::new();
    for a in 0..n {
        for b in 0..n {
            if a != b && rng.gen_bool(density) {
                pairs.push((a, b, rng.gen::<f64>() + 1e-3));
            }
        }
    }
    if pairs.is_empty() {
        let a = rng.gen_range(0..n);
        pairs.push((a, (a + 1) % n, 1.0));
    }
    let total: f64 = pairs.iter().map(|p| p.2).sum();
    pairs.into_iter().map(|(a, b, m)| (a, b, m / total)).collect()
}

fn random_space<R: Rng>(rng: &mut R) -> Result<FiniteMMSpace> {
    let spec = match rng.gen_range(0..6) {
        0 => SpaceGenSpec::path(rng.gen_range(3..=8)),
        1 => {
            let n = rng.gen_range(3..=8);
            random_tree(rng, n)
        }
        2 => SpaceGenSpec::grid(3, 0.5, Norm::Inf),
        3 => SpaceGenSpec::grid(3, 0.5, Norm::L1),
        4 => SpaceGenSpec::grid(3, 0.5, Norm::L2),
        _ => {
            let n = rng.gen_range(3..=8);
            let pts: Vec<Vec<f64>> = (0..n)
                .map(|_| vec![rng.gen_range(0..16) as f64, rng.gen_range(0..16) as f64 + 0.5 * rng.gen_range(0..2) as f64])
                .collect();
            let dist: Vec<Vec<f64>> = pts
                .iter()
                .map(|a| pts.iter().map(|b| Norm::L2.distance(a, b)).collect())
                .collect();
            if dist.iter().enumerate().any(|(i, r)| r.iter().enumerate().any(|(j, &d)| i != j && d == 0.0)) {
                return random_space(rng);
            }
            SpaceGenSpec {
                kind: SpaceKind::Explicit { dist },
                measure: Default::default(),
            }
        }
    };
    build_space(&spec)
}

/// Random space and measures with `|supp μ0| + |supp μ1| <= max_support`.
pub fn random_ot_instance<R: Rng>(rng: &mut R, max_support: usize) -> Result<OtInstance> {
    let space = random_space(rng)?;
    let n = space.len();
    let all: Vec<usize> = (0..n).collect();
    let m0 = rng.gen_range(1..=(max_support - 1).min(n));
    let m1 = rng.gen_range(1..=(max_support - m0).min(n));
    let s0 = random_subset(rng, &all, m0);
    let s1 = random_subset(rng, &all, m1);
    Ok(OtInstance {
        mu0: random_measure(rng, n, &s0),
        mu1: random_measure(rng, n, &s1),
        space,
    })
}

/// Families of spaces where every pair of support points is joined by a
/// `steps`-step geodesic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeodesicFamily {
    /// Random tree with each edge split into `steps` pieces; supports on original vertices.
    SubdividedTree,
    /// Dyadic grid with supports on the sublattice of spacing `steps`.
    Grid(Norm),
}

/// Random instance from `family` whose support pairs are all `steps`-geodesic.
pub fn geodesic_instance<R: Rng>(
    rng: &mut R,
    family: GeodesicFamily,
    steps: usize,
    max_support: usize,
) -> Result<OtInstance> {
    let (space, candidates) = match family {
        GeodesicFamily::SubdividedTree => {
            let nodes = rng.gen_range(3..=5);
            let tree = random_tree(rng, nodes);
            let space = build_space(&subdivide(&tree, steps))?;
            (space, (0..nodes).collect::<Vec<_>>())
        }
        GeodesicFamily::Grid(norm) => {
            let cells = if steps >= 8 { 1 } else { 2 };
            let side = cells * steps + 1;
            let space = build_space(&SpaceGenSpec::grid(side, 1.0 / side.next_power_of_two() as f64, norm))?;
            let candidates = (0..=cells)
                .flat_map(|a| (0..=cells).map(move |b| (a * steps, b * steps)))
                .map(|(x, y)| space.index_of(&format!("{x}_{y}")).unwrap())
                .collect();
            (space, candidates)
        }
    };
    let n = space.len();
    let k = candidates.len().min(max_support - 1);
    let m0 = rng.gen_range(1..=k);
    let m1 = rng.gen_range(1..=(max_support - m0).min(candidates.len()));
    let s0 = random_subset(rng, &candidates, m0);
    let s1 = random_subset(rng, &candidates, m1);
    Ok(OtInstance {
        mu0: random_measure(rng, n, &s0),
        mu1: random_measure(rng, n, &s1),
        space,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mms::enumerate_geodesics;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn subdivision_scales_edges() {
        let s = build_space(&subdivide(&SpaceGenSpec::path(3), 4)).unwrap();
        assert_eq!(s.len(), 3 + 2 * 3);
        assert_eq!(s.dist(0, 2), 2.0);
        assert_eq!(enumerate_geodesics(&s, 0, 2, 8, 1e-9).unwrap().len(), 1);
    }

    #[test]
    fn geodesic_instances_are_geodesic() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for steps in [2, 4, 8] {
            for family in [
                GeodesicFamily::SubdividedTree,
                GeodesicFamily::Grid(Norm::Inf),
                GeodesicFamily::Grid(Norm::L1),
            ] {
                let inst = geodesic_instance(&mut rng, family, steps, 6).unwrap();
                for x in inst.mu0.support() {
                    for y in inst.mu1.support() {
                        let g = enumerate_geodesics(&inst.space, x, y, steps, 1e-9).unwrap();
                        assert!(!g.is_empty(), "{family:?} T={steps}");
                    }
                }
            }
        }
    }

    #[test]
    fn pair_measures_are_normalized() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in 2..=10 {
            let p = random_pair_measure(&mut rng, n);
            assert!(p.iter().all(|&(a, b, _)| a != b));
            assert!((p.iter().map(|x| x.2).sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
