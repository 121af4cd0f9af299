//! Deterministic instance builders shared by the benchmarks.

use cdk_core::instances::{random_measure, random_ot_instance, random_pair_measure, OtInstance};
use cdk_core::{build_space, Norm, SpaceGenSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random small instances with `|supp μ0| + |supp μ1| <= 8`.
pub fn small_instances(count: usize, seed: u64) -> Vec<OtInstance> {
    let mut r = rng(seed);
    (0..count)
        .map(|_| random_ot_instance(&mut r, 8).expect("generator builds valid spaces"))
        .collect()
}

/// Full-support random measures on a `side x side` grid.
pub fn grid_instance(side: usize, norm: Norm, seed: u64) -> OtInstance {
    let space = build_space(&SpaceGenSpec::grid(side, 0.5, norm)).expect("dyadic grid");
    let mut r = rng(seed);
    let all: Vec<usize> = (0..space.len()).collect();
    OtInstance {
        mu0: random_measure(&mut r, space.len(), &all),
        mu1: random_measure(&mut r, space.len(), &all),
        space,
    }
}

pub fn pair_measure(n: usize, seed: u64) -> Vec<(usize, usize, f64)> {
    random_pair_measure(&mut rng(seed), n)
}
