//! Optimal transport, discrete geodesic plans and entropy convexity on
//! finite metric measure spaces.

pub mod branching;
pub mod entropy;
pub mod error;
pub mod geoplan;
pub mod grid;
pub mod instances;
pub mod io;
pub mod mapmix;
pub mod mms;
pub mod ot;
pub mod tol;
mod verdict;

pub use entropy::{
    certify_strong_cd, check_k_convexity, entropy, length_bound, log2_drop_experiment, CDReport,
    EntropyValue, Log2DemoConfig, Log2Report, StrongCdOptions, StrongCdReport,
};
pub use error::{Error, Result};
pub use branching::{
    best_split, branching_profile, find_branching_pairs, pair_product_measure,
    single_branch_normalize, BranchReport, PairMeasure,
};
pub use geoplan::{lift_plan, GeodesicPlan, LiftStrategy};
pub use mapmix::{
    certify_unique_optimal, is_induced_by_map, mix_plans, split_and_disintegrate,
    verify_length_equality, UniquenessReport, UniquenessVerdict,
};
pub use mms::{
    build_space, enumerate_geodesics, DiscreteGeodesic, FiniteMMSpace, Norm, SpaceGenSpec,
};
pub use ot::{solve_w2, ProbMeasure, TransportPlan, W2Solution};
pub use verdict::Verdict;
