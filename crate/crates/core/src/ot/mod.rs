//! Exact W2 optimal transport on finite spaces.

mod measure;
mod monotone;
mod plan;
mod polytope;
mod simplex;

pub use measure::ProbMeasure;
pub use monotone::{check_cyclical_monotonicity, CycleWitness, MonotonicityReport};
pub use plan::{restrict_plan, TransportPlan};
pub use polytope::{brute_force_w2, optimal_vertices, VertexEnumeration, DEFAULT_BRUTE_CAP};
pub use simplex::{solve_w2, W2Solution};
