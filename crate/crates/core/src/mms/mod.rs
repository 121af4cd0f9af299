//! Finite metric measure spaces and their discrete constant-speed geodesics.

mod generate;
mod geodesic;
mod space;

pub use generate::{build_space, MeasureGen, Norm, SpaceGenSpec, SpaceKind, WeightedEdge};
pub use geodesic::{enumerate_geodesics, restrict_geodesic, DiscreteGeodesic};
pub use space::{check_metric, FiniteMMSpace, MetricReport, MetricViolation};
