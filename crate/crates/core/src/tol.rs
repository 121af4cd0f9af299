//! Default tolerances.
//!
//! All arithmetic is `f64`. On dyadic grids and integer-weighted graphs the
//! distances and squared costs are exact, so the geodesic and convexity
//! tolerances only absorb rounding in mass bookkeeping.

/// Row/column sums and total masses.
pub const MASS: f64 = 1e-12;

/// Masses at or below this are treated as absent when building plans.
pub const MASS_DROP: f64 = 1e-14;

/// Metric axioms on float data.
pub const METRIC: f64 = 1e-12;

/// Constant-speed invariant of discrete geodesics.
pub const GEO: f64 = 1e-9;

/// Entropy K-convexity slack.
pub const CD: f64 = 1e-9;

/// Agreement of W2 values computed along different routes.
pub const W2: f64 = 1e-9;

/// Map-induced test: split mass above this counts.
pub const MAP: f64 = 1e-12;

/// Grid-time snapping.
pub const GRID: f64 = 1e-9;
