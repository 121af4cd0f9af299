//! Cyclical monotonicity of a coupling's support.

use serde::Serialize;

use super::TransportPlan;
use crate::mms::FiniteMMSpace;

/// Support pairs `(x_k, y_k)` whose cyclic reassignment `x_k -> y_{k+1}`
/// strictly lowers the cost.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CycleWitness {
    pub pairs: Vec<(usize, usize)>,
    /// `Σ d²(x_k, y_k) - Σ d²(x_k, y_{k+1})`, positive on a violation.
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityReport {
    pub pass: bool,
    /// Worst violating cycle.
    pub witness: Option<CycleWitness>,
}

/// Checks every cycle of at most `max_len` support pairs.
///
/// A cycle counts as violating when its slack exceeds `tol · (1 + Σ d²(x_k, y_k))`.
pub fn check_cyclical_monotonicity(
    space: &FiniteMMSpace,
    plan: &TransportPlan,
    max_len: usize,
    tol: f64,
) -> MonotonicityReport {
    let pairs = plan.support_pairs();
    let mut worst: Option<CycleWitness> = None;
    let mut cycle = Vec::with_capacity(max_len);
    for first in 0..pairs.len() {
        cycle.clear();
        cycle.push(first);
        extend(space, &pairs, &mut cycle, max_len, tol, &mut worst);
    }
    MonotonicityReport {
        pass: worst.is_none(),
        witness: worst,
    }
}

fn extend(
    space: &FiniteMMSpace,
    pairs: &[(usize, usize)],
    cycle: &mut Vec<usize>,
    max_len: usize,
    tol: f64,
    worst: &mut Option<CycleWitness>,
) {
    if cycle.len() >= 2 {
        let k = cycle.len();
        let mut current = 0.0;
        let mut shifted = 0.0;
        for a in 0..k {
            let (x, y) = pairs[cycle[a]];
            current += space.dist2(x, y);
            shifted += space.dist2(x, pairs[cycle[(a + 1) % k]].1);
        }
        let slack = current - shifted;
        if slack > tol * (1.0 + current) && worst.as_ref().is_none_or(|w| slack > w.slack) {
            *worst = Some(CycleWitness {
                pairs: cycle.iter().map(|&c| pairs[c]).collect(),
                slack,
            });
        }
    }
    if cycle.len() == max_len {
        return;
    }
    for next in cycle[0] + 1..pairs.len() {
        if cycle.contains(&next) {
            continue;
        }
        cycle.push(next);
        extend(space, pairs, cycle, max_len, tol, worst);
        cycle.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mms::{build_space, SpaceGenSpec};
    use crate::ot::solve_w2;
    use crate::ot::ProbMeasure;

    #[test]
    fn crossing_plan_on_a_line_fails() {
        let s = build_space(&SpaceGenSpec::path(4)).unwrap();
        let crossed = TransportPlan::from_entries(&s, [(0, 3, 0.5), (1, 2, 0.5)]).unwrap();
        let r = check_cyclical_monotonicity(&s, &crossed, 3, 1e-9);
        assert!(!r.pass);
        let w = r.witness.unwrap();
        assert_eq!(w.pairs, vec![(0, 3), (1, 2)]);
        assert!((w.slack - 2.0).abs() < 1e-12);
    }

    #[test]
    fn optimal_plan_passes() {
        let s = build_space(&SpaceGenSpec::path(5)).unwrap();
        let mu0 = ProbMeasure::uniform_on(5, &[0, 1, 2]).unwrap();
        let mu1 = ProbMeasure::uniform_on(5, &[2, 3, 4]).unwrap();
        let sol = solve_w2(&s, &mu0, &mu1).unwrap();
        assert!(check_cyclical_monotonicity(&s, &sol.plan, 3, 1e-9).pass);
    }
}
