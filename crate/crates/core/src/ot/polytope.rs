//! Combinatorial enumeration of transport-polytope vertices.
//!
//! Vertices of `{σ >= 0 : row sums = a, column sums = b}` are the feasible
//! basic solutions: flows supported on a spanning tree of the bipartite
//! graph on `m + n` nodes. Each tree determines its flow uniquely by leaf
//! elimination, so enumerating `(m + n - 1)`-subsets of cells that form a
//! spanning tree visits every vertex (degenerate vertices more than once).

use std::collections::BTreeSet;

use itertools::Itertools;

use super::simplex::{solve_w2, support_problem};
use super::{ProbMeasure, TransportPlan};
use crate::error::{Error, Result};
use crate::mms::FiniteMMSpace;
use crate::tol;

pub const DEFAULT_BRUTE_CAP: usize = 8;

/// Cap on examined cell subsets before the enumeration gives up on exhaustiveness.
const MAX_BASES: usize = 5_000_000;

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Flows on `cells` (pairs `(row, col)`) if they form a spanning tree; entries
/// may be negative when the basis is infeasible.
pub(crate) fn tree_flows(supply: &[f64], demand: &[f64], cells: &[(usize, usize)]) -> Option<Vec<f64>> {
    let (m, n) = (supply.len(), demand.len());
    if cells.len() != m + n - 1 {
        return None;
    }
    let mut parent: Vec<usize> = (0..m + n).collect();
    for &(r, c) in cells {
        let (a, b) = (find(&mut parent, r), find(&mut parent, m + c));
        if a == b {
            return None;
        }
        parent[a] = b;
    }
    let mut residual: Vec<f64> = supply.iter().chain(demand).copied().collect();
    let mut degree = vec![0usize; m + n];
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); m + n];
    for (e, &(r, c)) in cells.iter().enumerate() {
        degree[r] += 1;
        degree[m + c] += 1;
        incident[r].push(e);
        incident[m + c].push(e);
    }
    let mut done = vec![false; cells.len()];
    let mut flows = vec![0.0; cells.len()];
    let mut stack: Vec<usize> = (0..m + n).filter(|&v| degree[v] == 1).collect();
    while let Some(v) = stack.pop() {
        if degree[v] != 1 {
            continue;
        }
        let e = *incident[v].iter().find(|&&e| !done[e]).unwrap();
        let (r, c) = cells[e];
        let other = if v == r { m + c } else { r };
        flows[e] = residual[v];
        residual[other] -= residual[v];
        residual[v] = 0.0;
        done[e] = true;
        degree[v] -= 1;
        degree[other] -= 1;
        if degree[other] == 1 {
            stack.push(other);
        }
    }
    Some(flows)
}

/// W2² as the minimum cost over all vertices of the transport polytope.
///
/// Independent of the simplex solver; exponential, so the combined support
/// size `|supp μ0| + |supp μ1|` must not exceed `cap`.
pub fn brute_force_w2(
    space: &FiniteMMSpace,
    mu0: &ProbMeasure,
    mu1: &ProbMeasure,
    cap: usize,
) -> Result<f64> {
    let (_, _, tp) = support_problem(space, mu0, mu1)?;
    let size = tp.m + tp.n;
    if size > cap {
        return Err(Error::Size { size, cap });
    }
    let all: Vec<(usize, usize)> = (0..tp.m)
        .flat_map(|r| (0..tp.n).map(move |c| (r, c)))
        .collect();
    let mut best = f64::INFINITY;
    for subset in all.iter().copied().combinations(size - 1) {
        let Some(flows) = tree_flows(&tp.supply, &tp.demand, &subset) else {
            continue;
        };
        if flows.iter().any(|&f| f < -tol::MASS) {
            continue;
        }
        let cost: f64 = subset
            .iter()
            .zip(&flows)
            .map(|(&(r, c), &f)| f.max(0.0) * tp.cost[r * tp.n + c])
            .sum();
        best = best.min(cost);
    }
    Ok(best)
}

/// Vertices of the optimal face of the transport polytope.
#[derive(Debug, Clone)]
pub struct VertexEnumeration {
    pub vertices: Vec<TransportPlan>,
    /// W2² shared by every vertex.
    pub cost: f64,
    /// `false` when `budget` vertices were reached with more remaining.
    pub exhaustive: bool,
}

/// Enumerates distinct optimal couplings that are polytope vertices, up to `budget`.
///
/// The optimal face is the polytope restricted to pairs that are tight under
/// the solver's optimal duals; its vertices are found by spanning-tree
/// enumeration over those pairs only.
pub fn optimal_vertices(
    space: &FiniteMMSpace,
    mu0: &ProbMeasure,
    mu1: &ProbMeasure,
    budget: usize,
    tol: f64,
) -> Result<VertexEnumeration> {
    let sol = solve_w2(space, mu0, mu1)?;
    let (rows, cols, tp) = support_problem(space, mu0, mu1)?;
    let tight: Vec<(usize, usize)> = sol
        .tight_pairs(space, tol)
        .into_iter()
        .map(|(i, j)| {
            (
                rows.binary_search(&i).unwrap(),
                cols.binary_search(&j).unwrap(),
            )
        })
        .collect();
    let k = tp.m + tp.n - 1;
    let mut seen: BTreeSet<Vec<(usize, usize, i64)>> = BTreeSet::new();
    let mut vertices = Vec::new();
    let mut exhaustive = true;
    for (examined, subset) in tight.iter().copied().combinations(k).enumerate() {
        if examined >= MAX_BASES {
            exhaustive = false;
            break;
        }
        let Some(flows) = tree_flows(&tp.supply, &tp.demand, &subset) else {
            continue;
        };
        if flows.iter().any(|&f| f < -tol::MASS) {
            continue;
        }
        let key: Vec<(usize, usize, i64)> = subset
            .iter()
            .zip(&flows)
            .filter(|(_, &f)| f > tol::MASS_DROP)
            .map(|(&(r, c), &f)| (r, c, (f * 1e12).round() as i64))
            .sorted()
            .collect();
        if !seen.insert(key) {
            continue;
        }
        if vertices.len() == budget {
            exhaustive = false;
            break;
        }
        let plan = TransportPlan::with_marginals(
            space,
            mu0,
            mu1,
            subset
                .iter()
                .zip(&flows)
                .map(|(&(r, c), &f)| (rows[r], cols[c], f.max(0.0))),
        )?;
        vertices.push(plan);
    }
    Ok(VertexEnumeration {
        vertices,
        cost: sol.cost,
        exhaustive,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mms::{build_space, SpaceGenSpec};

    #[test]
    fn dirac_oracle() {
        let s = build_space(&SpaceGenSpec::path(4)).unwrap();
        let c = brute_force_w2(&s, &ProbMeasure::dirac(4, 1), &ProbMeasure::dirac(4, 3), 8);
        assert_eq!(c.unwrap(), 4.0);
    }

    #[test]
    fn uniform_pair_oracle_is_zero() {
        let s = build_space(&SpaceGenSpec::path(2)).unwrap();
        let mu = ProbMeasure::new(vec![0.5, 0.5]).unwrap();
        assert_eq!(brute_force_w2(&s, &mu, &mu, 8).unwrap(), 0.0);
    }

    #[test]
    fn cap_exceeded() {
        let s = build_space(&SpaceGenSpec::path(5)).unwrap();
        let mu = ProbMeasure::uniform_on(5, &[0, 1, 2, 3, 4]).unwrap();
        assert!(matches!(
            brute_force_w2(&s, &mu, &mu, 8),
            Err(Error::Size { size: 10, cap: 8 })
        ));
    }

    #[test]
    fn tree_flow_detects_cycles() {
        let cells = [(0, 0), (0, 1), (1, 0), (1, 1)];
        assert!(tree_flows(&[0.5, 0.5], &[0.5, 0.5], &cells[..3]).is_some());
        assert!(tree_flows(&[0.5, 0.5], &[0.5, 0.5], &[(0, 0), (1, 1), (0, 0)]).is_none());
    }

    #[test]
    fn two_point_swap_is_not_optimal() {
        let s = build_space(&SpaceGenSpec::path(2)).unwrap();
        let mu = ProbMeasure::new(vec![0.5, 0.5]).unwrap();
        let e = optimal_vertices(&s, &mu, &mu, 10, 1e-9).unwrap();
        assert!(e.exhaustive);
        assert_eq!(e.vertices.len(), 1);
        assert_eq!(e.vertices[0].entries(), &[(0, 0, 0.5), (1, 1, 0.5)]);
    }

    #[test]
    fn star_has_two_optimal_vertices() {
        let s = build_space(&SpaceGenSpec::star(4)).unwrap();
        let mu0 = ProbMeasure::uniform_on(5, &[1, 2]).unwrap();
        let mu1 = ProbMeasure::uniform_on(5, &[3, 4]).unwrap();
        let e = optimal_vertices(&s, &mu0, &mu1, 10, 1e-9).unwrap();
        assert!(e.exhaustive);
        assert_eq!(e.vertices.len(), 2);
        let truncated = optimal_vertices(&s, &mu0, &mu1, 1, 1e-9).unwrap();
        assert_eq!(truncated.vertices.len(), 1);
        assert!(!truncated.exhaustive);
    }
}
