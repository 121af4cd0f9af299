//! Transportation simplex on the bipartite support graph.
//!
//! The basis is a spanning tree over `m` row nodes and `n` column nodes.
//! Pricing scans non-basic cells in row-major order and enters the first one
//! with negative reduced cost; among tied leaving cells the lowest row-major
//! index leaves (Bland's rule), so degenerate pivots cannot cycle and the
//! returned plan is reproducible.

use std::collections::VecDeque;

use super::{ProbMeasure, TransportPlan};
use crate::error::{Error, Result};
use crate::mms::FiniteMMSpace;

/// Optimal plan plus the dual potentials that certify it.
#[derive(Debug, Clone)]
pub struct W2Solution {
    pub plan: TransportPlan,
    /// `W2²`.
    pub cost: f64,
    rows: Vec<usize>,
    cols: Vec<usize>,
    u: Vec<f64>,
    v: Vec<f64>,
}

impl W2Solution {
    pub fn w2(&self) -> f64 {
        self.cost.sqrt()
    }

    /// Support points of the source measure, in index order.
    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    pub fn cols(&self) -> &[usize] {
        &self.cols
    }

    /// Pairs with zero reduced cost `d² - u - v`; every optimal coupling is
    /// supported on them.
    pub fn tight_pairs(&self, space: &FiniteMMSpace, tol: f64) -> Vec<(usize, usize)> {
        let scale = 1.0 + self.cost.abs();
        let mut out = Vec::new();
        for (r, &i) in self.rows.iter().enumerate() {
            for (c, &j) in self.cols.iter().enumerate() {
                if (space.dist2(i, j) - self.u[r] - self.v[c]).abs() <= tol * scale {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

pub(crate) struct Transportation {
    pub m: usize,
    pub n: usize,
    pub supply: Vec<f64>,
    pub demand: Vec<f64>,
    /// Row-major `m × n`.
    pub cost: Vec<f64>,
}

pub(crate) struct Basis {
    pub basic: Vec<bool>,
    pub flow: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl Transportation {
    fn north_west(&self) -> Basis {
        let (m, n) = (self.m, self.n);
        let mut basic = vec![false; m * n];
        let mut flow = vec![0.0; m * n];
        let mut a = self.supply.clone();
        let mut b = self.demand.clone();
        let (mut i, mut j) = (0, 0);
        loop {
            let x = a[i].min(b[j]).max(0.0);
            basic[i * n + j] = true;
            flow[i * n + j] = x;
            a[i] -= x;
            b[j] -= x;
            if i == m - 1 && j == n - 1 {
                break;
            }
            if (a[i] <= b[j] && i < m - 1) || j == n - 1 {
                i += 1;
            } else {
                j += 1;
            }
        }
        Basis {
            basic,
            flow,
            u: vec![0.0; m],
            v: vec![0.0; n],
        }
    }

    fn adjacency(&self, basic: &[bool]) -> Vec<Vec<usize>> {
        let (m, n) = (self.m, self.n);
        let mut adj = vec![Vec::new(); m + n];
        for i in 0..m {
            for j in 0..n {
                if basic[i * n + j] {
                    adj[i].push(m + j);
                    adj[m + j].push(i);
                }
            }
        }
        adj
    }

    fn potentials(&self, adj: &[Vec<usize>], basis: &mut Basis) -> Result<()> {
        let (m, n) = (self.m, self.n);
        let mut seen = vec![false; m + n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        basis.u[0] = 0.0;
        while let Some(a) = queue.pop_front() {
            for &b in &adj[a] {
                if seen[b] {
                    continue;
                }
                seen[b] = true;
                if a < m {
                    let j = b - m;
                    basis.v[j] = self.cost[a * n + j] - basis.u[a];
                } else {
                    let i = b;
                    basis.u[i] = self.cost[i * n + (a - m)] - basis.v[a - m];
                }
                queue.push_back(b);
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Solver("basis is not a spanning tree".into()));
        }
        Ok(())
    }

    /// Tree path from `from` to `to`, as a node sequence.
    fn tree_path(adj: &[Vec<usize>], from: usize, to: usize) -> Vec<usize> {
        let mut parent = vec![usize::MAX; adj.len()];
        parent[from] = from;
        let mut queue = VecDeque::from([from]);
        while let Some(a) = queue.pop_front() {
            if a == to {
                break;
            }
            for &b in &adj[a] {
                if parent[b] == usize::MAX {
                    parent[b] = a;
                    queue.push_back(b);
                }
            }
        }
        let mut path = vec![to];
        let mut cur = to;
        while cur != from {
            cur = parent[cur];
            path.push(cur);
        }
        path.reverse();
        path
    }

    pub fn solve(&self) -> Result<Basis> {
        let (m, n) = (self.m, self.n);
        let cmax = self.cost.iter().copied().fold(0.0, f64::max);
        let eps = 1e-12 * (1.0 + cmax);
        let mut basis = self.north_west();
        let max_iter = 1000 + 50 * m * n;
        for _ in 0..max_iter {
            let adj = self.adjacency(&basis.basic);
            self.potentials(&adj, &mut basis)?;
            let entering = (0..m * n).find(|&cell| {
                !basis.basic[cell]
                    && self.cost[cell] - basis.u[cell / n] - basis.v[cell % n] < -eps
            });
            let Some(cell) = entering else {
                return Ok(basis);
            };
            let (i, j) = (cell / n, cell % n);
            let path = Self::tree_path(&adj, m + j, i);
            let cells: Vec<usize> = path
                .windows(2)
                .map(|w| {
                    let (r, c) = if w[0] < m { (w[0], w[1]) } else { (w[1], w[0]) };
                    r * n + (c - m)
                })
                .collect();
            // edges alternate -, +, -, ... starting next to the entering column
            let theta = cells
                .iter()
                .step_by(2)
                .map(|&c| basis.flow[c])
                .fold(f64::INFINITY, f64::min);
            let leaving = cells
                .iter()
                .step_by(2)
                .copied()
                .filter(|&c| basis.flow[c] == theta)
                .min()
                .expect("cycle has a minus cell");
            for (k, &c) in cells.iter().enumerate() {
                if k % 2 == 0 {
                    basis.flow[c] = (basis.flow[c] - theta).max(0.0);
                } else {
                    basis.flow[c] += theta;
                }
            }
            basis.flow[cell] = theta;
            basis.flow[leaving] = 0.0;
            basis.basic[cell] = true;
            basis.basic[leaving] = false;
        }
        Err(Error::Solver(format!("no convergence in {max_iter} pivots")))
    }
}

fn check_same_space(space: &FiniteMMSpace, mu0: &ProbMeasure, mu1: &ProbMeasure) -> Result<()> {
    if mu0.len() != space.len() || mu1.len() != space.len() {
        return Err(Error::Structural(format!(
            "measures of length {} and {} on a space of {} points",
            mu0.len(),
            mu1.len(),
            space.len()
        )));
    }
    Ok(())
}

pub(crate) fn support_problem(
    space: &FiniteMMSpace,
    mu0: &ProbMeasure,
    mu1: &ProbMeasure,
) -> Result<(Vec<usize>, Vec<usize>, Transportation)> {
    check_same_space(space, mu0, mu1)?;
    let rows = mu0.support();
    let cols = mu1.support();
    let cost = rows
        .iter()
        .flat_map(|&i| cols.iter().map(move |&j| space.dist2(i, j)))
        .collect();
    let tp = Transportation {
        m: rows.len(),
        n: cols.len(),
        supply: rows.iter().map(|&i| mu0.mass(i)).collect(),
        demand: cols.iter().map(|&j| mu1.mass(j)).collect(),
        cost,
    };
    Ok((rows, cols, tp))
}

/// Exact W2 optimal plan between two measures on the same space.
pub fn solve_w2(space: &FiniteMMSpace, mu0: &ProbMeasure, mu1: &ProbMeasure) -> Result<W2Solution> {
    let (rows, cols, tp) = support_problem(space, mu0, mu1)?;
    let basis = tp.solve()?;
    let n = tp.n;
    let entries = (0..tp.m * n)
        .filter(|&c| basis.basic[c] && basis.flow[c] > 0.0)
        .map(|c| (rows[c / n], cols[c % n], basis.flow[c]));
    let plan = TransportPlan::with_marginals(space, mu0, mu1, entries)?;
    Ok(W2Solution {
        cost: plan.cost(),
        plan,
        rows,
        cols,
        u: basis.u,
        v: basis.v,
    })
}
