use serde::{Deserialize, Serialize};

use super::FiniteMMSpace;
use crate::error::{Error, Result};
use crate::tol;

/// Norm used for grid spaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Norm {
    #[serde(rename = "1", alias = "l1")]
    L1,
    #[serde(rename = "2", alias = "l2")]
    L2,
    #[serde(rename = "inf", alias = "linf")]
    Inf,
}

impl Norm {
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        let diffs = a.iter().zip(b).map(|(x, y)| (x - y).abs());
        match self {
            Norm::L1 => diffs.sum(),
            Norm::L2 => diffs.map(|d| d * d).sum::<f64>().sqrt(),
            Norm::Inf => diffs.fold(0.0, f64::max),
        }
    }
}

impl std::str::FromStr for Norm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1" | "l1" => Ok(Norm::L1),
            "2" | "l2" => Ok(Norm::L2),
            "inf" | "linf" => Ok(Norm::Inf),
            other => Err(Error::Spec(format!("unknown norm {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedEdge(pub usize, pub usize, pub f64);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpaceKind {
    /// `side^dim` points at coordinates `step * index`, metric from `norm`.
    Grid {
        side: usize,
        step: f64,
        norm: Norm,
        #[serde(default = "default_dim")]
        dim: usize,
    },
    /// Shortest-path metric of a connected weighted graph on `nodes` vertices.
    Graph { nodes: usize, edges: Vec<WeightedEdge> },
    Explicit { dist: Vec<Vec<f64>> },
}

fn default_dim() -> usize {
    2
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureGen {
    #[default]
    Uniform,
    Weights(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceGenSpec {
    #[serde(flatten)]
    pub kind: SpaceKind,
    #[serde(default)]
    pub measure: MeasureGen,
}

impl SpaceGenSpec {
    pub fn grid(side: usize, step: f64, norm: Norm) -> Self {
        Self {
            kind: SpaceKind::Grid {
                side,
                step,
                norm,
                dim: 2,
            },
            measure: MeasureGen::Uniform,
        }
    }

    pub fn line(side: usize, step: f64) -> Self {
        Self {
            kind: SpaceKind::Grid {
                side,
                step,
                norm: Norm::L1,
                dim: 1,
            },
            measure: MeasureGen::Uniform,
        }
    }

    pub fn graph(nodes: usize, edges: Vec<WeightedEdge>) -> Self {
        Self {
            kind: SpaceKind::Graph { nodes, edges },
            measure: MeasureGen::Uniform,
        }
    }

    /// Path `0 - 1 - ... - (n-1)` with unit edges.
    pub fn path(n: usize) -> Self {
        Self::graph(n, (1..n).map(|i| WeightedEdge(i - 1, i, 1.0)).collect())
    }

    /// Star with centre `0` and `leaves` unit-length spokes.
    pub fn star(leaves: usize) -> Self {
        Self::graph(
            leaves + 1,
            (1..=leaves).map(|i| WeightedEdge(0, i, 1.0)).collect(),
        )
    }
}

fn is_dyadic(step: f64) -> bool {
    step > 0.0 && step.is_finite() && (0..=30).any(|k| (step * f64::powi(2.0, k)).fract() == 0.0)
}

/// Generates a space from a spec; the result always passes the axiom check.
pub fn build_space(spec: &SpaceGenSpec) -> Result<FiniteMMSpace> {
    let (ids, dist, labels) = match &spec.kind {
        SpaceKind::Grid {
            side,
            step,
            norm,
            dim,
        } => grid(*side, *step, *norm, *dim)?,
        SpaceKind::Graph { nodes, edges } => {
            let dist = shortest_paths(*nodes, edges)?;
            ((0..*nodes).map(|i| i.to_string()).collect(), dist, None)
        }
        SpaceKind::Explicit { dist } => {
            ((0..dist.len()).map(|i| i.to_string()).collect(), dist.clone(), None)
        }
    };
    let n = ids.len();
    let measure = match &spec.measure {
        MeasureGen::Uniform => vec![1.0; n],
        MeasureGen::Weights(w) => {
            if w.len() != n {
                return Err(Error::Spec(format!("{} weights for {n} points", w.len())));
            }
            if let Some(bad) = w.iter().find(|&&x| !(x > 0.0 && x.is_finite())) {
                return Err(Error::Spec(format!("nonpositive reference weight {bad}")));
            }
            w.clone()
        }
    };
    FiniteMMSpace::new(ids, dist, measure, labels, tol::METRIC)
}

type Parts = (Vec<String>, Vec<Vec<f64>>, Option<Vec<Vec<f64>>>);

fn grid(side: usize, step: f64, norm: Norm, dim: usize) -> Result<Parts> {
    if !is_dyadic(step) {
        return Err(Error::Spec(format!("grid step {step} is not dyadic")));
    }
    if side == 0 {
        return Err(Error::Spec("grid side must be positive".into()));
    }
    let (ids, coords): (Vec<String>, Vec<Vec<f64>>) = match dim {
        1 => (0..side)
            .map(|i| (i.to_string(), vec![i as f64 * step]))
            .unzip(),
        2 => (0..side)
            .flat_map(|i| (0..side).map(move |j| (i, j)))
            .map(|(i, j)| (format!("{i}_{j}"), vec![i as f64 * step, j as f64 * step]))
            .unzip(),
        other => return Err(Error::Spec(format!("grid dimension {other} unsupported"))),
    };
    let dist = coords
        .iter()
        .map(|a| coords.iter().map(|b| norm.distance(a, b)).collect())
        .collect();
    Ok((ids, dist, Some(coords)))
}

fn shortest_paths(n: usize, edges: &[WeightedEdge]) -> Result<Vec<Vec<f64>>> {
    let mut d = vec![vec![f64::INFINITY; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0.0;
    }
    for &WeightedEdge(a, b, w) in edges {
        if a >= n || b >= n {
            return Err(Error::Spec(format!("edge ({a}, {b}) outside {n} nodes")));
        }
        if !(w > 0.0 && w.is_finite()) || a == b {
            return Err(Error::Spec(format!("edge ({a}, {b}) has invalid weight {w}")));
        }
        if w < d[a][b] {
            d[a][b] = w;
            d[b][a] = w;
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = d[i][k] + d[k][j];
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    if d.iter().flatten().any(|x| x.is_infinite()) {
        return Err(Error::Spec("graph is disconnected".into()));
    }
    Ok(d)
}
