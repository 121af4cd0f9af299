//! JSON file formats for spaces, measures and geodesic plans.
//!
//! Points are referenced by their string ids everywhere.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geoplan::GeodesicPlan;
use crate::mms::{build_space, DiscreteGeodesic, FiniteMMSpace, Norm, SpaceGenSpec};
use crate::ot::ProbMeasure;
use crate::tol;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointEntry {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeEntry {
    pub a: String,
    pub b: String,
    pub w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MetricEntry {
    /// Full distance matrix in point order.
    Matrix { dist: Vec<Vec<f64>> },
    /// Shortest-path metric over id-labelled edges.
    Graph { edges: Vec<EdgeEntry> },
    /// Norm distance between point labels.
    Norm { norm: Norm },
}

/// `{points: [{id, label?}], metric: {kind, ...}, measure: [w]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceFile {
    pub points: Vec<PointEntry>,
    pub metric: MetricEntry,
    /// Reference weights; counting measure when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure: Option<Vec<f64>>,
}

impl SpaceFile {
    pub fn from_space(space: &FiniteMMSpace) -> Self {
        Self {
            points: (0..space.len())
                .map(|i| PointEntry {
                    id: space.id(i).to_string(),
                    label: space.label(i).map(<[f64]>::to_vec),
                })
                .collect(),
            metric: MetricEntry::Matrix {
                dist: space.distance_rows(),
            },
            measure: Some(space.measure().to_vec()),
        }
    }

    pub fn to_space(&self) -> Result<FiniteMMSpace> {
        let n = self.points.len();
        let ids: Vec<String> = self.points.iter().map(|p| p.id.clone()).collect();
        let labels: Option<Vec<Vec<f64>>> = self.points.iter().map(|p| p.label.clone()).collect();
        let dist = match &self.metric {
            MetricEntry::Matrix { dist } => dist.clone(),
            MetricEntry::Graph { edges } => {
                let pos: BTreeMap<&str, usize> =
                    ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
                let lookup = |id: &str| {
                    pos.get(id)
                        .copied()
                        .ok_or_else(|| Error::Spec(format!("edge names unknown point {id:?}")))
                };
                let edges = edges
                    .iter()
                    .map(|e| Ok(crate::mms::WeightedEdge(lookup(&e.a)?, lookup(&e.b)?, e.w)))
                    .collect::<Result<Vec<_>>>()?;
                build_space(&SpaceGenSpec::graph(n, edges))?.distance_rows()
            }
            MetricEntry::Norm { norm } => {
                let labels = labels
                    .as_ref()
                    .ok_or_else(|| Error::Spec("norm metric needs a label on every point".into()))?;
                labels
                    .iter()
                    .map(|a| labels.iter().map(|b| norm.distance(a, b)).collect())
                    .collect()
            }
        };
        let measure = self.measure.clone().unwrap_or_else(|| vec![1.0; n]);
        FiniteMMSpace::new(ids, dist, measure, labels, tol::METRIC)
    }
}

/// A space given either explicitly or by a generator spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SpaceSource {
    File(SpaceFile),
    Generated(SpaceGenSpec),
}

impl SpaceSource {
    pub fn build(&self) -> Result<FiniteMMSpace> {
        match self {
            SpaceSource::File(f) => f.to_space(),
            SpaceSource::Generated(g) => build_space(g),
        }
    }
}

/// A probability measure named through point ids.
///
/// `{"uniform": [ids]}`, `{"dirac": id}` or `{"weights": {id: w}}`; weights
/// are normalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureSpec {
    Uniform(Vec<String>),
    Dirac(String),
    Weights(BTreeMap<String, f64>),
}

impl MeasureSpec {
    pub fn resolve(&self, space: &FiniteMMSpace) -> Result<ProbMeasure> {
        let lookup = |id: &str| {
            space
                .index_of(id)
                .ok_or_else(|| Error::Structural(format!("unknown point id {id:?}")))
        };
        match self {
            MeasureSpec::Uniform(ids) => {
                let support = ids.iter().map(|id| lookup(id)).collect::<Result<Vec<_>>>()?;
                ProbMeasure::uniform_on(space.len(), &support)
            }
            MeasureSpec::Dirac(id) => Ok(ProbMeasure::dirac(space.len(), lookup(id)?)),
            MeasureSpec::Weights(w) => {
                let mut weights = vec![0.0; space.len()];
                for (id, &x) in w {
                    weights[lookup(id)?] += x;
                }
                ProbMeasure::normalized(weights)
            }
        }
    }

    /// Weights keyed by id for the support of `mu`.
    pub fn from_measure(space: &FiniteMMSpace, mu: &ProbMeasure) -> Self {
        MeasureSpec::Weights(
            mu.support()
                .into_iter()
                .map(|i| (space.id(i).to_string(), mu.mass(i)))
                .collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomEntry {
    pub steps: Vec<String>,
    pub mass: f64,
}

/// `{T, atoms: [{steps: [ids], mass}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeodesicPlanFile {
    #[serde(rename = "T")]
    pub steps: usize,
    pub atoms: Vec<AtomEntry>,
}

impl GeodesicPlanFile {
    pub fn from_plan(space: &FiniteMMSpace, plan: &GeodesicPlan) -> Self {
        Self {
            steps: plan.resolution(),
            atoms: plan
                .atoms()
                .iter()
                .map(|(g, m)| AtomEntry {
                    steps: g.ids(space).into_iter().map(String::from).collect(),
                    mass: *m,
                })
                .collect(),
        }
    }

    /// Rebuilds the plan, re-validating every atom as a geodesic.
    pub fn to_plan(&self, space: &FiniteMMSpace, tol: f64) -> Result<GeodesicPlan> {
        let atoms = self
            .atoms
            .iter()
            .map(|a| {
                if a.steps.len() != self.steps + 1 {
                    return Err(Error::Structural(format!(
                        "atom has {} points, expected {}",
                        a.steps.len(),
                        self.steps + 1
                    )));
                }
                let seq = a
                    .steps
                    .iter()
                    .map(|id| {
                        space
                            .index_of(id)
                            .ok_or_else(|| Error::Structural(format!("unknown point id {id:?}")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok((DiscreteGeodesic::new(space, seq, tol)?, a.mass))
            })
            .collect::<Result<Vec<_>>>()?;
        GeodesicPlan::from_atoms(space, atoms)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geoplan::{lift_plan, LiftStrategy};
    use crate::ot::TransportPlan;

    #[test]
    fn space_round_trip() {
        let s = build_space(&SpaceGenSpec::grid(3, 0.5, Norm::Inf)).unwrap();
        let file = SpaceFile::from_space(&s);
        let json = serde_json::to_string(&file).unwrap();
        let back: SpaceSource = serde_json::from_str(&json).unwrap();
        let t = back.build().unwrap();
        assert_eq!(t.ids(), s.ids());
        assert_eq!(t.distance_rows(), s.distance_rows());
    }

    #[test]
    fn graph_and_norm_metrics() {
        let json = r#"{"points":[{"id":"a"},{"id":"b"},{"id":"c"}],
            "metric":{"kind":"graph","edges":[{"a":"a","b":"b","w":1},{"a":"b","b":"c","w":2}]}}"#;
        let s: SpaceSource = serde_json::from_str(json).unwrap();
        let s = s.build().unwrap();
        assert_eq!(s.dist(0, 2), 3.0);
        assert_eq!(s.measure(), &[1.0, 1.0, 1.0]);

        let json = r#"{"points":[{"id":"p","label":[0,0]},{"id":"q","label":[1,2]}],
            "metric":{"kind":"norm","norm":"inf"},"measure":[1,2]}"#;
        let s: SpaceSource = serde_json::from_str(json).unwrap();
        assert_eq!(s.build().unwrap().dist(0, 1), 2.0);

        let gen: SpaceSource = serde_json::from_str(r#"{"kind":"graph","nodes":2,"edges":[[0,1,1.0]]}"#).unwrap();
        assert!(matches!(gen, SpaceSource::Generated(_)));
    }

    #[test]
    fn measure_specs() {
        let s = build_space(&SpaceGenSpec::path(3)).unwrap();
        let u: MeasureSpec = serde_json::from_str(r#"{"uniform":["0","2"]}"#).unwrap();
        assert_eq!(u.resolve(&s).unwrap().weights(), &[0.5, 0.0, 0.5]);
        let w: MeasureSpec = serde_json::from_str(r#"{"weights":{"1":3,"2":1}}"#).unwrap();
        assert_eq!(w.resolve(&s).unwrap().weights(), &[0.0, 0.75, 0.25]);
        let bad: MeasureSpec = serde_json::from_str(r#"{"dirac":"9"}"#).unwrap();
        assert!(bad.resolve(&s).is_err());
    }

    #[test]
    fn geodesic_plan_round_trip() {
        let s = build_space(&SpaceGenSpec::grid(3, 0.5, Norm::Inf)).unwrap();
        let plan = TransportPlan::from_entries(&s, [(0, 6, 1.0)]).unwrap();
        let g = lift_plan(&s, &plan, 2, LiftStrategy::Uniform).unwrap();
        let file = GeodesicPlanFile::from_plan(&s, &g);
        let json = serde_json::to_string(&file).unwrap();
        assert!(json.starts_with(r#"{"T":2,"atoms":[{"steps":["0_0","#));
        let back: GeodesicPlanFile = serde_json::from_str(&json).unwrap();
        assert_eq!(back.to_plan(&s, 1e-9).unwrap(), g);
        let mut broken = back.clone();
        broken.atoms[0].steps[1] = "0_0".into();
        assert!(broken.to_plan(&s, 1e-9).is_err());
    }
}
