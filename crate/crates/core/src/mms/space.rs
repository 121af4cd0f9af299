use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Error, Result};

/// A finite metric space with a positive reference measure.
///
/// Points are addressed by index `0..n`; `ids` carry the opaque external
/// names used in files. Distances are stored row-major.
#[derive(Debug, Clone)]
pub struct FiniteMMSpace {
    ids: Vec<String>,
    index: HashMap<String, usize>,
    dist: Vec<f64>,
    measure: Vec<f64>,
    labels: Option<Vec<Vec<f64>>>,
}

/// One violated axiom, with the witnessing indices.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MetricViolation {
    Diagonal { i: usize, value: f64 },
    Asymmetric { i: usize, j: usize, dij: f64, dji: f64 },
    NotPositive { i: usize, j: usize, value: f64 },
    /// `d(i, k) > d(i, j) + d(j, k)`.
    Triangle { i: usize, j: usize, k: usize, excess: f64 },
    Weight { i: usize, value: f64 },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MetricReport {
    pub violations: Vec<MetricViolation>,
}

impl MetricReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks the metric axioms and measure positivity on raw data.
pub fn check_metric(dist: &[Vec<f64>], measure: &[f64], tol: f64) -> Result<MetricReport> {
    let n = dist.len();
    if let Some((row, r)) = dist.iter().enumerate().find(|(_, r)| r.len() != n) {
        return Err(Error::Structural(format!(
            "distance row {row} has {} entries, expected {n}",
            r.len()
        )));
    }
    if measure.len() != n {
        return Err(Error::Structural(format!(
            "measure has {} weights for {n} points",
            measure.len()
        )));
    }
    let d = |i: usize, j: usize| dist[i][j];
    let mut violations = Vec::new();
    for i in 0..n {
        if d(i, i).abs() > tol || !d(i, i).is_finite() {
            violations.push(MetricViolation::Diagonal { i, value: d(i, i) });
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            if (d(i, j) - d(j, i)).abs() > tol || d(i, j).is_nan() || d(j, i).is_nan() {
                violations.push(MetricViolation::Asymmetric {
                    i,
                    j,
                    dij: d(i, j),
                    dji: d(j, i),
                });
            }
            if !(d(i, j) > 0.0 && d(i, j).is_finite()) {
                violations.push(MetricViolation::NotPositive { i, j, value: d(i, j) });
            }
        }
    }
    for i in 0..n {
        for k in i + 1..n {
            for j in 0..n {
                if j == i || j == k {
                    continue;
                }
                let excess = d(i, k) - d(i, j) - d(j, k);
                if excess > tol {
                    violations.push(MetricViolation::Triangle { i, j, k, excess });
                }
            }
        }
    }
    for (i, &w) in measure.iter().enumerate() {
        if !(w > 0.0 && w.is_finite()) {
            violations.push(MetricViolation::Weight { i, value: w });
        }
    }
    Ok(MetricReport { violations })
}

impl FiniteMMSpace {
    /// Builds a space after checking dimensions, id uniqueness and all axioms.
    pub fn new(
        ids: Vec<String>,
        dist: Vec<Vec<f64>>,
        measure: Vec<f64>,
        labels: Option<Vec<Vec<f64>>>,
        tol: f64,
    ) -> Result<Self> {
        let n = ids.len();
        if dist.len() != n {
            return Err(Error::Structural(format!(
                "{} distance rows for {n} points",
                dist.len()
            )));
        }
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(Error::Structural(format!("{} labels for {n} points", l.len())));
            }
        }
        let report = check_metric(&dist, &measure, tol)?;
        if let Some(v) = report.violations.first() {
            return Err(Error::Metric(format!(
                "{} violation(s), first: {v:?}",
                report.violations.len()
            )));
        }
        let mut index = HashMap::with_capacity(n);
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(Error::Structural(format!("duplicate point id {id:?}")));
            }
        }
        Ok(Self {
            ids,
            index,
            dist: dist.into_iter().flatten().collect(),
            measure,
            labels,
        })
    }

    /// Counting-measure space with ids `0..n`.
    pub fn from_matrix(dist: Vec<Vec<f64>>) -> Result<Self> {
        let n = dist.len();
        Self::new(
            (0..n).map(|i| i.to_string()).collect(),
            dist,
            vec![1.0; n],
            None,
            crate::tol::METRIC,
        )
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    #[inline]
    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.ids.len() + j]
    }

    #[inline]
    pub fn dist2(&self, i: usize, j: usize) -> f64 {
        let d = self.dist(i, j);
        d * d
    }

    pub fn measure(&self) -> &[f64] {
        &self.measure
    }

    pub fn id(&self, i: usize) -> &str {
        &self.ids[i]
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn labels(&self) -> Option<&[Vec<f64>]> {
        self.labels.as_deref()
    }

    pub fn label(&self, i: usize) -> Option<&[f64]> {
        self.labels.as_ref().map(|l| l[i].as_slice())
    }

    pub fn distance_rows(&self) -> Vec<Vec<f64>> {
        self.dist.chunks(self.len()).map(<[f64]>::to_vec).collect()
    }

    /// Re-runs the axiom check on the stored data.
    pub fn check(&self, tol: f64) -> MetricReport {
        check_metric(&self.distance_rows(), &self.measure, tol).expect("dimensions are valid")
    }

    /// The same space with points reordered: point `i` of the result is
    /// point `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.len();
        if perm.len() != n {
            return Err(Error::Structural("permutation length mismatch".into()));
        }
        let dist = (0..n)
            .map(|i| (0..n).map(|j| self.dist(perm[i], perm[j])).collect())
            .collect();
        Self::new(
            perm.iter().map(|&p| self.ids[p].clone()).collect(),
            dist,
            perm.iter().map(|&p| self.measure[p]).collect(),
            self.labels
                .as_ref()
                .map(|l| perm.iter().map(|&p| l[p].clone()).collect()),
            f64::INFINITY,
        )
    }
}
