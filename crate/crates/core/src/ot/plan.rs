use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::ProbMeasure;
use crate::error::{Error, Result};
use crate::mms::FiniteMMSpace;
use crate::tol;

/// A coupling with cached marginals and squared-distance cost.
///
/// Entries are sorted by `(source, target)` and carry positive mass.
#[derive(Debug, Clone)]
pub struct TransportPlan {
    entries: Vec<(usize, usize, f64)>,
    source: ProbMeasure,
    target: ProbMeasure,
    cost: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    source_id: String,
    target_id: String,
    mass: f64,
}

impl TransportPlan {
    /// Builds a plan from raw entries; duplicate pairs are merged and
    /// negligible masses dropped. Marginals are computed from the entries.
    pub fn from_entries(
        space: &FiniteMMSpace,
        entries: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let n = space.len();
        let mut merged: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (i, j, m) in entries {
            if i >= n || j >= n {
                return Err(Error::Structural(format!("pair ({i}, {j}) out of range")));
            }
            if !(m.is_finite() && m >= -tol::MASS) {
                return Err(Error::Structural(format!("invalid mass {m} on ({i}, {j})")));
            }
            *merged.entry((i, j)).or_default() += m;
        }
        let entries: Vec<_> = merged
            .into_iter()
            .filter(|&(_, m)| m > tol::MASS_DROP)
            .map(|((i, j), m)| (i, j, m))
            .collect();
        let mut source = vec![0.0; n];
        let mut target = vec![0.0; n];
        let mut cost = 0.0;
        for &(i, j, m) in &entries {
            source[i] += m;
            target[j] += m;
            cost += m * space.dist2(i, j);
        }
        Ok(Self {
            entries,
            source: ProbMeasure::new(source)?,
            target: ProbMeasure::new(target)?,
            cost,
        })
    }

    /// Like [`from_entries`](Self::from_entries) but also checks the
    /// marginals against prescribed measures.
    pub fn with_marginals(
        space: &FiniteMMSpace,
        source: &ProbMeasure,
        target: &ProbMeasure,
        entries: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let plan = Self::from_entries(space, entries)?;
        let dr = plan.source.max_diff(source);
        let dc = plan.target.max_diff(target);
        if dr > tol::MASS || dc > tol::MASS {
            return Err(Error::Structural(format!(
                "marginal mismatch: rows off by {dr:e}, columns by {dc:e}"
            )));
        }
        Ok(plan)
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn source(&self) -> &ProbMeasure {
        &self.source
    }

    pub fn target(&self) -> &ProbMeasure {
        &self.target
    }

    /// `Σ mass · d²`.
    pub fn cost(&self) -> f64 {
        self.cost
    }

    pub fn mass(&self, i: usize, j: usize) -> f64 {
        self.entries
            .binary_search_by(|&(a, b, _)| (a, b).cmp(&(i, j)))
            .map(|k| self.entries[k].2)
            .unwrap_or(0.0)
    }

    pub fn support_pairs(&self) -> Vec<(usize, usize)> {
        self.entries.iter().map(|&(i, j, _)| (i, j)).collect()
    }

    /// Convex combination `Σ w_k plan_k`.
    pub fn mixture(space: &FiniteMMSpace, parts: &[(&TransportPlan, f64)]) -> Result<Self> {
        Self::from_entries(
            space,
            parts
                .iter()
                .flat_map(|(p, w)| p.entries.iter().map(move |&(i, j, m)| (i, j, m * w))),
        )
    }

    /// Largest entrywise mass difference.
    pub fn max_diff(&self, other: &Self) -> f64 {
        let mut all: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for &(i, j, m) in &self.entries {
            *all.entry((i, j)).or_default() += m;
        }
        for &(i, j, m) in &other.entries {
            *all.entry((i, j)).or_default() -= m;
        }
        all.values().map(|v| v.abs()).fold(0.0, f64::max)
    }

    /// CSV with header `source_id,target_id,mass`.
    pub fn write_csv<W: Write>(&self, space: &FiniteMMSpace, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for &(i, j, mass) in &self.entries {
            w.serialize(CsvRow {
                source_id: space.id(i).to_string(),
                target_id: space.id(j).to_string(),
                mass,
            })?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(space: &FiniteMMSpace, input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let mut entries = Vec::new();
        for row in r.deserialize() {
            let row: CsvRow = row?;
            let lookup = |id: &str| {
                space
                    .index_of(id)
                    .ok_or_else(|| Error::Structural(format!("unknown point id {id:?}")))
            };
            entries.push((lookup(&row.source_id)?, lookup(&row.target_id)?, row.mass));
        }
        Self::from_entries(space, entries)
    }
}

/// Restricts a plan by a per-pair density and renormalizes.
///
/// Returns the subplan together with the kept mass `Σ keep(i, j) · mass`
/// that was divided out (1 when everything is kept).
pub fn restrict_plan(
    space: &FiniteMMSpace,
    plan: &TransportPlan,
    keep: impl Fn(usize, usize) -> f64,
) -> Result<(TransportPlan, f64)> {
    let weighted: Vec<_> = plan
        .entries
        .iter()
        .map(|&(i, j, m)| {
            let f = keep(i, j);
            if !(f.is_finite() && f >= 0.0) {
                return Err(Error::Precondition(format!("invalid density {f} on ({i}, {j})")));
            }
            Ok((i, j, f * m))
        })
        .collect::<Result<_>>()?;
    let kept: f64 = weighted.iter().map(|e| e.2).sum();
    if kept <= tol::MASS_DROP {
        return Err(Error::EmptyRestriction);
    }
    let sub = TransportPlan::from_entries(
        space,
        weighted.into_iter().map(|(i, j, m)| (i, j, m / kept)),
    )?;
    Ok((sub, kept))
}
