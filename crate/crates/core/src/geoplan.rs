//! Probability measures on discrete geodesics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{grid_index, grid_time};
use crate::mms::{enumerate_geodesics, DiscreteGeodesic, FiniteMMSpace};
use crate::ot::{solve_w2, ProbMeasure, TransportPlan};
use crate::tol;

/// How a coupling atom's mass is spread over the geodesics joining its pair.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LiftStrategy {
    #[default]
    Uniform,
    LexMin,
}

impl std::str::FromStr for LiftStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Self::Uniform),
            "lex_min" | "lex-min" => Ok(Self::LexMin),
            other => Err(Error::Structural(format!("unknown lift strategy {other:?}"))),
        }
    }
}

/// A finite measure on `T`-step geodesics.
///
/// Atoms are kept sorted by point sequence with identical geodesics merged,
/// so two plans with the same atoms compare equal.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicPlan {
    steps: usize,
    points: usize,
    atoms: Vec<(DiscreteGeodesic, f64)>,
    source: ProbMeasure,
    target: ProbMeasure,
}

/// Outcome of the Wasserstein-geodesic check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeodesicCheck {
    pub pass: bool,
    /// Largest `|W2(μ_s, μ_t) - |t - s| W2(μ_0, μ_1)|` over grid pairs.
    pub worst_slack: f64,
    pub worst_pair: (f64, f64),
}

impl GeodesicPlan {
    /// Builds a plan from weighted geodesics on `space`.
    ///
    /// Masses must be nonnegative and sum to 1 within `1e-12`; negligible
    /// atoms are dropped and duplicates merged.
    pub fn from_atoms(
        space: &FiniteMMSpace,
        atoms: impl IntoIterator<Item = (DiscreteGeodesic, f64)>,
    ) -> Result<Self> {
        let mut merged: BTreeMap<DiscreteGeodesic, f64> = BTreeMap::new();
        let mut steps = None;
        for (g, m) in atoms {
            if !(m.is_finite() && m >= -tol::MASS) {
                return Err(Error::Structural(format!("invalid atom mass {m}")));
            }
            if g.steps().iter().any(|&p| p >= space.len()) {
                return Err(Error::Structural("geodesic leaves the space".into()));
            }
            match steps {
                None => steps = Some(g.resolution()),
                Some(t) if t != g.resolution() => {
                    return Err(Error::Structural(format!(
                        "mixed resolutions {t} and {}",
                        g.resolution()
                    )))
                }
                _ => {}
            }
            *merged.entry(g).or_default() += m;
        }
        let steps = steps.ok_or_else(|| Error::Structural("geodesic plan has no atoms".into()))?;
        let atoms: Vec<_> = merged.into_iter().filter(|a| a.1 > tol::MASS_DROP).collect();
        let n = space.len();
        let mut source = vec![0.0; n];
        let mut target = vec![0.0; n];
        for (g, m) in &atoms {
            source[g.start()] += m;
            target[g.end()] += m;
        }
        Ok(Self {
            steps,
            points: n,
            atoms,
            source: ProbMeasure::new(source)?,
            target: ProbMeasure::new(target)?,
        })
    }

    /// Time resolution `T` shared by all atoms.
    pub fn resolution(&self) -> usize {
        self.steps
    }

    pub fn atoms(&self) -> &[(DiscreteGeodesic, f64)] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// `(e_0)_# π`.
    pub fn source(&self) -> &ProbMeasure {
        &self.source
    }

    /// `(e_1)_# π`.
    pub fn target(&self) -> &ProbMeasure {
        &self.target
    }

    /// `(e_{k/T})_# π`.
    pub fn evaluate_index(&self, k: usize) -> ProbMeasure {
        if k == 0 {
            return self.source.clone();
        }
        if k == self.steps {
            return self.target.clone();
        }
        let mut w = vec![0.0; self.points];
        for (g, m) in &self.atoms {
            w[g.at(k)] += m;
        }
        ProbMeasure::new(w).expect("evaluation preserves mass")
    }

    /// `(e_t)_# π` for a grid time `t`.
    pub fn evaluate_at(&self, t: f64) -> Result<ProbMeasure> {
        Ok(self.evaluate_index(grid_index(t, self.steps)?))
    }

    /// The coupling `(e_0, e_1)_# π`.
    pub fn endpoint_plan(&self, space: &FiniteMMSpace) -> Result<TransportPlan> {
        TransportPlan::from_entries(space, self.atoms.iter().map(|(g, m)| (g.start(), g.end(), *m)))
    }

    /// `(res_{a/T}^{b/T})_# π`, at resolution `b - a`.
    pub fn restrict_indices(&self, a: usize, b: usize) -> Result<Self> {
        let atoms = self
            .atoms
            .iter()
            .map(|(g, m)| Ok((g.restrict_indices(a, b)?, *m)))
            .collect::<Result<Vec<_>>>()?;
        self.rebuilt(atoms)
    }

    /// `(res_s^t)_# π` for grid times `s < t`.
    pub fn restrict_time(&self, s: f64, t: f64) -> Result<Self> {
        self.restrict_indices(grid_index(s, self.steps)?, grid_index(t, self.steps)?)
    }

    /// Renormalized `f · π` for per-atom factors `f`, aligned with [`atoms`](Self::atoms).
    pub fn reweight(&self, factors: &[f64]) -> Result<Self> {
        if factors.len() != self.atoms.len() {
            return Err(Error::Structural(format!(
                "{} factors for {} atoms",
                factors.len(),
                self.atoms.len()
            )));
        }
        if let Some(f) = factors.iter().find(|f| !(f.is_finite() && **f >= 0.0)) {
            return Err(Error::Precondition(format!("invalid reweighting factor {f}")));
        }
        let total: f64 = self.atoms.iter().zip(factors).map(|((_, m), f)| m * f).sum();
        if total <= tol::MASS_DROP {
            return Err(Error::EmptyRestriction);
        }
        let atoms = self
            .atoms
            .iter()
            .zip(factors)
            .map(|((g, m), f)| (g.clone(), m * f / total))
            .collect();
        self.rebuilt(atoms)
    }

    /// Pushforward under `γ -> (t -> γ_{1-t})`.
    pub fn time_reverse(&self) -> Self {
        let atoms = self.atoms.iter().map(|(g, m)| (g.reversed(), *m)).collect();
        self.rebuilt(atoms).expect("reversal preserves mass")
    }

    /// Convex combination `Σ w_k π_k`; weights must sum to 1.
    pub fn mixture(space: &FiniteMMSpace, parts: &[(&GeodesicPlan, f64)]) -> Result<Self> {
        Self::from_atoms(
            space,
            parts
                .iter()
                .flat_map(|(p, w)| p.atoms.iter().map(move |(g, m)| (g.clone(), m * w))),
        )
    }

    fn rebuilt(&self, atoms: Vec<(DiscreteGeodesic, f64)>) -> Result<Self> {
        let mut merged: BTreeMap<DiscreteGeodesic, f64> = BTreeMap::new();
        for (g, m) in atoms {
            *merged.entry(g).or_default() += m;
        }
        let atoms: Vec<_> = merged.into_iter().filter(|a| a.1 > tol::MASS_DROP).collect();
        let steps = atoms
            .first()
            .map(|a| a.0.resolution())
            .ok_or(Error::EmptyRestriction)?;
        let mut source = vec![0.0; self.points];
        let mut target = vec![0.0; self.points];
        for (g, m) in &atoms {
            source[g.start()] += m;
            target[g.end()] += m;
        }
        Ok(Self {
            steps,
            points: self.points,
            atoms,
            source: ProbMeasure::new(source)?,
            target: ProbMeasure::new(target)?,
        })
    }

    /// Checks `|W2(μ_s, μ_t) - |t - s| W2(μ_0, μ_1)| <= tol` on all grid pairs.
    pub fn is_wasserstein_geodesic(&self, space: &FiniteMMSpace, tol: f64) -> Result<GeodesicCheck> {
        let marginals: Vec<ProbMeasure> = (0..=self.steps).map(|k| self.evaluate_index(k)).collect();
        let total = solve_w2(space, &marginals[0], &marginals[self.steps])?.w2();
        let mut worst = (0.0, (0.0, 1.0));
        for a in 0..=self.steps {
            for b in a + 1..=self.steps {
                if (a, b) == (0, self.steps) {
                    continue;
                }
                let w = solve_w2(space, &marginals[a], &marginals[b])?.w2();
                let slack = (w - (b - a) as f64 / self.steps as f64 * total).abs();
                if slack > worst.0 {
                    worst = (slack, (grid_time(a, self.steps), grid_time(b, self.steps)));
                }
            }
        }
        Ok(GeodesicCheck {
            pass: worst.0 <= tol,
            worst_slack: worst.0,
            worst_pair: worst.1,
        })
    }
}

/// Lifts a coupling to geodesics at resolution `steps`.
///
/// Every support pair must be joined by at least one `steps`-step geodesic.
pub fn lift_plan(
    space: &FiniteMMSpace,
    plan: &TransportPlan,
    steps: usize,
    strategy: LiftStrategy,
) -> Result<GeodesicPlan> {
    let mut atoms = Vec::new();
    for &(i, j, m) in plan.entries() {
        let found = enumerate_geodesics(space, i, j, steps, tol::GEO)?;
        if found.is_empty() {
            return Err(Error::NoGeodesic {
                from: space.id(i).to_string(),
                to: space.id(j).to_string(),
                steps,
            });
        }
        match strategy {
            LiftStrategy::LexMin => atoms.push((found[0].clone(), m)),
            LiftStrategy::Uniform => {
                let share = m / found.len() as f64;
                atoms.extend(found.into_iter().map(|g| (g, share)));
            }
        }
    }
    GeodesicPlan::from_atoms(space, atoms)
}
