use serde::Serialize;

use crate::error::{Error, Result};
use crate::tol;

/// Probability weights on the points of a space.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbMeasure {
    weights: Vec<f64>,
}

impl ProbMeasure {
    /// Weights must be finite, nonnegative and sum to 1 within `1e-12`.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::Structural(format!("invalid probability weight {w}")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > tol::MASS {
            return Err(Error::Structural(format!("weights sum to {total}, not 1")));
        }
        Ok(Self { weights })
    }

    /// Divides by the total; fails when nothing is left.
    pub fn normalized(weights: Vec<f64>) -> Result<Self> {
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::Structural(format!("invalid weight {w}")));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::EmptyRestriction);
        }
        Ok(Self {
            weights: weights.into_iter().map(|w| w / total).collect(),
        })
    }

    pub fn dirac(n: usize, at: usize) -> Self {
        let mut weights = vec![0.0; n];
        weights[at] = 1.0;
        Self { weights }
    }

    pub fn uniform_on(n: usize, support: &[usize]) -> Result<Self> {
        let mut weights = vec![0.0; n];
        for &i in support {
            if i >= n {
                return Err(Error::Structural(format!("support point {i} out of range")));
            }
            weights[i] += 1.0;
        }
        Self::normalized(weights)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mass(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.weights.len())
            .filter(|&i| self.weights[i] > 0.0)
            .collect()
    }

    pub fn is_singular_to(&self, other: &Self) -> bool {
        self.weights
            .iter()
            .zip(&other.weights)
            .all(|(a, b)| *a == 0.0 || *b == 0.0)
    }

    /// Largest absolute weight difference.
    pub fn max_diff(&self, other: &Self) -> f64 {
        self.weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}
