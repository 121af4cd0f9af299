use std::collections::HashMap;
use std::rc::Rc;

use super::FiniteMMSpace;
use crate::error::{Error, Result};
use crate::grid::grid_index;

/// A constant-speed curve `p_0, ..., p_T` sampled on the grid `k / T`.
///
/// Equality, ordering and hashing use the point sequence only.
#[derive(Debug, Clone)]
pub struct DiscreteGeodesic {
    steps: Vec<usize>,
    length: f64,
}

impl PartialEq for DiscreteGeodesic {
    fn eq(&self, other: &Self) -> bool {
        self.steps == other.steps
    }
}

impl Eq for DiscreteGeodesic {}

impl PartialOrd for DiscreteGeodesic {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for DiscreteGeodesic {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.steps.cmp(&other.steps)
    }
}

impl std::hash::Hash for DiscreteGeodesic {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.steps.hash(state);
    }
}

impl DiscreteGeodesic {
    /// Validates the constant-speed invariant
    /// `|d(p_i, p_j) - |i - j| / T * d(p_0, p_T)| <= tol` over all pairs.
    pub fn new(space: &FiniteMMSpace, steps: Vec<usize>, tol: f64) -> Result<Self> {
        if steps.len() < 2 {
            return Err(Error::NotGeodesic("needs at least two grid points".into()));
        }
        if let Some(&p) = steps.iter().find(|&&p| p >= space.len()) {
            return Err(Error::Structural(format!("point index {p} out of range")));
        }
        let g = Self {
            length: space.dist(steps[0], *steps.last().unwrap()),
            steps,
        };
        let defect = g.speed_defect(space);
        if defect > tol {
            return Err(Error::NotGeodesic(format!(
                "{:?} has speed defect {defect:e}",
                g.steps
                    .iter()
                    .map(|&p| space.id(p))
                    .collect::<Vec<_>>()
            )));
        }
        Ok(g)
    }

    pub(crate) fn from_parts(steps: Vec<usize>, length: f64) -> Self {
        debug_assert!(steps.len() >= 2);
        Self { steps, length }
    }

    /// Time resolution `T`.
    pub fn resolution(&self) -> usize {
        self.steps.len() - 1
    }

    pub fn steps(&self) -> &[usize] {
        &self.steps
    }

    pub fn at(&self, k: usize) -> usize {
        self.steps[k]
    }

    pub fn start(&self) -> usize {
        self.steps[0]
    }

    pub fn end(&self) -> usize {
        *self.steps.last().unwrap()
    }

    /// `l(γ) = d(γ_0, γ_1)`.
    pub fn length(&self) -> f64 {
        self.length
    }

    /// Largest deviation from constant speed over all index pairs.
    pub fn speed_defect(&self, space: &FiniteMMSpace) -> f64 {
        let t = self.resolution() as f64;
        let len = space.dist(self.start(), self.end());
        let mut worst: f64 = 0.0;
        for i in 0..self.steps.len() {
            for j in i + 1..self.steps.len() {
                let expected = (j - i) as f64 / t * len;
                worst = worst.max((space.dist(self.steps[i], self.steps[j]) - expected).abs());
            }
        }
        worst
    }

    /// Index-based restriction to `[a/T, b/T]`, reparametrized at resolution `b - a`.
    pub fn restrict_indices(&self, a: usize, b: usize) -> Result<Self> {
        let t = self.resolution();
        if a >= b || b > t {
            return Err(Error::Precondition(format!(
                "restriction needs 0 <= s < t <= 1, got indices {a}, {b} of {t}"
            )));
        }
        Ok(Self {
            steps: self.steps[a..=b].to_vec(),
            length: (b - a) as f64 / t as f64 * self.length,
        })
    }

    /// Time inverse `t -> γ_{1-t}`.
    pub fn reversed(&self) -> Self {
        let mut steps = self.steps.clone();
        steps.reverse();
        Self {
            steps,
            length: self.length,
        }
    }

    /// Last grid index `k` with `γ_i = other_i` for all `i <= k`, or `None`
    /// when the starting points differ. Both must share the resolution.
    pub fn common_prefix(&self, other: &Self) -> Option<usize> {
        self.steps
            .iter()
            .zip(&other.steps)
            .take_while(|(a, b)| a == b)
            .count()
            .checked_sub(1)
    }

    pub fn ids<'a>(&self, space: &'a FiniteMMSpace) -> Vec<&'a str> {
        self.steps.iter().map(|&p| space.id(p)).collect()
    }
}

/// `res_s^t`: restriction to `[s, t]`, reparametrized to `[0, 1]`.
pub fn restrict_geodesic(geodesic: &DiscreteGeodesic, s: f64, t: f64) -> Result<DiscreteGeodesic> {
    let steps = geodesic.resolution();
    let a = grid_index(s, steps)?;
    let b = grid_index(t, steps)?;
    geodesic.restrict_indices(a, b)
}

/// All `T`-step constant-speed geodesics from `x` to `y`, in lexicographic
/// order of their point-index sequences.
///
/// Candidates at grid step `k` are the points at distance `k L / T` from `x`
/// and `(T - k) L / T` from `y`; consecutive points must be `L / T` apart.
/// Suffixes are memoized per `(point, step)`. An empty result means the pair
/// is not `T`-geodesic in this space.
pub fn enumerate_geodesics(
    space: &FiniteMMSpace,
    x: usize,
    y: usize,
    steps: usize,
    tol: f64,
) -> Result<Vec<DiscreteGeodesic>> {
    if steps == 0 {
        return Err(Error::Precondition("geodesic resolution must be >= 1".into()));
    }
    if x >= space.len() || y >= space.len() {
        return Err(Error::Structural("endpoint index out of range".into()));
    }
    let len = space.dist(x, y);
    let h = len / steps as f64;
    let layers: Vec<Vec<usize>> = (0..=steps)
        .map(|k| {
            (0..space.len())
                .filter(|&q| {
                    (space.dist(x, q) - k as f64 * h).abs() <= tol
                        && (space.dist(q, y) - (steps - k) as f64 * h).abs() <= tol
                })
                .collect()
        })
        .collect();
    if !layers[0].contains(&x) || !layers[steps].contains(&y) {
        return Ok(Vec::new());
    }

    struct Search<'a> {
        space: &'a FiniteMMSpace,
        layers: &'a [Vec<usize>],
        h: f64,
        tol: f64,
        memo: HashMap<(usize, usize), Rc<Vec<Vec<usize>>>>,
    }

    impl Search<'_> {
        // Suffixes p_k = p, ..., p_T (reversed, so pushing is cheap).
        fn suffixes(&mut self, p: usize, k: usize) -> Rc<Vec<Vec<usize>>> {
            if let Some(hit) = self.memo.get(&(p, k)) {
                return hit.clone();
            }
            let last = self.layers.len() - 1;
            let out = if k == last {
                vec![vec![p]]
            } else {
                let mut out = Vec::new();
                for &q in &self.layers[k + 1] {
                    if (self.space.dist(p, q) - self.h).abs() > self.tol {
                        continue;
                    }
                    for tail in self.suffixes(q, k + 1).iter() {
                        let mut seq = tail.clone();
                        seq.push(p);
                        out.push(seq);
                    }
                }
                out
            };
            let out = Rc::new(out);
            self.memo.insert((p, k), out.clone());
            out
        }
    }

    let mut search = Search {
        space,
        layers: &layers,
        h,
        tol,
        memo: HashMap::new(),
    };
    let found = search.suffixes(x, 0);
    let mut geodesics: Vec<DiscreteGeodesic> = found
        .iter()
        .map(|rev| {
            let mut seq = rev.clone();
            seq.reverse();
            DiscreteGeodesic::from_parts(seq, len)
        })
        .filter(|g| g.speed_defect(space) <= tol)
        .collect();
    geodesics.sort();
    Ok(geodesics)
}
