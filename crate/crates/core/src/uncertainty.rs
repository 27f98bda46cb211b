//! Uncertainty sets over transition models.
//!
//! A [`ModelFamily`] maps parameter vectors to MDPs that share everything but
//! their transition (and optionally reward) tensors. A [`DiscreteUncertaintySet`]
//! is a finite ordered list of such models, and [`RectangularClosure`] is the
//! per-`(s, a)` product of its rows, kept implicit.

use std::fmt;
use std::sync::Arc;

use crate::error::{usage, Error, Result};
use crate::mdp::TabularMdp;

/// Pure map from a parameter vector to an MDP.
pub type Generator = Arc<dyn Fn(&[f64]) -> Result<TabularMdp> + Send + Sync>;

/// Axis-aligned parameter box with inclusive bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl ParamBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(usage(format!(
                "box bounds must be non-empty and equal length, got {} and {}",
                lower.len(),
                upper.len()
            )));
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !lo.is_finite() || !hi.is_finite() || lo > hi {
                return Err(usage(format!("invalid bounds [{lo}, {hi}] on axis {i}")));
            }
        }
        Ok(ParamBox { lower, upper })
    }

    pub fn dimension(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dimension()
            && p.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(x, (lo, hi))| lo <= x && x <= hi)
    }

    pub fn midpoint(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| lo + 0.5 * (hi - lo))
            .collect()
    }

    /// Maps a point of the unit cube onto the box, clamping the result so
    /// rounding never leaves the box.
    pub fn denormalize(&self, unit: &[f64]) -> Vec<f64> {
        unit.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(u, (lo, hi))| (lo + u * (hi - lo)).clamp(*lo, *hi))
            .collect()
    }

    /// Inverse of [`ParamBox::denormalize`]; degenerate axes map to 0.5.
    pub fn normalize(&self, p: &[f64]) -> Vec<f64> {
        p.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(x, (lo, hi))| if hi > lo { (x - lo) / (hi - lo) } else { 0.5 })
            .collect()
    }
}

/// Parameter domain of a family.
#[derive(Debug, Clone, PartialEq)]
pub enum FamilyDomain {
    /// Ordered list of admissible parameter vectors.
    Discrete(Vec<Vec<f64>>),
    /// Every point of the box is admissible.
    Continuous(ParamBox),
}

/// A parameterized uncertainty set.
#[derive(Clone)]
pub struct ModelFamily {
    name: String,
    domain: FamilyDomain,
    generator: Generator,
}

impl fmt::Debug for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelFamily")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .finish_non_exhaustive()
    }
}

impl ModelFamily {
    pub fn discrete(
        name: impl Into<String>,
        parameters: Vec<Vec<f64>>,
        generator: Generator,
    ) -> Result<Self> {
        let dim = parameters.first().map(Vec::len).unwrap_or(0);
        if dim == 0 || parameters.iter().any(|p| p.len() != dim) {
            return Err(usage(
                "discrete family needs a non-empty list of equal-length parameters",
            ));
        }
        Ok(ModelFamily {
            name: name.into(),
            domain: FamilyDomain::Discrete(parameters),
            generator,
        })
    }

    pub fn continuous(name: impl Into<String>, bounds: ParamBox, generator: Generator) -> Self {
        ModelFamily {
            name: name.into(),
            domain: FamilyDomain::Continuous(bounds),
            generator,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn domain(&self) -> &FamilyDomain {
        &self.domain
    }

    pub fn dimension(&self) -> usize {
        match &self.domain {
            FamilyDomain::Discrete(ps) => ps[0].len(),
            FamilyDomain::Continuous(b) => b.dimension(),
        }
    }

    pub fn bounds(&self) -> Option<&ParamBox> {
        match &self.domain {
            FamilyDomain::Continuous(b) => Some(b),
            FamilyDomain::Discrete(_) => None,
        }
    }

    pub fn is_continuous(&self) -> bool {
        matches!(self.domain, FamilyDomain::Continuous(_))
    }

    /// Whether `p` belongs to the family's domain (exact list membership for
    /// discrete families).
    pub fn contains(&self, p: &[f64]) -> bool {
        match &self.domain {
            FamilyDomain::Discrete(ps) => ps.iter().any(|q| q.as_slice() == p),
            FamilyDomain::Continuous(b) => b.contains(p),
        }
    }

    /// Default seed model: box midpoint, or the first listed parameter.
    pub fn default_start(&self) -> Vec<f64> {
        match &self.domain {
            FamilyDomain::Discrete(ps) => ps[0].clone(),
            FamilyDomain::Continuous(b) => b.midpoint(),
        }
    }

    pub fn generate(&self, p: &[f64]) -> Result<TabularMdp> {
        if p.len() != self.dimension() {
            return Err(usage(format!(
                "family '{}' takes {}-dimensional parameters, got {}",
                self.name,
                self.dimension(),
                p.len()
            )));
        }
        (self.generator)(p)
    }

    /// Same generator over a different domain.
    pub fn with_domain(&self, domain: FamilyDomain) -> Self {
        ModelFamily {
            name: self.name.clone(),
            domain,
            generator: Arc::clone(&self.generator),
        }
    }

    /// Builds every listed model of a discrete family.
    pub fn materialize(&self) -> Result<DiscreteUncertaintySet> {
        match &self.domain {
            FamilyDomain::Discrete(ps) => DiscreteUncertaintySet::from_family(self, ps.clone()),
            FamilyDomain::Continuous(_) => Err(usage(
                "cannot materialize a continuous family; use enumerate_grid",
            )),
        }
    }
}

/// Uniform inclusive grid over a continuous family's box, row-major (the last
/// axis varies fastest).
pub fn enumerate_grid(
    family: &ModelFamily,
    points_per_dim: usize,
) -> Result<DiscreteUncertaintySet> {
    let bounds = family
        .bounds()
        .ok_or_else(|| usage("enumerate_grid needs a continuous family"))?;
    DiscreteUncertaintySet::from_family(family, grid_points(bounds, points_per_dim)?)
}

/// Grid parameters of [`enumerate_grid`] without building the models.
pub fn grid_points(bounds: &ParamBox, points_per_dim: usize) -> Result<Vec<Vec<f64>>> {
    if points_per_dim < 2 {
        return Err(usage(format!(
            "points_per_dim must be at least 2, got {points_per_dim}"
        )));
    }
    let axes: Vec<Vec<f64>> = bounds
        .lower()
        .iter()
        .zip(bounds.upper())
        .map(|(&lo, &hi)| {
            let last = (points_per_dim - 1) as f64;
            (0..points_per_dim)
                .map(|k| {
                    if k == points_per_dim - 1 {
                        hi
                    } else {
                        (lo + (hi - lo) * k as f64 / last).min(hi)
                    }
                })
                .collect()
        })
        .collect();
    let mut points = vec![Vec::new()];
    for axis in &axes {
        points = points
            .into_iter()
            .flat_map(|prefix| {
                axis.iter().map(move |&x| {
                    let mut p = prefix.clone();
                    p.push(x);
                    p
                })
            })
            .collect();
    }
    Ok(points)
}

/// Ordered, non-empty list of structurally compatible models.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteUncertaintySet {
    models: Vec<TabularMdp>,
    parameters: Vec<Vec<f64>>,
}

impl DiscreteUncertaintySet {
    pub fn new(models: Vec<TabularMdp>, parameters: Vec<Vec<f64>>) -> Result<Self> {
        if models.is_empty() {
            return Err(usage("uncertainty set must contain at least one model"));
        }
        if models.len() != parameters.len() {
            return Err(usage("one parameter vector is required per model"));
        }
        let first = &models[0];
        if let Some(j) = models.iter().position(|m| !m.same_structure(first)) {
            return Err(usage(format!(
                "model {j} does not share the structure of model 0"
            )));
        }
        Ok(DiscreteUncertaintySet { models, parameters })
    }

    /// Models without meaningful parameters get their index as parameter.
    pub fn from_models(models: Vec<TabularMdp>) -> Result<Self> {
        let parameters = (0..models.len()).map(|j| vec![j as f64]).collect();
        Self::new(models, parameters)
    }

    pub fn singleton(model: TabularMdp, parameter: Vec<f64>) -> Self {
        DiscreteUncertaintySet {
            models: vec![model],
            parameters: vec![parameter],
        }
    }

    fn from_family(family: &ModelFamily, parameters: Vec<Vec<f64>>) -> Result<Self> {
        let models = parameters
            .iter()
            .map(|p| family.generate(p))
            .collect::<Result<Vec<_>>>()?;
        Self::new(models, parameters)
    }

    pub fn push(&mut self, model: TabularMdp, parameter: Vec<f64>) -> Result<()> {
        if !model.same_structure(&self.models[0]) {
            return Err(usage("model does not share the structure of the set"));
        }
        self.models.push(model);
        self.parameters.push(parameter);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn models(&self) -> &[TabularMdp] {
        &self.models
    }

    pub fn parameters(&self) -> &[Vec<f64>] {
        &self.parameters
    }

    pub fn model(&self, j: usize) -> &TabularMdp {
        &self.models[j]
    }

    pub fn parameter(&self, j: usize) -> &[f64] {
        &self.parameters[j]
    }

    /// Shared shape of every member.
    pub fn reference(&self) -> &TabularMdp {
        &self.models[0]
    }

    /// Subset with the given member indices, in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let models = indices.iter().map(|&j| self.models[j].clone()).collect();
        let params = indices
            .iter()
            .map(|&j| self.parameters[j].clone())
            .collect();
        Self::new(models, params)
    }
}

/// Implicit sa-rectangular product of a discrete set's rows.
#[derive(Debug, Clone, Copy)]
pub struct RectangularClosure<'a> {
    set: &'a DiscreteUncertaintySet,
}

/// Builds the closure handle; members must share dimensions.
pub fn rectangular_closure(set: &DiscreteUncertaintySet) -> Result<RectangularClosure<'_>> {
    let first = set.reference();
    if set.models().iter().any(|m| !m.same_structure(first)) {
        return Err(usage(
            "rectangular closure needs dimension-compatible models",
        ));
    }
    Ok(RectangularClosure { set })
}

impl<'a> RectangularClosure<'a> {
    pub fn set(&self) -> &'a DiscreteUncertaintySet {
        self.set
    }

    pub fn reference(&self) -> &'a TabularMdp {
        self.set.reference()
    }

    /// Number of candidate rows offered at every `(s, a)`.
    pub fn candidates(&self) -> usize {
        self.set.len()
    }

    /// Candidate `(transition, reward)` rows at `(s, a)`, in model order.
    pub fn rows(&self, s: usize, a: usize) -> impl Iterator<Item = (&'a [f64], &'a [f64])> + 'a {
        self.set
            .models()
            .iter()
            .map(move |m| (m.transition_row(s, a), m.reward_row(s, a)))
    }

    /// Number of distinct `(transition, reward)` rows at `(s, a)`.
    pub fn distinct_rows(&self, s: usize, a: usize) -> usize {
        let rows: Vec<_> = self.rows(s, a).collect();
        (0..rows.len())
            .filter(|&j| rows[..j].iter().all(|r| *r != rows[j]))
            .count()
    }

    /// Number of distinct kernels in the product, `None` on overflow.
    pub fn distinct_kernel_count(&self) -> Option<u128> {
        let m = self.reference();
        let mut count: u128 = 1;
        for s in 0..m.n_states() {
            for a in 0..m.n_actions() {
                count = count.checked_mul(self.distinct_rows(s, a) as u128)?;
            }
        }
        Some(count)
    }

    /// The product member that takes row `(s, a)` from model
    /// `choice[s * n_actions + a]`.
    pub fn kernel(&self, choice: &[usize]) -> Result<TabularMdp> {
        let m = self.reference();
        let (n_s, n_a) = (m.n_states(), m.n_actions());
        if choice.len() != n_s * n_a || choice.iter().any(|&j| j >= self.set.len()) {
            return Err(usage(
                "kernel choice must pick a valid model for every (s, a)",
            ));
        }
        let mut t = Vec::with_capacity(n_s * n_a * n_s);
        let mut r = Vec::with_capacity(n_s * n_a * n_s);
        for s in 0..n_s {
            for a in 0..n_a {
                let src = self.set.model(choice[s * n_a + a]);
                t.extend_from_slice(src.transition_row(s, a));
                r.extend_from_slice(src.reward_row(s, a));
            }
        }
        TabularMdp::new(
            n_s,
            n_a,
            t,
            r,
            m.discount(),
            m.start_state(),
            m.absorbing_flags().to_vec(),
        )
        .map_err(|e| Error::InvalidMdp(format!("closure kernel: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state(p: f64) -> TabularMdp {
        TabularMdp::new(
            2,
            1,
            vec![1.0 - p, p, 0.0, 1.0],
            vec![-1.0, -1.0, 0.0, 0.0],
            0.9,
            0,
            vec![false, true],
        )
        .unwrap()
    }

    fn family() -> ModelFamily {
        let generator: Generator = Arc::new(|p: &[f64]| Ok(two_state(p[0])));
        ModelFamily::continuous(
            "two-state",
            ParamBox::new(vec![0.0], vec![0.5]).unwrap(),
            generator,
        )
    }

    #[test]
    fn grid_over_unit_interval() {
        let set = enumerate_grid(&family(), 25).unwrap();
        assert_eq!(set.len(), 25);
        assert_eq!(set.parameter(0), &[0.0]);
        assert_eq!(set.parameter(24), &[0.5]);
        for (k, p) in set.parameters().iter().enumerate() {
            assert!((p[0] - 0.5 * k as f64 / 24.0).abs() < 1e-15);
        }
    }

    #[test]
    fn grid_corners_and_degenerate_box() {
        let corners =
            grid_points(&ParamBox::new(vec![0.0, 1.0], vec![2.0, 3.0]).unwrap(), 2).unwrap();
        assert_eq!(
            corners,
            vec![
                vec![0.0, 1.0],
                vec![0.0, 3.0],
                vec![2.0, 1.0],
                vec![2.0, 3.0]
            ]
        );
        let flat = grid_points(&ParamBox::new(vec![0.3], vec![0.3]).unwrap(), 5).unwrap();
        assert!(flat.iter().all(|p| p == &vec![0.3]));
        assert!(grid_points(&ParamBox::new(vec![0.0], vec![1.0]).unwrap(), 1).is_err());
    }

    #[test]
    fn grid_rejects_discrete_family() {
        let generator: Generator = Arc::new(|p: &[f64]| Ok(two_state(p[0])));
        let fam = ModelFamily::discrete("d", vec![vec![0.1]], generator).unwrap();
        assert!(matches!(enumerate_grid(&fam, 3), Err(Error::Usage(_))));
        assert_eq!(fam.materialize().unwrap().len(), 1);
    }

    #[test]
    fn closure_of_singleton_is_the_model() {
        let set = DiscreteUncertaintySet::singleton(two_state(0.2), vec![0.2]);
        let closure = rectangular_closure(&set).unwrap();
        assert_eq!(closure.distinct_kernel_count(), Some(1));
        assert_eq!(closure.kernel(&[0, 0]).unwrap(), two_state(0.2));
    }

    #[test]
    fn closure_degenerates_when_rows_coincide() {
        let set = DiscreteUncertaintySet::new(
            vec![two_state(0.2), two_state(0.4)],
            vec![vec![0.2], vec![0.4]],
        )
        .unwrap();
        let closure = rectangular_closure(&set).unwrap();
        assert_eq!(closure.distinct_rows(0, 0), 2);
        assert_eq!(closure.distinct_rows(1, 0), 1);
        assert_eq!(closure.distinct_kernel_count(), Some(2));
    }

    #[test]
    fn mismatched_models_rejected() {
        let other = TabularMdp::new(1, 1, vec![1.0], vec![0.0], 0.9, 0, vec![false]).unwrap();
        assert!(DiscreteUncertaintySet::new(
            vec![two_state(0.1), other],
            vec![vec![0.0], vec![1.0]]
        )
        .is_err());
        assert!(DiscreteUncertaintySet::new(vec![], vec![]).is_err());
    }

    #[test]
    fn normalize_round_trip() {
        let b = ParamBox::new(vec![-1.0, 0.0], vec![1.0, 0.5]).unwrap();
        let p = b.denormalize(&[0.25, 1.0]);
        assert_eq!(p, vec![-0.5, 0.5]);
        assert_eq!(b.normalize(&p), vec![0.25, 1.0]);
        assert_eq!(b.denormalize(&[2.0, -1.0]), vec![1.0, 0.0]);
    }
}
