//! Worst-case model search for a fixed policy: exhaustive scan of a discrete
//! set, or CMA-ES over a continuous family.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cmaes::{cmaes_minimize, CmaesConfig, GenerationRecord};
use crate::error::{usage, Result};
use crate::mdp::{
    argmin, evaluate_policy_exact, monte_carlo_return, DeterministicPolicy, TabularMdp,
};
use crate::uncertainty::{DiscreteUncertaintySet, ModelFamily};

/// How `V^pi_T(s0)` is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Evaluator {
    Exact {
        tol: f64,
    },
    MonteCarlo {
        n_rollouts: usize,
        horizon: usize,
        seed: u64,
    },
}

impl Default for Evaluator {
    fn default() -> Self {
        Evaluator::Exact { tol: 1e-8 }
    }
}

impl Evaluator {
    /// 300 rollouts of at most 10^4 steps.
    pub fn monte_carlo(seed: u64) -> Self {
        Evaluator::MonteCarlo {
            n_rollouts: 300,
            horizon: 10_000,
            seed,
        }
    }

    pub fn evaluate(&self, policy: &DeterministicPolicy, mdp: &TabularMdp) -> Result<Evaluation> {
        match *self {
            Evaluator::Exact { tol } => {
                let v = evaluate_policy_exact(mdp, policy, tol)?;
                Ok(Evaluation {
                    value: v[mdp.start_state()],
                    std_error: 0.0,
                })
            }
            Evaluator::MonteCarlo {
                n_rollouts,
                horizon,
                seed,
            } => {
                let est = monte_carlo_return(mdp, policy, n_rollouts, horizon, seed)?;
                Ok(Evaluation {
                    value: est.mean,
                    std_error: est.std_error,
                })
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    pub std_error: f64,
}

/// Worst model found for a policy.
#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub parameter: Vec<f64>,
    pub model: TabularMdp,
    /// Adversarial value `V^pi_T(s0)` of the returned model.
    pub value: f64,
    pub std_error: f64,
    pub evaluations: usize,
    /// Position in the searched set, for grid search.
    pub index: Option<usize>,
    /// Per-generation record, for CMA-ES.
    pub history: Vec<GenerationRecord>,
}

/// Evaluates the policy under every member and returns the minimizer,
/// lowest index on ties.
pub fn grid_worst_case(
    evaluator: &Evaluator,
    policy: &DeterministicPolicy,
    set: &DiscreteUncertaintySet,
) -> Result<SearchOutcome> {
    let evaluations = evaluate_all(evaluator, policy, set)?;
    let values: Vec<f64> = evaluations.iter().map(|e| e.value).collect();
    let j = argmin(&values);
    Ok(SearchOutcome {
        parameter: set.parameter(j).to_vec(),
        model: set.model(j).clone(),
        value: values[j],
        std_error: evaluations[j].std_error,
        evaluations: set.len(),
        index: Some(j),
        history: Vec::new(),
    })
}

/// Policy value under each member of `set`, in set order.
pub fn evaluate_all(
    evaluator: &Evaluator,
    policy: &DeterministicPolicy,
    set: &DiscreteUncertaintySet,
) -> Result<Vec<Evaluation>> {
    set.models()
        .par_iter()
        .map(|m| evaluator.evaluate(policy, m))
        .collect()
}

/// CMA-ES over the family's box in normalized coordinates.
pub fn cmaes_worst_case(
    evaluator: &Evaluator,
    policy: &DeterministicPolicy,
    family: &ModelFamily,
    config: &CmaesConfig,
) -> Result<SearchOutcome> {
    let bounds = family
        .bounds()
        .ok_or_else(|| usage("CMA-ES worst-case search needs a continuous family"))?;
    let objective = |x: &[f64]| -> Result<f64> {
        let model = family.generate(&bounds.denormalize(x))?;
        Ok(evaluator.evaluate(policy, &model)?.value)
    };
    let out = cmaes_minimize(objective, family.dimension(), config)?;
    let parameter = bounds.denormalize(&out.best_point);
    let model = family.generate(&parameter)?;
    let eval = evaluator.evaluate(policy, &model)?;
    Ok(SearchOutcome {
        parameter,
        model,
        value: out.best_value,
        std_error: eval.std_error,
        evaluations: out.evaluations,
        index: None,
        history: out.history,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::uncertainty::{enumerate_grid, Generator, ParamBox};

    /// Leaves state 0 with probability `1 - p`; each step costs 1.
    fn leak(p: f64) -> TabularMdp {
        TabularMdp::new(
            2,
            1,
            vec![p, 1.0 - p, 0.0, 1.0],
            vec![-1.0, -1.0, 0.0, 0.0],
            0.9,
            0,
            vec![false, true],
        )
        .unwrap()
    }

    fn leak_family() -> ModelFamily {
        let g: Generator = Arc::new(|p: &[f64]| Ok(leak(p[0])));
        ModelFamily::continuous("leak", ParamBox::new(vec![0.0], vec![0.8]).unwrap(), g)
    }

    #[test]
    fn singleton_grid() {
        let set = DiscreteUncertaintySet::singleton(leak(0.3), vec![0.3]);
        let policy = DeterministicPolicy(vec![0, 0]);
        let out = grid_worst_case(&Evaluator::default(), &policy, &set).unwrap();
        assert_eq!(out.index, Some(0));
        let direct = Evaluator::default().evaluate(&policy, &leak(0.3)).unwrap();
        assert_eq!(out.value, direct.value);
    }

    #[test]
    fn ties_pick_first_member() {
        let set = DiscreteUncertaintySet::from_models(vec![leak(0.3); 4]).unwrap();
        let out = grid_worst_case(
            &Evaluator::default(),
            &DeterministicPolicy(vec![0, 0]),
            &set,
        )
        .unwrap();
        assert_eq!(out.index, Some(0));
    }

    #[test]
    fn grid_minimality() {
        let set = enumerate_grid(&leak_family(), 9).unwrap();
        let policy = DeterministicPolicy(vec![0, 0]);
        let ev = Evaluator::default();
        let out = grid_worst_case(&ev, &policy, &set).unwrap();
        for m in set.models() {
            assert!(out.value <= ev.evaluate(&policy, m).unwrap().value);
        }
        assert_eq!(out.index, Some(8));
    }

    #[test]
    fn cmaes_finds_monotone_boundary() {
        let family = leak_family();
        let policy = DeterministicPolicy(vec![0, 0]);
        let ev = Evaluator::default();
        let cfg = CmaesConfig::worst_case_default(1, 5);
        let out = cmaes_worst_case(&ev, &policy, &family, &cfg).unwrap();
        assert!(out.parameter[0] >= 0.8 * 0.98);
        let again = ev.evaluate(&policy, &out.model).unwrap();
        assert_eq!(again.value, out.value);
    }

    #[test]
    fn cmaes_needs_continuous_family() {
        let g: Generator = Arc::new(|p: &[f64]| Ok(leak(p[0])));
        let family = ModelFamily::discrete("d", vec![vec![0.1]], g).unwrap();
        let cfg = CmaesConfig::worst_case_default(1, 5);
        assert!(cmaes_worst_case(
            &Evaluator::default(),
            &DeterministicPolicy(vec![0, 0]),
            &family,
            &cfg
        )
        .is_err());
    }
}
