//! Reference computations written independently of the library solvers.

#![allow(dead_code)]

use iwocs::envs::random_mdp;
use iwocs::mdp::{DeterministicPolicy, TabularMdp};
use iwocs::uncertainty::DiscreteUncertaintySet;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random set of `n_models` stochastic MDPs sharing shape and discount.
pub fn random_set(
    seed: u64,
    n_states: usize,
    n_actions: usize,
    n_models: usize,
) -> DiscreteUncertaintySet {
    let mut r = rng(seed);
    let discount = r.random_range(0.5..0.95);
    let models = (0..n_models)
        .map(|_| random_mdp(&mut r, n_states, n_actions, discount).unwrap())
        .collect();
    DiscreteUncertaintySet::from_models(models).unwrap()
}

/// Solves `(I - gamma P_pi) v = r_pi` directly.
pub fn policy_value_linear(mdp: &TabularMdp, policy: &[usize]) -> Vec<f64> {
    let n = mdp.n_states();
    let g = mdp.discount();
    let mut a = DMatrix::<f64>::identity(n, n);
    let mut b = DVector::<f64>::zeros(n);
    for s in 0..n {
        if mdp.is_absorbing(s) {
            continue;
        }
        let p = mdp.transition_row(s, policy[s]);
        let r = mdp.reward_row(s, policy[s]);
        for t in 0..n {
            a[(s, t)] -= g * p[t];
            b[s] += p[t] * r[t];
        }
    }
    let v = a.lu().solve(&b).expect("I - gamma P is nonsingular");
    v.iter().copied().collect()
}

/// Plain value iteration, one state at a time, to a residual of `tol`.
pub fn scalar_value_iteration(mdp: &TabularMdp, tol: f64) -> Vec<f64> {
    let n = mdp.n_states();
    let mut v = vec![0.0; n];
    loop {
        let mut next = vec![0.0; n];
        for (s, out) in next.iter_mut().enumerate() {
            if mdp.is_absorbing(s) {
                continue;
            }
            let mut best = f64::NEG_INFINITY;
            for a in 0..mdp.n_actions() {
                let p = mdp.transition_row(s, a);
                let r = mdp.reward_row(s, a);
                let q: f64 = (0..n).map(|t| p[t] * (r[t] + mdp.discount() * v[t])).sum();
                best = best.max(q);
            }
            *out = best;
        }
        let d = next
            .iter()
            .zip(&v)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        v = next;
        if d <= tol {
            return v;
        }
    }
}

/// All deterministic policies of an `n_states x n_actions` MDP.
pub fn all_policies(n_states: usize, n_actions: usize) -> Vec<Vec<usize>> {
    all_choices(n_states, n_actions)
}

/// Every vector in `{0..k}^len`, first position slowest.
pub fn all_choices(len: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..k).map(move |c| {
                    let mut p = prefix.clone();
                    p.push(c);
                    p
                })
            })
            .collect();
    }
    out
}

/// Member of the rectangular closure picking model `choice[s * nA + a]` at
/// each state-action pair, built without the library's closure type.
pub fn product_kernel(set: &DiscreteUncertaintySet, choice: &[usize]) -> TabularMdp {
    let m0 = set.reference();
    let (n_s, n_a) = (m0.n_states(), m0.n_actions());
    let mut t = Vec::with_capacity(n_s * n_a * n_s);
    let mut r = Vec::with_capacity(n_s * n_a * n_s);
    for s in 0..n_s {
        for a in 0..n_a {
            let m = set.model(choice[s * n_a + a]);
            t.extend_from_slice(m.transition_row(s, a));
            r.extend_from_slice(m.reward_row(s, a));
        }
    }
    TabularMdp::new(
        n_s,
        n_a,
        t,
        r,
        m0.discount(),
        m0.start_state(),
        m0.absorbing_flags().to_vec(),
    )
    .unwrap()
}

/// `(max_pi min_T V, min_T max_pi V)` at the start state, by enumeration.
pub fn exhaustive_saddle(set: &DiscreteUncertaintySet) -> (f64, f64) {
    let m0 = set.reference();
    let (n_s, n_a) = (m0.n_states(), m0.n_actions());
    let s0 = m0.start_state();
    let kernels: Vec<TabularMdp> = all_choices(n_s * n_a, set.len())
        .iter()
        .map(|c| product_kernel(set, c))
        .collect();
    let policies = all_policies(n_s, n_a);
    let table: Vec<Vec<f64>> = policies
        .iter()
        .map(|pi| {
            kernels
                .iter()
                .map(|k| policy_value_linear(k, pi)[s0])
                .collect()
        })
        .collect();
    let max_min = table
        .iter()
        .map(|row| row.iter().copied().fold(f64::INFINITY, f64::min))
        .fold(f64::NEG_INFINITY, f64::max);
    let min_max = (0..kernels.len())
        .map(|k| {
            table
                .iter()
                .map(|row| row[k])
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .fold(f64::INFINITY, f64::min);
    (max_min, min_max)
}

pub fn sup(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn random_values<R: Rng>(r: &mut R, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| r.random_range(-scale..scale)).collect()
}

pub fn policy(p: &[usize]) -> DeterministicPolicy {
    DeterministicPolicy(p.to_vec())
}
