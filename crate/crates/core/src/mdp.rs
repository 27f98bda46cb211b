//! Finite MDPs, standard dynamic programming and policy evaluation.
//!
//! Tensors are stored dense and row-major: the entry for `(s, a, s')` lives at
//! `(s * n_actions + a) * n_states + s'`. All solvers start from `V = 0` and
//! break `argmax` ties towards the lowest action index.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{usage, Error, Result};

/// Tolerance on row sums of a transition tensor.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

/// A finite discounted MDP with an explicit start state and absorbing flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MdpDocument", into = "MdpDocument")]
pub struct TabularMdp {
    n_states: usize,
    n_actions: usize,
    transition: Vec<f64>,
    reward: Vec<f64>,
    discount: f64,
    start_state: usize,
    absorbing: Vec<bool>,
}

/// On-disk JSON layout of a [`TabularMdp`].
///
/// `transition` and `reward` are flat row-major `(s, a, s')` arrays and
/// `absorbing` lists the indices of absorbing states.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdpDocument {
    pub n_states: usize,
    pub n_actions: usize,
    pub discount: f64,
    pub start_state: usize,
    pub absorbing: Vec<usize>,
    pub transition: Vec<f64>,
    pub reward: Vec<f64>,
}

impl TryFrom<MdpDocument> for TabularMdp {
    type Error = Error;

    fn try_from(doc: MdpDocument) -> Result<Self> {
        let mut absorbing = vec![false; doc.n_states];
        for &s in &doc.absorbing {
            if s >= doc.n_states {
                return Err(Error::InvalidMdp(format!(
                    "absorbing state {s} out of range for {} states",
                    doc.n_states
                )));
            }
            absorbing[s] = true;
        }
        TabularMdp::new(
            doc.n_states,
            doc.n_actions,
            doc.transition,
            doc.reward,
            doc.discount,
            doc.start_state,
            absorbing,
        )
    }
}

impl From<TabularMdp> for MdpDocument {
    fn from(mdp: TabularMdp) -> Self {
        MdpDocument {
            n_states: mdp.n_states,
            n_actions: mdp.n_actions,
            discount: mdp.discount,
            start_state: mdp.start_state,
            absorbing: mdp.absorbing_states().collect(),
            transition: mdp.transition,
            reward: mdp.reward,
        }
    }
}

impl TabularMdp {
    /// Builds an MDP, checking stochasticity, the absorbing convention and
    /// index ranges.
    pub fn new(
        n_states: usize,
        n_actions: usize,
        transition: Vec<f64>,
        reward: Vec<f64>,
        discount: f64,
        start_state: usize,
        absorbing: Vec<bool>,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::InvalidMdp(
                "n_states and n_actions must be positive".into(),
            ));
        }
        let len = n_states * n_actions * n_states;
        if transition.len() != len || reward.len() != len {
            return Err(Error::InvalidMdp(format!(
                "tensors must have {len} entries, got transition={} reward={}",
                transition.len(),
                reward.len()
            )));
        }
        if absorbing.len() != n_states {
            return Err(Error::InvalidMdp(format!(
                "absorbing flags must have {n_states} entries, got {}",
                absorbing.len()
            )));
        }
        if !(0.0..1.0).contains(&discount) {
            return Err(Error::InvalidMdp(format!(
                "discount {discount} not in [0, 1)"
            )));
        }
        if start_state >= n_states {
            return Err(Error::InvalidMdp(format!(
                "start state {start_state} out of range for {n_states} states"
            )));
        }
        for (row_index, row) in transition.chunks_exact(n_states).enumerate() {
            let (s, a) = (row_index / n_actions, row_index % n_actions);
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(Error::InvalidMdp(format!(
                    "transition row ({s}, {a}) has negative or non-finite entries"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::InvalidMdp(format!(
                    "transition row ({s}, {a}) sums to {sum}"
                )));
            }
        }
        if let Some(i) = reward.iter().position(|r| !r.is_finite()) {
            return Err(Error::InvalidMdp(format!("reward entry {i} is not finite")));
        }
        for s in (0..n_states).filter(|&s| absorbing[s]) {
            for a in 0..n_actions {
                let base = (s * n_actions + a) * n_states;
                if transition[base + s] != 1.0 || reward[base + s] != 0.0 {
                    return Err(Error::InvalidMdp(format!(
                        "absorbing state {s} must self-loop with zero reward under action {a}"
                    )));
                }
            }
        }
        Ok(TabularMdp {
            n_states,
            n_actions,
            transition,
            reward,
            discount,
            start_state,
            absorbing,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn start_state(&self) -> usize {
        self.start_state
    }

    pub fn is_absorbing(&self, s: usize) -> bool {
        self.absorbing[s]
    }

    pub fn absorbing_flags(&self) -> &[bool] {
        &self.absorbing
    }

    pub fn absorbing_states(&self) -> impl Iterator<Item = usize> + '_ {
        self.absorbing
            .iter()
            .enumerate()
            .filter_map(|(s, &f)| f.then_some(s))
    }

    /// Next-state distribution `T(. | s, a)`.
    pub fn transition_row(&self, s: usize, a: usize) -> &[f64] {
        let base = (s * self.n_actions + a) * self.n_states;
        &self.transition[base..base + self.n_states]
    }

    /// Rewards `r(s, a, .)`.
    pub fn reward_row(&self, s: usize, a: usize) -> &[f64] {
        let base = (s * self.n_actions + a) * self.n_states;
        &self.reward[base..base + self.n_states]
    }

    pub fn transition_tensor(&self) -> &[f64] {
        &self.transition
    }

    pub fn reward_tensor(&self) -> &[f64] {
        &self.reward
    }

    /// Largest absolute reward.
    pub fn reward_bound(&self) -> f64 {
        self.reward.iter().fold(0.0_f64, |m, r| m.max(r.abs()))
    }

    /// `sum_{s'} T(s'|s,a) (r(s,a,s') + gamma v(s'))`.
    pub fn expected_backup(&self, s: usize, a: usize, v: &[f64]) -> f64 {
        row_backup(
            self.transition_row(s, a),
            self.reward_row(s, a),
            self.discount,
            v,
        )
    }

    /// True when both MDPs have the same shape, discount, start state and
    /// absorbing flags.
    pub fn same_structure(&self, other: &TabularMdp) -> bool {
        self.n_states == other.n_states
            && self.n_actions == other.n_actions
            && self.discount == other.discount
            && self.start_state == other.start_state
            && self.absorbing == other.absorbing
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

pub(crate) fn row_backup(row: &[f64], rewards: &[f64], discount: f64, v: &[f64]) -> f64 {
    row.iter()
        .zip(rewards)
        .zip(v)
        .map(|((p, r), vn)| p * (r + discount * vn))
        .sum()
}

/// Per-state expected return.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueFunction(pub Vec<f64>);

impl ValueFunction {
    pub fn zeros(n_states: usize) -> Self {
        ValueFunction(vec![0.0; n_states])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// `max_s |self(s) - other(s)|`.
    pub fn sup_distance(&self, other: &ValueFunction) -> f64 {
        sup_distance(&self.0, &other.0)
    }
}

impl std::ops::Index<usize> for ValueFunction {
    type Output = f64;

    fn index(&self, s: usize) -> &f64 {
        &self.0[s]
    }
}

pub(crate) fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Dense `n_states x n_actions` action-value table, row-major by state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QFunction {
    n_states: usize,
    n_actions: usize,
    values: Vec<f64>,
}

impl QFunction {
    pub fn new(n_states: usize, n_actions: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_states * n_actions {
            return Err(usage(format!(
                "Q table of shape {n_states}x{n_actions} needs {} values, got {}",
                n_states * n_actions,
                values.len()
            )));
        }
        Ok(QFunction {
            n_states,
            n_actions,
            values,
        })
    }

    pub fn filled(n_states: usize, n_actions: usize, value: f64) -> Self {
        QFunction {
            n_states,
            n_actions,
            values: vec![value; n_states * n_actions],
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.n_actions + a]
    }

    pub fn set(&mut self, s: usize, a: usize, value: f64) {
        self.values[s * self.n_actions + a] = value;
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn same_shape(&self, other: &QFunction) -> bool {
        self.n_states == other.n_states && self.n_actions == other.n_actions
    }

    /// `max_a Q(s, a)` per state.
    pub fn state_values(&self) -> ValueFunction {
        ValueFunction(
            (0..self.n_states)
                .map(|s| self.row(s)[argmax(self.row(s))])
                .collect(),
        )
    }
}

/// One action per state.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DeterministicPolicy(pub Vec<usize>);

impl DeterministicPolicy {
    pub fn action(&self, s: usize) -> usize {
        self.0[s]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn check(&self, mdp: &TabularMdp) -> Result<()> {
        if self.0.len() != mdp.n_states() {
            return Err(usage(format!(
                "policy covers {} states, MDP has {}",
                self.0.len(),
                mdp.n_states()
            )));
        }
        if let Some(s) = self.0.iter().position(|&a| a >= mdp.n_actions()) {
            return Err(usage(format!(
                "policy action {} at state {s} out of range",
                self.0[s]
            )));
        }
        Ok(())
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Index of the smallest entry; ties go to the lowest index.
pub fn argmin(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x < xs[best] {
            best = i;
        }
    }
    best
}

fn check_value_len(v: &ValueFunction, mdp: &TabularMdp) -> Result<()> {
    if v.len() != mdp.n_states() {
        return Err(usage(format!(
            "value function has {} entries, MDP has {} states",
            v.len(),
            mdp.n_states()
        )));
    }
    Ok(())
}

/// One application of the Bellman optimality operator.
pub fn bellman_backup(v: &ValueFunction, mdp: &TabularMdp) -> Result<(ValueFunction, QFunction)> {
    check_value_len(v, mdp)?;
    let (n_s, n_a) = (mdp.n_states(), mdp.n_actions());
    let mut q = Vec::with_capacity(n_s * n_a);
    for s in 0..n_s {
        for a in 0..n_a {
            q.push(mdp.expected_backup(s, a, v.as_slice()));
        }
    }
    let q = QFunction::new(n_s, n_a, q)?;
    Ok((q.state_values(), q))
}

/// Result of [`value_iteration`].
#[derive(Debug, Clone)]
pub struct ViSolution {
    pub value: ValueFunction,
    pub q: QFunction,
    /// Number of backups performed.
    pub iterations: usize,
    /// `||V_n - V_{n-1}||_inf` of the last backup.
    pub residual: f64,
    pub converged: bool,
}

impl ViSolution {
    pub fn into_result(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NotConverged {
                solver: "value iteration",
                iterations: self.iterations,
                residual: self.residual,
            })
        }
    }
}

/// Backup budget `10 * ceil(ln(tol) / ln(gamma))`, at least 1.
pub fn default_max_iters(tol: f64, discount: f64) -> usize {
    if discount <= 0.0 {
        return 10;
    }
    let n = (tol.ln() / discount.ln()).ceil();
    (10.0 * n.max(1.0)) as usize
}

/// Iterates the Bellman operator from `V = 0` until the sup-norm change
/// drops to `tol` or `max_iters` backups have been spent.
pub fn value_iteration(mdp: &TabularMdp, tol: f64, max_iters: usize) -> Result<ViSolution> {
    if !(tol > 0.0) {
        return Err(usage(format!("tolerance must be positive, got {tol}")));
    }
    let mut v = ValueFunction::zeros(mdp.n_states());
    let mut q = QFunction::filled(mdp.n_states(), mdp.n_actions(), 0.0);
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < max_iters {
        let (next, next_q) = bellman_backup(&v, mdp)?;
        residual = next.sup_distance(&v);
        v = next;
        q = next_q;
        iterations += 1;
        if residual <= tol {
            break;
        }
    }
    Ok(ViSolution {
        value: v,
        q,
        iterations,
        residual,
        converged: residual <= tol,
    })
}

/// Per-state argmax of `q`, lowest action on ties.
pub fn greedy_policy(q: &QFunction) -> DeterministicPolicy {
    DeterministicPolicy((0..q.n_states()).map(|s| argmax(q.row(s))).collect())
}

const MAX_EVALUATION_SWEEPS: usize = 10_000_000;

/// Iterative policy evaluation from `V = 0` until the fixed-point residual is
/// at most `tol`.
pub fn evaluate_policy_exact(
    mdp: &TabularMdp,
    policy: &DeterministicPolicy,
    tol: f64,
) -> Result<ValueFunction> {
    if !(tol > 0.0) {
        return Err(usage(format!("tolerance must be positive, got {tol}")));
    }
    policy.check(mdp)?;
    let n_s = mdp.n_states();
    let mut v = vec![0.0; n_s];
    let mut next = vec![0.0; n_s];
    for _ in 0..MAX_EVALUATION_SWEEPS {
        for (s, out) in next.iter_mut().enumerate() {
            *out = mdp.expected_backup(s, policy.action(s), &v);
        }
        let residual = sup_distance(&next, &v);
        std::mem::swap(&mut v, &mut next);
        if residual <= tol {
            return Ok(ValueFunction(v));
        }
    }
    Err(Error::NotConverged {
        solver: "policy evaluation",
        iterations: MAX_EVALUATION_SWEEPS,
        residual: sup_distance(&next, &v),
    })
}

/// Monte-Carlo estimate of the discounted return from the start state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    /// Sample standard deviation over `sqrt(n)`; zero for a single rollout.
    pub std_error: f64,
}

/// Rollout RNG for `(seed, rollout)`: ChaCha8 keyed by `seed`, one stream per
/// rollout, so results do not depend on how rollouts are scheduled.
pub fn rollout_rng(seed: u64, rollout: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rollout);
    rng
}

fn sample_index<R: Rng>(row: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // u landed in the rounding slack above the cumulative sum
    row.iter().rposition(|&p| p > 0.0).unwrap_or(row.len() - 1)
}

/// Discounted return of one trajectory from the start state, stopping at an
/// absorbing state or after `horizon` steps.
pub fn rollout_return<R: Rng>(
    mdp: &TabularMdp,
    policy: &DeterministicPolicy,
    horizon: usize,
    rng: &mut R,
) -> f64 {
    let mut s = mdp.start_state();
    let mut total = 0.0;
    let mut weight = 1.0;
    for _ in 0..horizon {
        if mdp.is_absorbing(s) {
            break;
        }
        let a = policy.action(s);
        let next = sample_index(mdp.transition_row(s, a), rng);
        total += weight * mdp.reward_row(s, a)[next];
        weight *= mdp.discount();
        s = next;
    }
    total
}

/// Mean discounted return over `n_rollouts` independent trajectories.
///
/// Truncation at `horizon` biases the estimate by at most
/// `gamma^horizon * r_max / (1 - gamma)`; this is not corrected.
pub fn monte_carlo_return(
    mdp: &TabularMdp,
    policy: &DeterministicPolicy,
    n_rollouts: usize,
    horizon: usize,
    seed: u64,
) -> Result<McEstimate> {
    if n_rollouts == 0 || horizon == 0 {
        return Err(usage("n_rollouts and horizon must be at least 1"));
    }
    policy.check(mdp)?;
    let returns: Vec<f64> = (0..n_rollouts as u64)
        .into_par_iter()
        .map(|i| rollout_return(mdp, policy, horizon, &mut rollout_rng(seed, i)))
        .collect();
    let n = returns.len() as f64;
    let mean = returns.iter().sum::<f64>() / n;
    let std_error = if returns.len() > 1 {
        let var = returns.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    Ok(McEstimate { mean, std_error })
}
