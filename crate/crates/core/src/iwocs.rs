//! Incremental worst-case search.
//!
//! Each iteration solves one non-robust MDP with value iteration, folds its
//! optimal Q-table into a pointwise-minimum aggregate, takes the greedy policy
//! of the aggregate and asks a searcher for that policy's worst model. The
//! loop stops once the adversarial value and the aggregate's own estimate at
//! the start state agree within `epsilon`.

use std::io::Write;
use std::time::Instant;

use serde::Serialize;

use crate::cmaes::{CmaesConfig, GenerationRecord};
use crate::error::{usage, Error, Result};
use crate::mdp::{
    default_max_iters, greedy_policy, value_iteration, DeterministicPolicy, QFunction, TabularMdp,
};
use crate::robust::robust_value_iteration;
use crate::search::{cmaes_worst_case, grid_worst_case, Evaluator, SearchOutcome};
use crate::uncertainty::{rectangular_closure, DiscreteUncertaintySet, ModelFamily};

/// Pointwise minimum of equally shaped Q-tables.
pub fn min_aggregate(q_tables: &[QFunction]) -> Result<QFunction> {
    let first = q_tables
        .first()
        .ok_or_else(|| usage("min_aggregate needs at least one table"))?;
    let mut out = first.clone();
    for q in &q_tables[1..] {
        fold_min(&mut out, q)?;
    }
    Ok(out)
}

fn fold_min(acc: &mut QFunction, q: &QFunction) -> Result<()> {
    if !acc.same_shape(q) {
        return Err(usage(format!(
            "Q-table shape {}x{} does not match {}x{}",
            q.n_states(),
            q.n_actions(),
            acc.n_states(),
            acc.n_actions()
        )));
    }
    for s in 0..acc.n_states() {
        for a in 0..acc.n_actions() {
            if q.get(s, a) < acc.get(s, a) {
                acc.set(s, a, q.get(s, a));
            }
        }
    }
    Ok(())
}

/// Candidate robust policy: the greedy policy of the pointwise minimum of the
/// optimal Q-tables solved so far.
#[derive(Debug, Clone)]
pub struct AggregatePolicy {
    q_tables: Vec<QFunction>,
    combined: QFunction,
    greedy: DeterministicPolicy,
}

impl AggregatePolicy {
    pub fn new(first: QFunction) -> Self {
        let greedy = greedy_policy(&first);
        AggregatePolicy {
            combined: first.clone(),
            q_tables: vec![first],
            greedy,
        }
    }

    pub fn push(&mut self, q: QFunction) -> Result<()> {
        fold_min(&mut self.combined, &q)?;
        self.q_tables.push(q);
        self.greedy = greedy_policy(&self.combined);
        Ok(())
    }

    pub fn q_tables(&self) -> &[QFunction] {
        &self.q_tables
    }

    pub fn combined(&self) -> &QFunction {
        &self.combined
    }

    pub fn greedy(&self) -> &DeterministicPolicy {
        &self.greedy
    }

    /// `Q_i(s, pi_i(s))`.
    pub fn candidate_value(&self, s: usize) -> f64 {
        self.combined.get(s, self.greedy.action(s))
    }
}

/// Why an iteration ended the way it did.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum IterationStatus {
    Continue,
    Converged,
    MaxIterations,
    RepeatedWorstCase,
}

impl IterationStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            IterationStatus::Continue => "continue",
            IterationStatus::Converged => "converged",
            IterationStatus::MaxIterations => "max-iterations",
            IterationStatus::RepeatedWorstCase => "repeated-worst-case",
        }
    }

    pub fn is_terminal(self) -> bool {
        self != IterationStatus::Continue
    }
}

#[derive(Debug, Clone)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Parameter of `T_i`, the model solved this iteration.
    pub solved_parameter: Vec<f64>,
    /// Parameter of `T_{i+1}`, the worst case found for `pi_i`.
    pub worst_parameter: Vec<f64>,
    /// `V^{pi_i}_{T_{i+1}}(s0)`.
    pub adversarial_value: f64,
    pub adversarial_std_error: f64,
    /// `Q_i(s0, pi_i(s0))`.
    pub candidate_value: f64,
    pub gap: f64,
    pub status: IterationStatus,
    pub vi_iterations: usize,
    /// Standard Bellman backups spent by all solves up to this iteration.
    pub cumulative_backups: usize,
    pub search_evaluations: usize,
    pub solve_seconds: f64,
    pub search_seconds: f64,
    /// CMA-ES generations of this iteration's search; empty for grid search.
    pub search_history: Vec<GenerationRecord>,
}

#[derive(Debug, Clone, Default)]
pub struct IwocsTrace {
    pub records: Vec<IterationRecord>,
}

impl IwocsTrace {
    pub fn status(&self) -> Option<IterationStatus> {
        self.records.last().map(|r| r.status)
    }

    /// Number of completed iterations.
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// CSV with header
    /// `iteration,param_0..param_{d-1},adversarial_value,candidate_value,gap,status`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let dim = self.records.first().map_or(0, |r| r.worst_parameter.len());
        let mut header = vec!["iteration".to_string()];
        header.extend((0..dim).map(|k| format!("param_{k}")));
        header.extend(["adversarial_value", "candidate_value", "gap", "status"].map(String::from));
        w.write_record(&header)?;
        for r in &self.records {
            let mut row = vec![r.iteration.to_string()];
            row.extend(r.worst_parameter.iter().map(|p| p.to_string()));
            row.push(r.adversarial_value.to_string());
            row.push(r.candidate_value.to_string());
            row.push(r.gap.to_string());
            row.push(r.status.as_str().to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Worst-case searcher used by [`run_iwocs`].
#[derive(Debug, Clone)]
pub enum Searcher {
    /// Exhaustive scan of a prebuilt discrete set.
    Grid(DiscreteUncertaintySet),
    /// CMA-ES over a continuous family's box.
    Cmaes(CmaesConfig),
}

#[derive(Debug, Clone)]
pub struct IwocsOptions {
    /// Seed model parameter; defaults to the family's [`ModelFamily::default_start`].
    pub t0: Option<Vec<f64>>,
    pub max_iterations: usize,
    pub epsilon: f64,
    pub vi_tol: f64,
    /// Backup budget per solve; defaults to `10 * ceil(ln(tol) / ln(gamma))`.
    pub vi_max_iters: Option<usize>,
    pub evaluator: Evaluator,
    /// L-infinity radius under which a CMA-ES worst case counts as already solved.
    pub duplicate_tol: f64,
}

impl Default for IwocsOptions {
    fn default() -> Self {
        IwocsOptions {
            t0: None,
            max_iterations: 25,
            epsilon: 1e-2,
            vi_tol: 1e-3,
            vi_max_iters: None,
            evaluator: Evaluator::default(),
            duplicate_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct IwocsResult {
    pub aggregate: AggregatePolicy,
    pub trace: IwocsTrace,
    /// `T_0 .. T_i`, the models solved so far, in order.
    pub solved: DiscreteUncertaintySet,
    /// Worst case found for the returned policy.
    pub worst_parameter: Vec<f64>,
    pub worst_value: f64,
}

impl IwocsResult {
    pub fn policy(&self) -> &DeterministicPolicy {
        self.aggregate.greedy()
    }

    /// Terminal `Q_i(s0, pi_i(s0))`.
    pub fn candidate_value(&self) -> f64 {
        self.trace
            .records
            .last()
            .map_or(f64::NAN, |r| r.candidate_value)
    }

    pub fn status(&self) -> IterationStatus {
        self.trace
            .status()
            .unwrap_or(IterationStatus::MaxIterations)
    }

    pub fn total_backups(&self) -> usize {
        self.trace
            .records
            .last()
            .map_or(0, |r| r.cumulative_backups)
    }
}

fn solve_model(model: &TabularMdp, opts: &IwocsOptions) -> Result<(QFunction, usize)> {
    let max_iters = opts
        .vi_max_iters
        .unwrap_or_else(|| default_max_iters(opts.vi_tol, model.discount()));
    let sol = value_iteration(model, opts.vi_tol, max_iters)?.into_result()?;
    Ok((sol.q, sol.iterations))
}

fn is_repeat(solved: &DiscreteUncertaintySet, p: &[f64], searcher: &Searcher, tol: f64) -> bool {
    solved.parameters().iter().any(|q| match searcher {
        Searcher::Grid(_) => q.as_slice() == p,
        Searcher::Cmaes(_) => q.iter().zip(p).all(|(a, b)| (a - b).abs() <= tol),
    })
}

fn search(
    searcher: &Searcher,
    family: &ModelFamily,
    evaluator: &Evaluator,
    policy: &DeterministicPolicy,
) -> Result<SearchOutcome> {
    match searcher {
        Searcher::Grid(set) => grid_worst_case(evaluator, policy, set),
        Searcher::Cmaes(cfg) => cmaes_worst_case(evaluator, policy, family, cfg),
    }
}

/// Runs the meta-loop for `i = 0 ..= max_iterations`.
pub fn run_iwocs(
    family: &ModelFamily,
    searcher: &Searcher,
    opts: &IwocsOptions,
) -> Result<IwocsResult> {
    if !(opts.epsilon > 0.0) {
        return Err(usage(format!(
            "epsilon must be positive, got {}",
            opts.epsilon
        )));
    }
    let t0 = opts.t0.clone().unwrap_or_else(|| family.default_start());
    if !family.contains(&t0) {
        return Err(usage(format!("t0 {t0:?} is outside the family domain")));
    }

    let mut current_param = t0.clone();
    let mut current_model = family.generate(&t0)?;
    let start = current_model.start_state();
    let mut solved = DiscreteUncertaintySet::singleton(current_model.clone(), t0);
    let mut aggregate: Option<AggregatePolicy> = None;
    let mut trace = IwocsTrace::default();
    let mut cumulative_backups = 0;

    for i in 0..=opts.max_iterations {
        let clock = Instant::now();
        let (q, vi_iterations) = solve_model(&current_model, opts).map_err(|e| match e {
            Error::NotConverged {
                iterations,
                residual,
                ..
            } => Error::NotConverged {
                solver: "IWOCS inner value iteration",
                iterations,
                residual,
            },
            other => other,
        })?;
        let solve_seconds = clock.elapsed().as_secs_f64();
        cumulative_backups += vi_iterations;
        let agg = match aggregate.as_mut() {
            Some(agg) => {
                agg.push(q)?;
                agg
            }
            None => aggregate.insert(AggregatePolicy::new(q)),
        };

        let clock = Instant::now();
        let worst = search(searcher, family, &opts.evaluator, agg.greedy())?;
        let search_seconds = clock.elapsed().as_secs_f64();

        let candidate_value = agg.candidate_value(start);
        let gap = (worst.value - candidate_value).abs();
        let status = if gap <= opts.epsilon {
            IterationStatus::Converged
        } else if i == opts.max_iterations {
            IterationStatus::MaxIterations
        } else if is_repeat(&solved, &worst.parameter, searcher, opts.duplicate_tol) {
            IterationStatus::RepeatedWorstCase
        } else {
            IterationStatus::Continue
        };
        trace.records.push(IterationRecord {
            iteration: i,
            solved_parameter: current_param.clone(),
            worst_parameter: worst.parameter.clone(),
            adversarial_value: worst.value,
            adversarial_std_error: worst.std_error,
            candidate_value,
            gap,
            status,
            vi_iterations,
            cumulative_backups,
            search_evaluations: worst.evaluations,
            solve_seconds,
            search_seconds,
            search_history: worst.history.clone(),
        });
        if status.is_terminal() {
            return Ok(IwocsResult {
                aggregate: aggregate.expect("aggregate initialized in first iteration"),
                trace,
                solved,
                worst_parameter: worst.parameter,
                worst_value: worst.value,
            });
        }
        current_param = worst.parameter;
        current_model = worst.model;
        solved.push(current_model.clone(), current_param.clone())?;
    }
    unreachable!("the last iteration always sets a terminal status")
}

/// Outcome of [`check_sandwich`]; violations are positive parts of the
/// differences, before slack.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SandwichReport {
    /// `max (Q_closure - Q_aggregate)^+`.
    pub inner_violation: f64,
    /// `max (Q_full - Q_closure)^+`.
    pub outer_violation: f64,
    pub slack: f64,
}

impl SandwichReport {
    pub fn max_violation(&self) -> f64 {
        self.inner_violation.max(self.outer_violation)
    }

    pub fn holds(&self) -> bool {
        self.max_violation() <= self.slack
    }
}

/// Robust solves used by [`check_sandwich`].
pub const SANDWICH_SOLVE_TOL: f64 = 1e-10;
pub const SANDWICH_SLACK: f64 = 1e-6;

/// Checks `Q_aggregate >= Q*_closure(solved) >= Q*_closure(full)` pointwise.
pub fn check_sandwich(
    aggregate: &AggregatePolicy,
    solved: &DiscreteUncertaintySet,
    full: &DiscreteUncertaintySet,
) -> Result<SandwichReport> {
    let budget = default_max_iters(SANDWICH_SOLVE_TOL, solved.reference().discount()) * 10;
    let inner = robust_value_iteration(&rectangular_closure(solved)?, SANDWICH_SOLVE_TOL, budget)?;
    let outer = robust_value_iteration(&rectangular_closure(full)?, SANDWICH_SOLVE_TOL, budget)?;
    let combined = aggregate.combined();
    if !combined.same_shape(&inner.robust_q) || !combined.same_shape(&outer.robust_q) {
        return Err(usage(
            "aggregate and uncertainty sets disagree on dimensions",
        ));
    }
    let positive_gap = |hi: &QFunction, lo: &QFunction| {
        hi.values()
            .iter()
            .zip(lo.values())
            .fold(0.0_f64, |m, (h, l)| m.max(l - h))
    };
    Ok(SandwichReport {
        inner_violation: positive_gap(combined, &inner.robust_q),
        outer_violation: positive_gap(&inner.robust_q, &outer.robust_q),
        slack: SANDWICH_SLACK,
    })
}
