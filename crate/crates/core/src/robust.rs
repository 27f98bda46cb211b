//! Robust Bellman operator and robust value iteration over sa-rectangular
//! closures of discrete model sets.

use std::io::Write;

use serde::Serialize;

use crate::error::{usage, Result};
use crate::mdp::{argmax, row_backup, QFunction, ValueFunction};
use crate::uncertainty::RectangularClosure;

/// Output of one robust backup, including which model attained each
/// `(s, a)` minimum.
#[derive(Debug, Clone)]
pub struct RobustBackup {
    pub value: ValueFunction,
    pub q: QFunction,
    /// Row-major `(s, a)` index of the minimizing model (lowest on ties).
    pub worst_model: Vec<usize>,
}

/// `Q(s,a) = min_j sum_{s'} T_j(s'|s,a) (r_j + gamma v(s'))`,
/// `V(s) = max_a Q(s,a)`.
pub fn robust_bellman_backup(
    v: &ValueFunction,
    closure: &RectangularClosure<'_>,
) -> Result<(ValueFunction, QFunction)> {
    let b = robust_backup_detailed(v, closure)?;
    Ok((b.value, b.q))
}

pub fn robust_backup_detailed(
    v: &ValueFunction,
    closure: &RectangularClosure<'_>,
) -> Result<RobustBackup> {
    let reference = closure.reference();
    let (n_s, n_a) = (reference.n_states(), reference.n_actions());
    if v.len() != n_s {
        return Err(usage(format!(
            "value function has {} entries, models have {n_s} states",
            v.len()
        )));
    }
    if closure.candidates() == 0 {
        return Err(usage("robust backup over an empty set"));
    }
    let discount = reference.discount();
    let mut q = Vec::with_capacity(n_s * n_a);
    let mut worst_model = Vec::with_capacity(n_s * n_a);
    for s in 0..n_s {
        for a in 0..n_a {
            let mut best = f64::INFINITY;
            let mut best_j = 0;
            for (j, (t, r)) in closure.rows(s, a).enumerate() {
                let x = row_backup(t, r, discount, v.as_slice());
                if x < best {
                    best = x;
                    best_j = j;
                }
            }
            q.push(best);
            worst_model.push(best_j);
        }
    }
    let q = QFunction::new(n_s, n_a, q)?;
    let value = ValueFunction((0..n_s).map(|s| q.row(s)[argmax(q.row(s))]).collect());
    Ok(RobustBackup {
        value,
        q,
        worst_model,
    })
}

/// One robust iterate `V_n` as seen from the start state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RobustIterate {
    pub iteration: usize,
    pub value_at_start_state: f64,
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct RobustSolveReport {
    pub robust_value: ValueFunction,
    pub robust_q: QFunction,
    /// Row-major `(s, a)` minimizing model of the final backup.
    pub worst_model: Vec<usize>,
    /// One entry per robust backup, starting from `V = 0`.
    pub iterate_trace: Vec<RobustIterate>,
    pub converged: bool,
}

impl RobustSolveReport {
    pub fn iterations(&self) -> usize {
        self.iterate_trace.len()
    }

    pub fn residual(&self) -> f64 {
        self.iterate_trace
            .last()
            .map_or(f64::INFINITY, |t| t.residual)
    }

    /// CSV with header `iteration,value_at_start_state,residual`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.iterate_trace {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Robust value iteration from `V = 0` until the sup-norm change is at most
/// `tol` or `max_iters` backups were spent.
pub fn robust_value_iteration(
    closure: &RectangularClosure<'_>,
    tol: f64,
    max_iters: usize,
) -> Result<RobustSolveReport> {
    if !(tol > 0.0) {
        return Err(usage(format!("tolerance must be positive, got {tol}")));
    }
    let reference = closure.reference();
    let start = reference.start_state();
    let mut v = ValueFunction::zeros(reference.n_states());
    let mut q = QFunction::filled(reference.n_states(), reference.n_actions(), 0.0);
    let mut worst_model = vec![0; reference.n_states() * reference.n_actions()];
    let mut trace = Vec::new();
    let mut residual = f64::INFINITY;
    while trace.len() < max_iters {
        let b = robust_backup_detailed(&v, closure)?;
        residual = b.value.sup_distance(&v);
        v = b.value;
        q = b.q;
        worst_model = b.worst_model;
        trace.push(RobustIterate {
            iteration: trace.len() + 1,
            value_at_start_state: v[start],
            residual,
        });
        if residual <= tol {
            break;
        }
    }
    Ok(RobustSolveReport {
        robust_value: v,
        robust_q: q,
        worst_model,
        iterate_trace: trace,
        converged: residual <= tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{bellman_backup, value_iteration, TabularMdp};
    use crate::uncertainty::{rectangular_closure, DiscreteUncertaintySet};

    fn model(p: f64, cost: f64) -> TabularMdp {
        // 2 states, 2 actions; state 1 absorbing
        TabularMdp::new(
            2,
            2,
            vec![1.0 - p, p, 0.5, 0.5, 0.0, 1.0, 0.0, 1.0],
            vec![-cost, -1.0, -0.3, -0.3, 0.0, 0.0, 0.0, 0.0],
            0.9,
            0,
            vec![false, true],
        )
        .unwrap()
    }

    #[test]
    fn singleton_matches_standard_backup() {
        let m = model(0.3, 1.0);
        let set = DiscreteUncertaintySet::singleton(m.clone(), vec![0.0]);
        let closure = rectangular_closure(&set).unwrap();
        let v = ValueFunction(vec![-2.0, 0.0]);
        let (rv, rq) = robust_bellman_backup(&v, &closure).unwrap();
        let (sv, sq) = bellman_backup(&v, &m).unwrap();
        assert_eq!(rv, sv);
        assert_eq!(rq, sq);

        let r = robust_value_iteration(&closure, 1e-8, 10_000).unwrap();
        let s = value_iteration(&m, 1e-8, 10_000).unwrap();
        assert!(r.converged);
        assert!(r.robust_value.sup_distance(&s.value) <= 1e-8);
        assert_eq!(r.iterations(), s.iterations);
    }

    #[test]
    fn dominated_model_wins_everywhere() {
        let good = model(0.6, 0.5);
        let bad = model(0.2, 2.0);
        let set = DiscreteUncertaintySet::from_models(vec![good, bad.clone()]).unwrap();
        let closure = rectangular_closure(&set).unwrap();
        let v = ValueFunction(vec![-1.0, 0.0]);
        let b = robust_backup_detailed(&v, &closure).unwrap();
        let (_, q_bad) = bellman_backup(&v, &bad).unwrap();
        assert_eq!(b.q, q_bad);
        assert_eq!(b.worst_model[0], 1);
        // tie on action 1 and on the absorbing state: lowest index
        assert_eq!(b.worst_model[1], 0);
        assert_eq!(b.worst_model[2], 0);
    }

    #[test]
    fn trace_is_monotone_for_negative_rewards() {
        let set =
            DiscreteUncertaintySet::from_models(vec![model(0.6, 0.5), model(0.2, 2.0)]).unwrap();
        let closure = rectangular_closure(&set).unwrap();
        let report = robust_value_iteration(&closure, 1e-6, 10_000).unwrap();
        assert!(report.converged);
        for w in report.iterate_trace.windows(2) {
            assert!(w[1].value_at_start_state <= w[0].value_at_start_state);
        }
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("iteration,value_at_start_state,residual\n1,"));
        assert_eq!(text.lines().count(), report.iterations() + 1);
    }

    #[test]
    fn rejects_bad_inputs() {
        let set = DiscreteUncertaintySet::singleton(model(0.3, 1.0), vec![0.0]);
        let closure = rectangular_closure(&set).unwrap();
        assert!(robust_bellman_backup(&ValueFunction::zeros(3), &closure).is_err());
        assert!(robust_value_iteration(&closure, -1.0, 10).is_err());
        let r = robust_value_iteration(&closure, 1e-12, 2).unwrap();
        assert!(!r.converged);
    }
}
