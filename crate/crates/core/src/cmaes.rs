//! Covariance matrix adaptation evolution strategy on the unit box.
//!
//! Textbook (mu/mu_w, lambda)-CMA-ES: log-rank weights over the better half,
//! cumulative step-size adaptation, rank-one plus rank-mu covariance update.
//! Sampled points are clipped to `[0, 1]^n` before evaluation and the clipped
//! points drive the update, which keeps the mean inside the box.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{usage, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CmaesConfig {
    pub population: usize,
    pub generations: usize,
    /// Starting mean in normalized coordinates, one entry per dimension.
    pub initial_mean: Vec<f64>,
    pub initial_std: f64,
    pub seed: u64,
}

impl CmaesConfig {
    /// Worst-case search budget: population 100, 6 generations, mean 0.5,
    /// std 0.5.
    pub fn worst_case_default(dimension: usize, seed: u64) -> Self {
        CmaesConfig {
            population: 100,
            generations: 6,
            initial_mean: vec![0.5; dimension],
            initial_std: 0.5,
            seed,
        }
    }

    pub fn validate(&self, dimension: usize) -> Result<()> {
        if dimension == 0 {
            return Err(usage("CMA-ES needs dimension >= 1"));
        }
        if self.population < 2 {
            return Err(usage(format!(
                "population must be >= 2, got {}",
                self.population
            )));
        }
        if self.generations < 1 {
            return Err(usage("generations must be >= 1"));
        }
        if !(self.initial_std > 0.0) || !self.initial_std.is_finite() {
            return Err(usage(format!(
                "initial_std must be positive, got {}",
                self.initial_std
            )));
        }
        if self.initial_mean.len() != dimension {
            return Err(usage(format!(
                "initial_mean has {} entries for dimension {dimension}",
                self.initial_mean.len()
            )));
        }
        Ok(())
    }
}

/// Per-generation summary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GenerationRecord {
    pub generation: usize,
    pub best_value_so_far: f64,
    /// Mean objective value over the generation's population.
    pub mean_value: f64,
    /// Step size after the generation's update.
    pub step_size: f64,
}

#[derive(Debug, Clone)]
pub struct CmaesOutcome {
    pub best_point: Vec<f64>,
    pub best_value: f64,
    pub history: Vec<GenerationRecord>,
    pub evaluations: usize,
}

impl CmaesOutcome {
    /// CSV with header `generation,best_value_so_far,mean_value,step_size`.
    pub fn write_history_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.history {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

struct Strategy {
    n: usize,
    mu: usize,
    weights: Vec<f64>,
    mu_eff: f64,
    c_sigma: f64,
    d_sigma: f64,
    c_c: f64,
    c_1: f64,
    c_mu: f64,
    chi_n: f64,
}

impl Strategy {
    fn new(n: usize, lambda: usize) -> Self {
        let mu = lambda.div_ceil(2);
        let raw: Vec<f64> = (1..=mu)
            .map(|i| (mu as f64 + 0.5).ln() - (i as f64).ln())
            .collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();
        let nf = n as f64;
        let c_sigma = (mu_eff + 2.0) / (nf + mu_eff + 5.0);
        let d_sigma = 1.0 + 2.0 * (((mu_eff - 1.0) / (nf + 1.0)).sqrt() - 1.0).max(0.0) + c_sigma;
        let c_c = (4.0 + mu_eff / nf) / (nf + 4.0 + 2.0 * mu_eff / nf);
        let c_1 = 2.0 / ((nf + 1.3).powi(2) + mu_eff);
        let c_mu =
            (1.0 - c_1).min(2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((nf + 2.0).powi(2) + mu_eff));
        let chi_n = nf.sqrt() * (1.0 - 1.0 / (4.0 * nf) + 1.0 / (21.0 * nf * nf));
        Strategy {
            n,
            mu,
            weights,
            mu_eff,
            c_sigma,
            d_sigma,
            c_c,
            c_1,
            c_mu,
            chi_n,
        }
    }
}

/// Minimizes `objective` over `[0, 1]^dimension`.
///
/// Evaluations within a generation may run in parallel; ranking uses the
/// value and then the sample index, so results are independent of
/// scheduling.
pub fn cmaes_minimize<F>(
    objective: F,
    dimension: usize,
    config: &CmaesConfig,
) -> Result<CmaesOutcome>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    config.validate(dimension)?;
    let lambda = config.population;
    let st = Strategy::new(dimension, lambda);
    let n = st.n;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut mean = DVector::from_iterator(n, config.initial_mean.iter().map(|m| m.clamp(0.0, 1.0)));
    let mut sigma = config.initial_std;
    let mut cov = DMatrix::<f64>::identity(n, n);
    let mut basis = DMatrix::<f64>::identity(n, n);
    let mut scales = DVector::<f64>::from_element(n, 1.0);
    let mut p_sigma = DVector::<f64>::zeros(n);
    let mut p_c = DVector::<f64>::zeros(n);

    let mut best_point = mean.iter().copied().collect::<Vec<_>>();
    let mut best_value = f64::INFINITY;
    let mut history = Vec::with_capacity(config.generations);
    let mut evaluations = 0;

    for generation in 1..=config.generations {
        let points: Vec<DVector<f64>> = (0..lambda)
            .map(|_| {
                let z = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
                let y = &basis * z.component_mul(&scales);
                (&mean + y * sigma).map(|x: f64| x.clamp(0.0, 1.0))
            })
            .collect();
        let values: Vec<f64> = points
            .par_iter()
            .map(|x| objective(x.as_slice()))
            .collect::<Result<_>>()?;
        evaluations += lambda;
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteObjective {
                value: values[k],
                point: points[k].iter().copied().collect(),
            });
        }

        let mut order: Vec<usize> = (0..lambda).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
        if values[order[0]] < best_value {
            best_value = values[order[0]];
            best_point = points[order[0]].iter().copied().collect();
        }

        let old_mean = mean.clone();
        mean = order[..st.mu]
            .iter()
            .zip(&st.weights)
            .fold(DVector::zeros(n), |acc, (&k, &w)| acc + &points[k] * w);
        let steps: Vec<DVector<f64>> = order[..st.mu]
            .iter()
            .map(|&k| (&points[k] - &old_mean) / sigma)
            .collect();
        let y_w = (&mean - &old_mean) / sigma;

        let inv_sqrt =
            &basis * DMatrix::from_diagonal(&scales.map(|d| 1.0 / d)) * basis.transpose();
        p_sigma = &p_sigma * (1.0 - st.c_sigma)
            + (&inv_sqrt * &y_w) * (st.c_sigma * (2.0 - st.c_sigma) * st.mu_eff).sqrt();
        let decay = 1.0 - (1.0 - st.c_sigma).powi(2 * generation as i32);
        let h_sigma = if p_sigma.norm() / decay.sqrt() < (1.4 + 2.0 / (n as f64 + 1.0)) * st.chi_n {
            1.0
        } else {
            0.0
        };
        p_c =
            &p_c * (1.0 - st.c_c) + &y_w * (h_sigma * (st.c_c * (2.0 - st.c_c) * st.mu_eff).sqrt());

        let rank_mu = steps
            .iter()
            .zip(&st.weights)
            .fold(DMatrix::zeros(n, n), |acc, (y, &w)| {
                acc + y * y.transpose() * w
            });
        let correction = (1.0 - h_sigma) * st.c_c * (2.0 - st.c_c);
        cov = &cov * (1.0 - st.c_1 - st.c_mu)
            + (&p_c * p_c.transpose() + &cov * correction) * st.c_1
            + rank_mu * st.c_mu;
        cov = (&cov + cov.transpose()) * 0.5;

        sigma *= ((st.c_sigma / st.d_sigma) * (p_sigma.norm() / st.chi_n - 1.0)).exp();

        let eig = SymmetricEigen::new(cov.clone());
        basis = eig.eigenvectors;
        scales = eig.eigenvalues.map(|l| l.max(1e-300).sqrt());

        history.push(GenerationRecord {
            generation,
            best_value_so_far: best_value,
            mean_value: values.iter().sum::<f64>() / lambda as f64,
            step_size: sigma,
        });
    }

    Ok(CmaesOutcome {
        best_point,
        best_value,
        history,
        evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(population: usize, generations: usize, mean: Vec<f64>, std: f64) -> CmaesConfig {
        CmaesConfig {
            population,
            generations,
            initial_mean: mean,
            initial_std: std,
            seed: 11,
        }
    }

    #[test]
    fn sphere_three_dimensions() {
        let sphere = |x: &[f64]| Ok(x.iter().map(|v| (v - 0.5).powi(2)).sum::<f64>());
        let out = cmaes_minimize(sphere, 3, &config(16, 50, vec![0.1; 3], 0.3)).unwrap();
        assert!(out.best_value <= 1e-6, "best {}", out.best_value);
        assert_eq!(out.evaluations, 16 * 50);
    }

    #[test]
    fn absolute_value_one_dimension() {
        let f = |x: &[f64]| Ok((x[0] - 0.3).abs());
        let out = cmaes_minimize(f, 1, &config(16, 30, vec![0.8], 0.3)).unwrap();
        assert!(
            (out.best_point[0] - 0.3).abs() <= 1e-3,
            "point {:?}",
            out.best_point
        );
    }

    #[test]
    fn constant_objective() {
        let out = cmaes_minimize(|_| Ok(4.25), 2, &config(8, 5, vec![0.5; 2], 0.5)).unwrap();
        assert_eq!(out.best_value, 4.25);
        assert!(out.best_point.iter().all(|x| (0.0..=1.0).contains(x)));
    }

    #[test]
    fn history_is_monotone_and_deterministic() {
        let f = |x: &[f64]| Ok((x[0] - 0.7).powi(2) + (x[1] - 0.2).abs());
        let cfg = config(12, 20, vec![0.5; 2], 0.5);
        let a = cmaes_minimize(f, 2, &cfg).unwrap();
        let b = cmaes_minimize(f, 2, &cfg).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.best_point, b.best_point);
        for w in a.history.windows(2) {
            assert!(w[1].best_value_so_far <= w[0].best_value_so_far);
        }
    }

    #[test]
    fn non_finite_objective_aborts() {
        let err = cmaes_minimize(|_| Ok(f64::NAN), 1, &config(4, 3, vec![0.5], 0.5)).unwrap_err();
        assert!(matches!(err, Error::NonFiniteObjective { .. }));
    }

    #[test]
    fn config_validation() {
        let f = |_: &[f64]| Ok(0.0);
        assert!(cmaes_minimize(f, 1, &config(1, 3, vec![0.5], 0.5)).is_err());
        assert!(cmaes_minimize(f, 1, &config(4, 0, vec![0.5], 0.5)).is_err());
        assert!(cmaes_minimize(f, 1, &config(4, 3, vec![0.5], 0.0)).is_err());
        assert!(cmaes_minimize(f, 2, &config(4, 3, vec![0.5], 0.5)).is_err());
        assert!(cmaes_minimize(f, 0, &config(4, 3, vec![], 0.5)).is_err());
    }
}
