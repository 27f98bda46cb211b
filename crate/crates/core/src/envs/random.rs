//! Seeded random MDPs and parameterized random families.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{usage, Result};
use crate::mdp::TabularMdp;
use crate::uncertainty::{ModelFamily, ParamBox};

pub const RANDOM_DISCOUNT: f64 = 0.9;

fn random_rows<R: Rng>(rng: &mut R, n_rows: usize, width: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n_rows * width);
    for _ in 0..n_rows {
        // -ln(u) draws make each row a flat Dirichlet sample
        let row: Vec<f64> = (0..width)
            .map(|_| -(1.0 - rng.random::<f64>()).ln() + 1e-3)
            .collect();
        let total: f64 = row.iter().sum();
        out.extend(row.iter().map(|x| x / total));
    }
    out
}

/// Fully stochastic MDP with rewards in `[-1, 0]`, start state 0 and no
/// absorbing states.
pub fn random_mdp<R: Rng>(
    rng: &mut R,
    n_states: usize,
    n_actions: usize,
    discount: f64,
) -> Result<TabularMdp> {
    let len = n_states * n_actions * n_states;
    let t = random_rows(rng, n_states * n_actions, n_states);
    let r = (0..len).map(|_| -rng.random::<f64>()).collect();
    TabularMdp::new(
        n_states,
        n_actions,
        t,
        r,
        discount,
        0,
        vec![false; n_states],
    )
}

/// Family on `[0, 1]^dimension`: the kernel at `psi` is
/// `(B + sum_k psi_k P_k) / (1 + sum_k psi_k)` for a random base kernel `B`
/// and random perturbation kernels `P_k`, all fixed by `seed`. Rewards are
/// fixed in `[-1, 0]` and the discount is 0.9.
pub fn random_family(
    seed: u64,
    n_states: usize,
    n_actions: usize,
    dimension: usize,
) -> Result<ModelFamily> {
    if n_states == 0 || n_actions == 0 || dimension == 0 {
        return Err(usage("random family sizes must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = n_states * n_actions;
    let base = random_rows(&mut rng, rows, n_states);
    let perturbations: Vec<Vec<f64>> = (0..dimension)
        .map(|_| random_rows(&mut rng, rows, n_states))
        .collect();
    let reward: Vec<f64> = (0..rows * n_states).map(|_| -rng.random::<f64>()).collect();
    let bounds = ParamBox::new(vec![0.0; dimension], vec![1.0; dimension])?;
    let generator = Arc::new(move |psi: &[f64]| {
        let weight = 1.0 + psi.iter().sum::<f64>();
        let mut t = base.clone();
        for (k, p) in perturbations.iter().enumerate() {
            for (x, y) in t.iter_mut().zip(p) {
                *x += psi[k] * y;
            }
        }
        for row in t.chunks_mut(n_states) {
            let total: f64 = row.iter().sum();
            debug_assert!((total - weight).abs() < 1e-9);
            row.iter_mut().for_each(|x| *x /= total);
        }
        TabularMdp::new(
            n_states,
            n_actions,
            t,
            reward.clone(),
            RANDOM_DISCOUNT,
            0,
            vec![false; n_states],
        )
    });
    Ok(ModelFamily::continuous(
        format!("random-{seed}"),
        bounds,
        generator,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generator_is_pure() {
        let fam = random_family(3, 4, 2, 2).unwrap();
        let c = fam.bounds().unwrap().midpoint();
        assert_eq!(fam.generate(&c).unwrap(), fam.generate(&c).unwrap());
        let again = random_family(3, 4, 2, 2).unwrap();
        assert_eq!(fam.generate(&c).unwrap(), again.generate(&c).unwrap());
    }

    #[test]
    fn rows_stochastic_for_many_parameters() {
        let fam = random_family(9, 3, 2, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let psi: Vec<f64> = (0..3).map(|_| rng.random()).collect();
            let m = fam.generate(&psi).unwrap();
            for row in m.transition_tensor().chunks(3) {
                assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn rejects_empty_sizes() {
        assert!(random_family(0, 0, 2, 1).is_err());
        assert!(random_family(0, 2, 2, 0).is_err());
    }
}
