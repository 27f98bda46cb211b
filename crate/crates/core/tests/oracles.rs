//! Solver outputs against independently computed values.

mod common;

use iwocs::envs::{self, random_mdp, GridMap, WindZone};
use iwocs::mdp::{evaluate_policy_exact, greedy_policy, value_iteration};
use iwocs::robust::robust_value_iteration;
use iwocs::uncertainty::{rectangular_closure, DiscreteUncertaintySet};
use rand::Rng;

use common::*;

fn bfs_value(steps: usize, gamma: f64) -> f64 {
    -(1.0 - gamma.powi(steps as i32)) / (1.0 - gamma)
}

#[test]
fn calm_windy_walk_matches_shortest_path() {
    let maps = [
        envs::windy::DEFAULT_MAP,
        "S.G\n",
        "S#G\n...\n",
        "S....\n####.\nG....\n",
        "..#..\nS.#.G\n.....\n",
    ];
    for text in maps {
        let map = GridMap::parse(text, vec![]).unwrap();
        let steps = map.shortest_path_len().unwrap();
        let mdp = envs::windy_walk(&map, 0.0).unwrap();
        let v = value_iteration(&mdp, 1e-12, 100_000).unwrap();
        assert!(v.converged);
        let expected = bfs_value(steps, 0.95);
        assert!(
            (v.value[map.start()] - expected).abs() < 1e-9,
            "{text:?}: {} vs {expected}",
            v.value[map.start()]
        );
        assert_eq!(v.value[map.goal()], 0.0);
    }
    let steps = envs::default_map().shortest_path_len().unwrap();
    assert_eq!(steps, 5);
    assert!((bfs_value(steps, 0.95) - -4.52438125).abs() < 1e-9);
}

#[test]
fn exact_evaluation_matches_linear_solve() {
    for seed in 0..40 {
        let mut r = rng(seed);
        let n_s = r.random_range(1..=8);
        let n_a = r.random_range(1..=3);
        let gamma = r.random_range(0.1..0.97);
        let mdp = random_mdp(&mut r, n_s, n_a, gamma).unwrap();
        let pi: Vec<usize> = (0..n_s).map(|_| r.random_range(0..n_a)).collect();
        let iterative = evaluate_policy_exact(&mdp, &policy(&pi), 1e-12).unwrap();
        let direct = policy_value_linear(&mdp, &pi);
        assert!(sup(&iterative.0, &direct) < 1e-9, "seed {seed}");
    }
    let map = envs::default_map();
    for alpha in [0.0, 0.1, 0.3, 0.5] {
        let mdp = envs::windy_walk(&map, alpha).unwrap();
        let pi = greedy_policy(&value_iteration(&mdp, 1e-10, 100_000).unwrap().q);
        let iterative = evaluate_policy_exact(&mdp, &pi, 1e-12).unwrap();
        assert!(sup(&iterative.0, &policy_value_linear(&mdp, &pi.0)) < 1e-9);
    }
}

#[test]
fn value_iteration_matches_scalar_reference() {
    for seed in 0..40 {
        let mut r = rng(100 + seed);
        let n_s = r.random_range(1..=8);
        let n_a = r.random_range(1..=4);
        let mdp = random_mdp(&mut r, n_s, n_a, 0.9).unwrap();
        let v = value_iteration(&mdp, 1e-11, 100_000).unwrap();
        assert!(v.converged);
        assert!(sup(&v.value.0, &scalar_value_iteration(&mdp, 1e-11)) < 1e-9);
        // the greedy policy is optimal: its exact value equals V*
        let pi = greedy_policy(&v.q);
        assert!(sup(&policy_value_linear(&mdp, &pi.0), &v.value.0) < 1e-8);
    }
}

#[test]
fn optimal_value_beats_every_deterministic_policy() {
    for seed in 0..20 {
        let mut r = rng(200 + seed);
        let n_s = r.random_range(1..=4);
        let n_a = r.random_range(1..=3);
        let mdp = random_mdp(&mut r, n_s, n_a, 0.8).unwrap();
        let v = value_iteration(&mdp, 1e-12, 100_000).unwrap().value;
        let best = all_policies(n_s, n_a)
            .iter()
            .map(|pi| policy_value_linear(&mdp, pi)[0])
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((best - v[0]).abs() < 1e-9);
    }
}

#[test]
fn robust_value_of_singleton_is_the_optimal_value() {
    for seed in 0..20 {
        let set = random_set(300 + seed, 4, 3, 1);
        let rvi =
            robust_value_iteration(&rectangular_closure(&set).unwrap(), 1e-11, 100_000).unwrap();
        let vi = value_iteration(set.reference(), 1e-11, 100_000).unwrap();
        assert!(sup(&rvi.robust_value.0, &vi.value.0) < 1e-9);
    }
}

#[test]
fn robust_value_matches_brute_force_over_the_closure() {
    for seed in 0..20 {
        let set = random_set(400 + seed, 3, 2, 2);
        let closure = rectangular_closure(&set).unwrap();
        let rvi = robust_value_iteration(&closure, 1e-12, 100_000).unwrap();
        let (max_min, _) = exhaustive_saddle(&set);
        assert!((rvi.robust_value[0] - max_min).abs() < 1e-8);
        // no member of the set is harder than the closure
        for m in set.models() {
            let v = value_iteration(m, 1e-12, 100_000).unwrap().value;
            assert!(rvi
                .robust_value
                .0
                .iter()
                .zip(&v.0)
                .all(|(r, x)| *r <= x + 1e-9));
        }
        // the closure's kernels are the product kernels
        for choice in all_choices(6, 2) {
            let lib = closure.kernel(&choice).unwrap();
            let oracle = product_kernel(&set, &choice);
            assert_eq!(lib.transition_tensor(), oracle.transition_tensor());
            assert_eq!(lib.reward_tensor(), oracle.reward_tensor());
        }
    }
}

#[test]
fn stronger_wind_never_helps() {
    let map = envs::default_map();
    let set = envs::windy_walk_family(&map).materialize().unwrap();
    let values: Vec<f64> = set
        .models()
        .iter()
        .map(|m| value_iteration(m, 1e-10, 100_000).unwrap().value[0])
        .collect();
    for w in values.windows(2) {
        assert!(w[1] <= w[0] + 1e-9, "{values:?}");
    }
    assert!((values[0] - bfs_value(5, 0.95)).abs() < 1e-8);
    // the robust value is the value of the strongest wind
    let rvi = robust_value_iteration(&rectangular_closure(&set).unwrap(), 1e-10, 100_000).unwrap();
    assert!((rvi.robust_value[0] - values[24]).abs() < 1e-8);
}

#[test]
fn wind_pushes_west_with_the_zone_exponent() {
    let map = GridMap::parse(
        "S...G\n.....\n",
        vec![WindZone {
            row: 0,
            col: 2,
            exponent: 2,
        }],
    )
    .unwrap();
    let alpha: f64 = 0.4;
    let mdp = envs::windy_walk(&map, alpha).unwrap();
    let s = map.index(0, 2);
    let east = mdp.transition_row(s, 2);
    assert!((east[map.index(0, 3)] - (1.0 - alpha * alpha)).abs() < 1e-15);
    assert!((east[map.index(0, 1)] - alpha * alpha).abs() < 1e-15);
    // a singleton set closes to itself
    let set = DiscreteUncertaintySet::from_models(vec![mdp.clone()]).unwrap();
    assert_eq!(
        rectangular_closure(&set).unwrap().distinct_kernel_count(),
        Some(1)
    );
}
