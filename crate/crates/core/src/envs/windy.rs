//! Windy-walk gridworld.
//!
//! Actions are N, S, E, W (indices 0..4). Moves are deterministic outside
//! wind zones. In a zone with exponent `k`, with `p = alpha^k`:
//! W always moves west; N and S attempt their move with probability `1 - p`
//! and are pushed west otherwise; E moves east with probability `1 - p` and
//! west otherwise. Any move into a wall or the border leaves the agent in
//! place. Every transition costs -1 except from the absorbing goal. Wall
//! cells are kept as unreachable absorbing states so the state index equals
//! the cell index.

use std::sync::Arc;

use super::gridmap::{Cell, Direction, GridMap, WindZone};
use crate::error::{usage, Result};
use crate::mdp::TabularMdp;
use crate::uncertainty::{grid_points, Generator, ModelFamily, ParamBox};

pub const WINDY_DISCOUNT: f64 = 0.95;
pub const ALPHA_MAX: f64 = 0.5;
/// Size of the discrete alpha grid over `[0, ALPHA_MAX]`.
pub const ALPHA_GRID_POINTS: usize = 25;

/// Shipped 6x6 layout: three west-east corridors separated by wall rows.
pub const DEFAULT_MAP: &str = include_str!("../../data/windy_walk.txt");

/// Corridor cells of [`DEFAULT_MAP`]: north (exponent 1), middle (3) and the
/// two-row south corridor (6).
pub fn default_wind_zones() -> Vec<WindZone> {
    let mut zones = Vec::new();
    for col in 1..=3 {
        zones.push(WindZone {
            row: 0,
            col,
            exponent: 1,
        });
    }
    for col in 1..=3 {
        zones.push(WindZone {
            row: 2,
            col,
            exponent: 3,
        });
    }
    for row in 4..=5 {
        for col in 1..=3 {
            zones.push(WindZone {
                row,
                col,
                exponent: 6,
            });
        }
    }
    zones
}

pub fn default_map() -> GridMap {
    GridMap::parse(DEFAULT_MAP, default_wind_zones()).expect("shipped map is valid")
}

/// Builds the windy-walk MDP for wind strength `alpha` in `[0, 0.5]`.
pub fn windy_walk(map: &GridMap, alpha: f64) -> Result<TabularMdp> {
    if !(0.0..=ALPHA_MAX).contains(&alpha) {
        return Err(usage(format!(
            "alpha must lie in [0, {ALPHA_MAX}], got {alpha}"
        )));
    }
    let n = map.n_cells();
    let n_a = Direction::ALL.len();
    let mut t = vec![0.0; n * n_a * n];
    let mut r = vec![0.0; n * n_a * n];
    let mut absorbing = vec![false; n];
    for s in 0..n {
        let (row, col) = map.position(s);
        let terminal = matches!(map.cell(row, col), Cell::Goal | Cell::Wall);
        absorbing[s] = terminal;
        for dir in Direction::ALL {
            let base = (s * n_a + dir.action()) * n;
            if terminal {
                t[base + s] = 1.0;
                continue;
            }
            let push = map.wind_exponent(s).map_or(0.0, |k| alpha.powi(k as i32));
            let west = map.step(s, Direction::West);
            if dir == Direction::West || push == 0.0 {
                t[base + map.step(s, dir)] += 1.0;
            } else {
                t[base + map.step(s, dir)] += 1.0 - push;
                t[base + west] += push;
            }
            for sn in 0..n {
                if t[base + sn] > 0.0 {
                    r[base + sn] = -1.0;
                }
            }
        }
    }
    TabularMdp::new(n, n_a, t, r, WINDY_DISCOUNT, map.start(), absorbing)
}

fn generator(map: &GridMap) -> Generator {
    let map = map.clone();
    Arc::new(move |p: &[f64]| windy_walk(&map, p[0]))
}

/// Discrete family over the 25-point alpha grid on `[0, 0.5]`.
pub fn windy_walk_family(map: &GridMap) -> ModelFamily {
    windy_walk_grid_family(map, ALPHA_GRID_POINTS).expect("default grid is valid")
}

/// Discrete family over an inclusive `points`-point alpha grid.
pub fn windy_walk_grid_family(map: &GridMap, points: usize) -> Result<ModelFamily> {
    let bounds = ParamBox::new(vec![0.0], vec![ALPHA_MAX])?;
    ModelFamily::discrete("windy-walk", grid_points(&bounds, points)?, generator(map))
}

/// Continuous family, `alpha` in `[0, 0.5]`.
pub fn windy_walk_continuous_family(map: &GridMap) -> ModelFamily {
    let bounds = ParamBox::new(vec![0.0], vec![ALPHA_MAX]).expect("valid bounds");
    ModelFamily::continuous("windy-walk", bounds, generator(map))
}

#[cfg(test)]
mod tests {
    use super::*;

    const N: usize = 0;
    const E: usize = 2;
    const W: usize = 3;

    #[test]
    fn north_corridor_split() {
        let map = default_map();
        let mdp = windy_walk(&map, 0.5).unwrap();
        let s = map.index(0, 2);
        let row = mdp.transition_row(s, E);
        assert_eq!(row[map.index(0, 3)], 0.5);
        assert_eq!(row[map.index(0, 1)], 0.5);
        // N hits the border: stays with 1 - alpha
        let row = mdp.transition_row(s, N);
        assert_eq!(row[s], 0.5);
        assert_eq!(row[map.index(0, 1)], 0.5);
        assert_eq!(mdp.transition_row(s, W)[map.index(0, 1)], 1.0);
    }

    #[test]
    fn middle_and_south_exponents() {
        let map = default_map();
        let mdp = windy_walk(&map, 0.5).unwrap();
        let s = map.index(2, 2);
        assert_eq!(mdp.transition_row(s, E)[map.index(2, 1)], 0.125);
        let s = map.index(4, 2);
        let south = mdp.transition_row(s, 1);
        assert_eq!(south[map.index(5, 2)], 1.0 - 0.5f64.powi(6));
        assert_eq!(south[map.index(4, 1)], 0.5f64.powi(6));
    }

    #[test]
    fn zero_alpha_is_deterministic() {
        let mdp = windy_walk(&default_map(), 0.0).unwrap();
        assert!(mdp
            .transition_tensor()
            .iter()
            .all(|&p| p == 0.0 || p == 1.0));
    }

    #[test]
    fn goal_and_walls_absorb() {
        let map = default_map();
        let mdp = windy_walk(&map, 0.3).unwrap();
        assert!(mdp.is_absorbing(map.goal()));
        assert!(mdp.is_absorbing(map.index(1, 2)));
        assert!(!mdp.is_absorbing(map.start()));
        assert_eq!(mdp.n_states(), 36);
        assert_eq!(mdp.n_actions(), 4);
        assert_eq!(mdp.discount(), 0.95);
    }

    #[test]
    fn alpha_out_of_range() {
        assert!(windy_walk(&default_map(), 0.6).is_err());
        assert!(windy_walk(&default_map(), -0.1).is_err());
    }

    #[test]
    fn family_shape() {
        let fam = windy_walk_family(&default_map());
        let set = fam.materialize().unwrap();
        assert_eq!(set.len(), 25);
        assert_eq!(set.parameter(24), &[0.5]);
        assert!(set
            .models()
            .iter()
            .all(|m| m.same_structure(set.reference())));
    }
}
