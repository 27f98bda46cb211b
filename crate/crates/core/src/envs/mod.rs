//! Benchmark MDP families.

pub mod gridmap;
pub mod random;
pub mod windy;

pub use gridmap::{Cell, Direction, GridMap, WindZone};
pub use random::{random_family, random_mdp};
pub use windy::{
    default_map, default_wind_zones, windy_walk, windy_walk_continuous_family, windy_walk_family,
    windy_walk_grid_family,
};
