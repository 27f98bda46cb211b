//! Tabular robust MDP solvers.
//!
//! * [`mdp`]: finite MDPs, value iteration, exact and Monte-Carlo policy evaluation
//! * [`uncertainty`]: parameterized model families, discrete sets, rectangular closures
//! * [`robust`]: robust Bellman operator and robust value iteration
//! * [`cmaes`] and [`search`]: worst-case model search for a fixed policy
//! * [`iwocs`]: incremental worst-case search over a growing discrete set
//! * [`envs`]: windy-walk gridworld and random families
//! * [`harness`]: experiment configuration and the commands behind the CLI

// `!(x > 0.0)` is used on purpose so NaN inputs are rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cmaes;
pub mod envs;
pub mod error;
pub mod harness;
pub mod iwocs;
pub mod mdp;
pub mod robust;
pub mod search;
pub mod uncertainty;

pub use error::{Error, Result};
