//! Experiment configuration.
//!
//! A run is described by one JSON document. Command-line flags override the
//! matching fields after the file is loaded; anything not given in either
//! place takes the defaults below. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cmaes::CmaesConfig;
use crate::envs::{self, GridMap, WindZone};
use crate::error::{Error, Result};
use crate::iwocs::{IwocsOptions, Searcher};
use crate::search::Evaluator;
use crate::uncertainty::{grid_points, FamilyDomain, ModelFamily, ParamBox};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Vi,
    Rvi,
    Iwocs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SearcherKind {
    Grid,
    Cmaes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum EvaluatorKind {
    Exact,
    Mc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EnvironmentSpec {
    /// Windy walk on the shipped map unless `map_file` is given.
    WindyWalk {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        map_file: Option<PathBuf>,
        /// `(row, col, exponent)` triples; defaults to the shipped corridors
        /// when the shipped map is used and to none otherwise.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        wind_zones: Option<Vec<WindZone>>,
    },
    /// Random family on `[0, 1]^dimension`, seeded by the root seed.
    Random {
        n_states: usize,
        n_actions: usize,
        #[serde(default = "one")]
        dimension: usize,
    },
}

fn one() -> usize {
    1
}

impl Default for EnvironmentSpec {
    fn default() -> Self {
        EnvironmentSpec::WindyWalk {
            map_file: None,
            wind_zones: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FamilySpec {
    /// Box bounds; default to the environment's natural box.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lower: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub upper: Option<Vec<f64>>,
    /// Points per dimension of the discrete grid (25 for windy walk, 5 otherwise).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_points: Option<usize>,
    /// Model solved by `vi`; defaults to the box lower corner.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parameter: Option<Vec<f64>>,
    /// IWOCS seed model; defaults to the first grid point (grid search) or
    /// the box midpoint (CMA-ES).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t0: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CmaesSpec {
    pub population: usize,
    pub generations: usize,
    pub mean: f64,
    pub std: f64,
}

impl Default for CmaesSpec {
    fn default() -> Self {
        CmaesSpec {
            population: 100,
            generations: 6,
            mean: 0.5,
            std: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverParams {
    pub vi_tol: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vi_max_iters: Option<usize>,
    pub rvi_tol: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rvi_max_iters: Option<usize>,
    pub epsilon: f64,
    pub max_iterations: usize,
    pub searcher: SearcherKind,
    pub evaluator: EvaluatorKind,
    pub exact_tol: f64,
    pub mc_rollouts: usize,
    pub mc_horizon: usize,
    pub duplicate_tol: f64,
    pub cmaes: CmaesSpec,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            vi_tol: 1e-3,
            vi_max_iters: None,
            rvi_tol: 1e-6,
            rvi_max_iters: None,
            epsilon: 1e-2,
            max_iterations: 25,
            searcher: SearcherKind::Grid,
            evaluator: EvaluatorKind::Exact,
            exact_tol: 1e-8,
            mc_rollouts: 300,
            mc_horizon: 10_000,
            duplicate_tol: 1e-6,
            cmaes: CmaesSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScalingSpec {
    /// Family sizes `c` to sweep.
    pub sizes: Vec<usize>,
    pub n_states: usize,
    pub n_actions: usize,
    /// Timings keep the fastest of this many repetitions.
    pub repetitions: usize,
}

impl Default for ScalingSpec {
    fn default() -> Self {
        ScalingSpec {
            sizes: vec![5, 25, 125],
            n_states: 40,
            n_actions: 4,
            repetitions: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub environment: EnvironmentSpec,
    pub family: FamilySpec,
    pub algorithm: Algorithm,
    pub solver: SolverParams,
    /// Root seed for every random draw.
    pub seed: u64,
    pub output_dir: PathBuf,
    pub scaling: ScalingSpec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            environment: EnvironmentSpec::default(),
            family: FamilySpec::default(),
            algorithm: Algorithm::Iwocs,
            solver: SolverParams::default(),
            seed: 0,
            output_dir: PathBuf::from("out"),
            scaling: ScalingSpec::default(),
        }
    }
}

/// Flag values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub algorithm: Option<Algorithm>,
    pub searcher: Option<SearcherKind>,
    pub evaluator: Option<EvaluatorKind>,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| config_err(e.to_string()))
    }

    /// Loads a config file; relative `map_file` paths resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        if let EnvironmentSpec::WindyWalk {
            map_file: Some(map),
            ..
        } = &mut cfg.environment
        {
            if map.is_relative() {
                if let Some(dir) = path.parent() {
                    *map = dir.join(&*map);
                }
            }
        }
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(out) = &o.out {
            self.output_dir = out.clone();
        }
        if let Some(a) = o.algorithm {
            self.algorithm = a;
        }
        if let Some(s) = o.searcher {
            self.solver.searcher = s;
        }
        if let Some(e) = o.evaluator {
            self.solver.evaluator = e;
        }
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.solver;
        for (name, v) in [
            ("vi_tol", s.vi_tol),
            ("rvi_tol", s.rvi_tol),
            ("epsilon", s.epsilon),
            ("exact_tol", s.exact_tol),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(config_err(format!(
                    "solver.{name} must be positive, got {v}"
                )));
            }
        }
        if s.mc_rollouts == 0 || s.mc_horizon == 0 {
            return Err(config_err(
                "solver.mc_rollouts and solver.mc_horizon must be >= 1",
            ));
        }
        if s.cmaes.population < 2 || s.cmaes.generations < 1 || !(s.cmaes.std > 0.0) {
            return Err(config_err(
                "solver.cmaes needs population >= 2, generations >= 1, std > 0",
            ));
        }
        if let EnvironmentSpec::Random {
            n_states,
            n_actions,
            dimension,
        } = self.environment
        {
            if n_states == 0 || n_actions == 0 || dimension == 0 {
                return Err(config_err("random environment sizes must be >= 1"));
            }
        }
        if self.family.grid_points.is_some_and(|g| g < 2) {
            return Err(config_err("family.grid_points must be >= 2"));
        }
        if self.scaling.repetitions == 0 || self.scaling.sizes.contains(&0) {
            return Err(config_err("scaling needs repetitions >= 1 and sizes >= 1"));
        }
        // building the family checks bounds, map and parameters
        self.experiment_family()?;
        Ok(())
    }

    pub fn evaluator(&self) -> Evaluator {
        match self.solver.evaluator {
            EvaluatorKind::Exact => Evaluator::Exact {
                tol: self.solver.exact_tol,
            },
            EvaluatorKind::Mc => Evaluator::MonteCarlo {
                n_rollouts: self.solver.mc_rollouts,
                horizon: self.solver.mc_horizon,
                seed: self.seed,
            },
        }
    }

    pub fn cmaes_config(&self, dimension: usize) -> CmaesConfig {
        CmaesConfig {
            population: self.solver.cmaes.population,
            generations: self.solver.cmaes.generations,
            initial_mean: vec![self.solver.cmaes.mean; dimension],
            initial_std: self.solver.cmaes.std,
            seed: self.seed,
        }
    }

    pub fn grid_points(&self) -> usize {
        self.family.grid_points.unwrap_or(match self.environment {
            EnvironmentSpec::WindyWalk { .. } => envs::windy::ALPHA_GRID_POINTS,
            EnvironmentSpec::Random { .. } => 5,
        })
    }

    /// Map used by a windy-walk environment.
    pub fn grid_map(&self) -> Result<Option<GridMap>> {
        match &self.environment {
            EnvironmentSpec::WindyWalk {
                map_file,
                wind_zones,
            } => {
                let map = match map_file {
                    None => GridMap::parse(
                        envs::windy::DEFAULT_MAP,
                        wind_zones.clone().unwrap_or_else(envs::default_wind_zones),
                    )?,
                    Some(path) => {
                        let text = std::fs::read_to_string(path).map_err(|e| {
                            config_err(format!("cannot read map {}: {e}", path.display()))
                        })?;
                        GridMap::parse(&text, wind_zones.clone().unwrap_or_default())?
                    }
                };
                Ok(Some(map))
            }
            EnvironmentSpec::Random { .. } => Ok(None),
        }
    }

    /// The environment's continuous family with the configured box.
    pub fn experiment_family(&self) -> Result<ModelFamily> {
        let base = match &self.environment {
            EnvironmentSpec::WindyWalk { .. } => {
                envs::windy_walk_continuous_family(&self.grid_map()?.expect("windy walk has a map"))
            }
            EnvironmentSpec::Random {
                n_states,
                n_actions,
                dimension,
            } => envs::random_family(self.seed, *n_states, *n_actions, *dimension)?,
        };
        let natural = base
            .bounds()
            .expect("builtin families are continuous")
            .clone();
        let lower = self
            .family
            .lower
            .clone()
            .unwrap_or_else(|| natural.lower().to_vec());
        let upper = self
            .family
            .upper
            .clone()
            .unwrap_or_else(|| natural.upper().to_vec());
        let bounds = ParamBox::new(lower, upper).map_err(|e| config_err(e.to_string()))?;
        if bounds.dimension() != natural.dimension() {
            return Err(config_err(format!(
                "family bounds have dimension {}, environment expects {}",
                bounds.dimension(),
                natural.dimension()
            )));
        }
        if !natural.contains(bounds.lower()) || !natural.contains(bounds.upper()) {
            return Err(config_err(format!(
                "family bounds must lie inside {:?}..{:?}",
                natural.lower(),
                natural.upper()
            )));
        }
        for (name, p) in [
            ("parameter", &self.family.parameter),
            ("t0", &self.family.t0),
        ] {
            if let Some(p) = p {
                if !bounds.contains(p) {
                    return Err(config_err(format!(
                        "family.{name} {p:?} lies outside the box"
                    )));
                }
            }
        }
        Ok(base.with_domain(FamilyDomain::Continuous(bounds)))
    }

    /// Discrete grid family over the configured box.
    pub fn grid_family(&self) -> Result<ModelFamily> {
        let family = self.experiment_family()?;
        let points = grid_points(family.bounds().expect("continuous"), self.grid_points())?;
        Ok(family.with_domain(FamilyDomain::Discrete(points)))
    }

    /// Family, searcher and options for an IWOCS run.
    pub fn iwocs_setup(&self) -> Result<(ModelFamily, Searcher, IwocsOptions)> {
        let (family, searcher) = match self.solver.searcher {
            SearcherKind::Grid => {
                let family = self.grid_family()?;
                let set = family.materialize()?;
                (family, Searcher::Grid(set))
            }
            SearcherKind::Cmaes => {
                let family = self.experiment_family()?;
                let cfg = self.cmaes_config(family.dimension());
                (family, Searcher::Cmaes(cfg))
            }
        };
        let opts = IwocsOptions {
            t0: self.family.t0.clone(),
            max_iterations: self.solver.max_iterations,
            epsilon: self.solver.epsilon,
            vi_tol: self.solver.vi_tol,
            vi_max_iters: self.solver.vi_max_iters,
            evaluator: self.evaluator(),
            duplicate_tol: self.solver.duplicate_tol,
        };
        Ok((family, searcher, opts))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse_from_empty_object() {
        let cfg = ExperimentConfig::from_json("{}").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        cfg.validate().unwrap();
        assert_eq!(cfg.grid_family().unwrap().materialize().unwrap().len(), 25);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(ExperimentConfig::from_json(r#"{"algo": "vi"}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"solver": {"tolerance": 1}}"#).is_err());
        assert!(ExperimentConfig::from_json(
            r#"{"environment": {"kind": "windy-walk", "alpha": 1}}"#
        )
        .is_err());
    }

    #[test]
    fn overrides_take_precedence() {
        let mut cfg = ExperimentConfig::from_json(r#"{"seed": 3, "algorithm": "rvi"}"#).unwrap();
        cfg.apply(&Overrides {
            seed: Some(9),
            algorithm: Some(Algorithm::Vi),
            evaluator: Some(EvaluatorKind::Mc),
            ..Overrides::default()
        });
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.algorithm, Algorithm::Vi);
        assert_eq!(cfg.solver.evaluator, EvaluatorKind::Mc);
        assert_eq!(cfg.solver.searcher, SearcherKind::Grid);
    }

    #[test]
    fn validation_catches_bad_values() {
        let bad = [
            r#"{"solver": {"epsilon": 0}}"#,
            r#"{"family": {"grid_points": 1}}"#,
            r#"{"family": {"upper": [0.9]}}"#,
            r#"{"family": {"lower": [0.0, 0.0], "upper": [0.5, 0.5]}}"#,
            r#"{"family": {"t0": [0.7]}}"#,
            r#"{"environment": {"kind": "random", "n_states": 0, "n_actions": 2}}"#,
            r#"{"environment": {"kind": "windy-walk", "wind_zones": [[1, 1, 1]]}}"#,
        ];
        for text in bad {
            let cfg = ExperimentConfig::from_json(text).unwrap();
            assert!(cfg.validate().is_err(), "{text} should be rejected");
        }
    }

    #[test]
    fn random_environment_family() {
        let cfg = ExperimentConfig::from_json(
            r#"{"environment": {"kind": "random", "n_states": 4, "n_actions": 2, "dimension": 2},
                "family": {"grid_points": 3}}"#,
        )
        .unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.grid_family().unwrap().materialize().unwrap().len(), 9);
    }
}
