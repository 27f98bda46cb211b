//! The commands behind the CLI.
//!
//! CSV schemas (all with a header row):
//!
//! | file | columns |
//! |------|---------|
//! | `value.csv` | `state,value` |
//! | `q.csv` | `state,q_0,...,q_{A-1}` |
//! | `policy.csv` | `state,action` |
//! | `rvi_trace.csv` | `iteration,value_at_start_state,residual,abs_error` |
//! | `iwocs_trace.csv` | `iteration,param_0,...,adversarial_value,candidate_value,gap,status` |
//! | `cmaes_history.csv` | `iteration,generation,best_value_so_far,mean_value,step_size` |
//! | `compare.csv` | `series,x,value_at_start_state,abs_error` |
//! | `scaling.csv` | `c,rvi_seconds,iwocs_seconds,iwocs_iterations,iwocs_solve_seconds_per_iteration,vi_seconds` |
//!
//! CSV bodies depend only on the config and seed; timings and timestamps go
//! to `summary.json` (and `scaling.csv`, which exists to report them).

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::{json, Value};

use super::config::{Algorithm, ExperimentConfig};
use crate::envs::{self, GridMap};
use crate::error::Result;
use crate::iwocs::{run_iwocs, IwocsOptions, IwocsResult, Searcher};
use crate::mdp::{
    default_max_iters, greedy_policy, value_iteration, DeterministicPolicy, QFunction,
    ValueFunction,
};
use crate::robust::{robust_value_iteration, RobustSolveReport};
use crate::uncertainty::{grid_points, rectangular_closure, DiscreteUncertaintySet, FamilyDomain};

/// Files written by a command plus the summary document.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub files: Vec<PathBuf>,
    pub summary: Value,
}

struct OutputDir {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl OutputDir {
    fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(OutputDir {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn write<F>(&mut self, name: &str, body: F) -> Result<()>
    where
        F: FnOnce(&mut BufWriter<File>) -> Result<()>,
    {
        let path = self.dir.join(name);
        let mut w = BufWriter::new(File::create(&path)?);
        body(&mut w)?;
        w.flush()?;
        self.files.push(path);
        Ok(())
    }

    fn finish(
        mut self,
        command: &str,
        cfg: &ExperimentConfig,
        started: Instant,
        results: Value,
    ) -> Result<RunArtifacts> {
        let summary = json!({
            "command": command,
            "version": env!("CARGO_PKG_VERSION"),
            "seed": cfg.seed,
            "config": cfg,
            "started_unix_seconds": SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs_f64() - started.elapsed().as_secs_f64())
                .unwrap_or(0.0),
            "wall_time_seconds": started.elapsed().as_secs_f64(),
            "results": results,
        });
        let path = self.dir.join("summary.json");
        fs::write(&path, serde_json::to_string_pretty(&summary)? + "\n")?;
        self.files.push(path);
        Ok(RunArtifacts {
            files: self.files,
            summary,
        })
    }
}

fn write_value<W: Write>(v: &ValueFunction, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["state", "value"])?;
    for (s, x) in v.as_slice().iter().enumerate() {
        w.write_record([s.to_string(), x.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn write_q<W: Write>(q: &QFunction, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["state".to_string()];
    header.extend((0..q.n_actions()).map(|a| format!("q_{a}")));
    w.write_record(&header)?;
    for s in 0..q.n_states() {
        let mut row = vec![s.to_string()];
        row.extend(q.row(s).iter().map(|x| x.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn write_policy<W: Write>(p: &DeterministicPolicy, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["state", "action"])?;
    for (s, a) in p.0.iter().enumerate() {
        w.write_record([s.to_string(), a.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct RviTraceRow {
    iteration: usize,
    value_at_start_state: f64,
    residual: f64,
    abs_error: f64,
}

/// RVI trace plus `|V_n(s0) - V(s0)|` against the run's final iterate.
fn write_rvi_trace<W: Write>(report: &RobustSolveReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let last = report
        .iterate_trace
        .last()
        .map_or(f64::NAN, |t| t.value_at_start_state);
    for t in &report.iterate_trace {
        w.serialize(RviTraceRow {
            iteration: t.iteration,
            value_at_start_state: t.value_at_start_state,
            residual: t.residual,
            abs_error: (t.value_at_start_state - last).abs(),
        })?;
    }
    w.flush()?;
    Ok(())
}

fn write_cmaes_history<W: Write>(result: &IwocsResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "iteration",
        "generation",
        "best_value_so_far",
        "mean_value",
        "step_size",
    ])?;
    for r in &result.trace.records {
        for g in &r.search_history {
            w.write_record([
                r.iteration.to_string(),
                g.generation.to_string(),
                g.best_value_so_far.to_string(),
                g.mean_value.to_string(),
                g.step_size.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn rvi_on(cfg: &ExperimentConfig, set: &DiscreteUncertaintySet) -> Result<RobustSolveReport> {
    let budget = cfg
        .solver
        .rvi_max_iters
        .unwrap_or_else(|| default_max_iters(cfg.solver.rvi_tol, set.reference().discount()));
    robust_value_iteration(&rectangular_closure(set)?, cfg.solver.rvi_tol, budget)
}

fn iwocs_summary(result: &IwocsResult) -> Value {
    json!({
        "iterations": result.trace.len(),
        "status": result.status().as_str(),
        "candidate_value": result.candidate_value(),
        "worst_parameter": result.worst_parameter,
        "worst_value": result.worst_value,
        "total_backups": result.total_backups(),
        "solved_parameters": result.solved.parameters(),
        "solve_seconds": result.trace.records.iter().map(|r| r.solve_seconds).sum::<f64>(),
        "search_seconds": result.trace.records.iter().map(|r| r.search_seconds).sum::<f64>(),
    })
}

/// Runs the configured algorithm and writes its tables, traces and summary.
pub fn cmd_solve(cfg: &ExperimentConfig) -> Result<RunArtifacts> {
    cfg.validate()?;
    let started = Instant::now();
    let mut out = OutputDir::create(&cfg.output_dir)?;
    let results = match cfg.algorithm {
        Algorithm::Vi => {
            let family = cfg.experiment_family()?;
            let parameter = cfg
                .family
                .parameter
                .clone()
                .unwrap_or_else(|| family.bounds().expect("continuous").lower().to_vec());
            let model = family.generate(&parameter)?;
            let budget = cfg
                .solver
                .vi_max_iters
                .unwrap_or_else(|| default_max_iters(cfg.solver.vi_tol, model.discount()));
            let sol = value_iteration(&model, cfg.solver.vi_tol, budget)?;
            out.write("value.csv", |w| write_value(&sol.value, w))?;
            out.write("q.csv", |w| write_q(&sol.q, w))?;
            out.write("policy.csv", |w| write_policy(&greedy_policy(&sol.q), w))?;
            json!({
                "parameter": parameter,
                "value_at_start_state": sol.value[model.start_state()],
                "iterations": sol.iterations,
                "residual": sol.residual,
                "converged": sol.converged,
            })
        }
        Algorithm::Rvi => {
            let set = cfg.grid_family()?.materialize()?;
            let report = rvi_on(cfg, &set)?;
            out.write("value.csv", |w| write_value(&report.robust_value, w))?;
            out.write("q.csv", |w| write_q(&report.robust_q, w))?;
            out.write("policy.csv", |w| {
                write_policy(&greedy_policy(&report.robust_q), w)
            })?;
            out.write("rvi_trace.csv", |w| write_rvi_trace(&report, w))?;
            json!({
                "models": set.len(),
                "robust_value_at_start_state": report.robust_value[set.reference().start_state()],
                "iterations": report.iterations(),
                "residual": report.residual(),
                "converged": report.converged,
            })
        }
        Algorithm::Iwocs => {
            let (family, searcher, opts) = cfg.iwocs_setup()?;
            let result = run_iwocs(&family, &searcher, &opts)?;
            let combined = result.aggregate.combined();
            out.write("value.csv", |w| write_value(&combined.state_values(), w))?;
            out.write("q.csv", |w| write_q(combined, w))?;
            out.write("policy.csv", |w| write_policy(result.policy(), w))?;
            out.write("iwocs_trace.csv", |w| result.trace.write_csv(w))?;
            if matches!(searcher, Searcher::Cmaes(_)) {
                out.write("cmaes_history.csv", |w| write_cmaes_history(&result, w))?;
            }
            iwocs_summary(&result)
        }
    };
    out.finish("solve", cfg, started, results)
}

#[derive(Serialize)]
struct CompareRow {
    series: &'static str,
    x: usize,
    value_at_start_state: f64,
    abs_error: f64,
}

/// Convergence comparison of RVI and IWOCS against the RVI fixed point.
///
/// RVI contributes one row per robust backup. IWOCS contributes one row per
/// completed iteration, placed at the cumulative number of standard backups
/// it has spent, so the x-axis counts backups rather than time.
pub fn cmd_compare(cfg: &ExperimentConfig) -> Result<RunArtifacts> {
    cfg.validate()?;
    let started = Instant::now();
    let mut out = OutputDir::create(&cfg.output_dir)?;
    let set = cfg.grid_family()?.materialize()?;
    let start = set.reference().start_state();
    let report = rvi_on(cfg, &set)?;
    let robust_value = report.robust_value[start];
    let (family, searcher, opts) = cfg.iwocs_setup()?;
    let result = run_iwocs(&family, &searcher, &opts)?;

    let mut rows: Vec<CompareRow> = report
        .iterate_trace
        .iter()
        .map(|t| CompareRow {
            series: "rvi",
            x: t.iteration,
            value_at_start_state: t.value_at_start_state,
            abs_error: (t.value_at_start_state - robust_value).abs(),
        })
        .collect();
    rows.extend(result.trace.records.iter().map(|r| CompareRow {
        series: "iwocs",
        x: r.cumulative_backups,
        value_at_start_state: r.candidate_value,
        abs_error: (r.candidate_value - robust_value).abs(),
    }));
    out.write("compare.csv", |w| {
        let mut c = csv::Writer::from_writer(w);
        for row in &rows {
            c.serialize(row)?;
        }
        c.flush()?;
        Ok(())
    })?;
    out.write("rvi_trace.csv", |w| write_rvi_trace(&report, w))?;
    out.write("iwocs_trace.csv", |w| result.trace.write_csv(w))?;

    let terminal_gap = (result.candidate_value() - robust_value).abs();
    let results = json!({
        "rvi_value_at_start_state": robust_value,
        "rvi_iterations": report.iterations(),
        "rvi_converged": report.converged,
        "iwocs": iwocs_summary(&result),
        "terminal_gap": terminal_gap,
    });
    out.finish("compare", cfg, started, results)
}

/// One line of the scaling report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingRow {
    pub c: usize,
    pub rvi_seconds: f64,
    pub iwocs_seconds: f64,
    pub iwocs_iterations: usize,
    /// Value-iteration time per IWOCS iteration, search excluded.
    pub iwocs_solve_seconds_per_iteration: f64,
    /// One value-iteration solve of the first member.
    pub vi_seconds: f64,
}

/// Times RVI and IWOCS on random families of growing size `c`.
pub fn scaling_rows(cfg: &ExperimentConfig) -> Result<Vec<ScalingRow>> {
    let spec = &cfg.scaling;
    let family = envs::random_family(cfg.seed, spec.n_states, spec.n_actions, 1)?;
    let bounds = family.bounds().expect("continuous").clone();
    let tol = cfg.solver.vi_tol;
    let mut rows = Vec::new();
    for &c in &spec.sizes {
        let params = if c == 1 {
            vec![bounds.midpoint()]
        } else {
            grid_points(&bounds, c)?
        };
        let grid_family = family.with_domain(FamilyDomain::Discrete(params));
        let set = grid_family.materialize()?;
        let budget = default_max_iters(tol, set.reference().discount());
        let closure = rectangular_closure(&set)?;
        let opts = IwocsOptions {
            max_iterations: cfg.solver.max_iterations,
            epsilon: cfg.solver.epsilon,
            vi_tol: tol,
            evaluator: cfg.evaluator(),
            ..IwocsOptions::default()
        };
        let searcher = Searcher::Grid(set.clone());
        let mut row = ScalingRow {
            c,
            rvi_seconds: f64::INFINITY,
            iwocs_seconds: f64::INFINITY,
            iwocs_iterations: 0,
            iwocs_solve_seconds_per_iteration: f64::INFINITY,
            vi_seconds: f64::INFINITY,
        };
        for _ in 0..spec.repetitions {
            let clock = Instant::now();
            robust_value_iteration(&closure, tol, budget)?;
            row.rvi_seconds = row.rvi_seconds.min(clock.elapsed().as_secs_f64());

            let clock = Instant::now();
            value_iteration(set.reference(), tol, budget)?;
            row.vi_seconds = row.vi_seconds.min(clock.elapsed().as_secs_f64());

            let clock = Instant::now();
            let result = run_iwocs(&grid_family, &searcher, &opts)?;
            row.iwocs_seconds = row.iwocs_seconds.min(clock.elapsed().as_secs_f64());
            row.iwocs_iterations = result.trace.len();
            let solve: f64 = result.trace.records.iter().map(|r| r.solve_seconds).sum();
            row.iwocs_solve_seconds_per_iteration = row
                .iwocs_solve_seconds_per_iteration
                .min(solve / result.trace.len() as f64);
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Writes `scaling.csv`; report only, no pass/fail.
pub fn cmd_scaling(cfg: &ExperimentConfig) -> Result<RunArtifacts> {
    cfg.validate()?;
    let started = Instant::now();
    let mut out = OutputDir::create(&cfg.output_dir)?;
    let rows = scaling_rows(cfg)?;
    out.write("scaling.csv", |w| {
        let mut c = csv::Writer::from_writer(w);
        for row in &rows {
            c.serialize(row)?;
        }
        c.flush()?;
        Ok(())
    })?;
    out.finish("scaling", cfg, started, json!({ "rows": rows }))
}

/// Summary of a parsed map.
#[derive(Debug, Clone, Serialize)]
pub struct MapReport {
    pub width: usize,
    pub height: usize,
    pub start: (usize, usize),
    pub goal: (usize, usize),
    pub wind_zones: usize,
    pub walls: usize,
    pub shortest_path: Option<usize>,
}

impl MapReport {
    pub fn of(map: &GridMap) -> Self {
        MapReport {
            width: map.width(),
            height: map.height(),
            start: map.position(map.start()),
            goal: map.position(map.goal()),
            wind_zones: map.wind_zones().len(),
            walls: (0..map.n_cells())
                .filter(|&i| {
                    let (r, c) = map.position(i);
                    map.cell(r, c) == envs::Cell::Wall
                })
                .count(),
            shortest_path: map.shortest_path_len(),
        }
    }
}

/// Parses the map named by `map_file` (or the config's map) and checks that
/// the goal is reachable and every alpha in the family box builds a valid MDP.
pub fn cmd_validate_map(cfg: &ExperimentConfig, map_file: Option<&Path>) -> Result<MapReport> {
    let map = match map_file {
        Some(path) => {
            let text = fs::read_to_string(path)?;
            let zones = match &cfg.environment {
                super::config::EnvironmentSpec::WindyWalk {
                    wind_zones: Some(z),
                    ..
                } => z.clone(),
                _ => Vec::new(),
            };
            GridMap::parse(&text, zones)?
        }
        None => cfg
            .grid_map()?
            .ok_or_else(|| crate::error::Error::Config("environment has no map".into()))?,
    };
    let report = MapReport::of(&map);
    if report.shortest_path.is_none() {
        return Err(crate::error::Error::MapParse {
            line: 0,
            message: "goal is unreachable from start".into(),
        });
    }
    for alpha in [0.0, envs::windy::ALPHA_MAX] {
        envs::windy_walk(&map, alpha)?;
    }
    Ok(report)
}
