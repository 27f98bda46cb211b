use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use iwocs::harness::{
    cmd_compare, cmd_scaling, cmd_solve, cmd_validate_map, Algorithm, EvaluatorKind,
    ExperimentConfig, Overrides, RunArtifacts, SearcherKind,
};
use iwocs::Error;

/// Robust MDP experiments: value iteration, robust value iteration and
/// incremental worst-case search.
#[derive(Parser)]
#[command(name = "iwocs", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one algorithm and write its tables, traces and summary.
    Solve(Common),
    /// Run RVI and IWOCS on the same set and write a convergence comparison.
    Compare(Common),
    /// Time RVI against IWOCS on random families of growing size.
    Scaling(Common),
    /// Parse a map and check that it builds a valid windy walk.
    ValidateMap {
        #[command(flatten)]
        common: Common,
        /// Map file; defaults to the config's map.
        #[arg(long)]
        map: Option<PathBuf>,
    },
}

/// Flags shared by every subcommand; they override the config file.
#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    algo: Option<Algorithm>,
    #[arg(long, value_enum)]
    searcher: Option<SearcherKind>,
    #[arg(long, value_enum)]
    evaluator: Option<EvaluatorKind>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        cfg.apply(&Overrides {
            seed: self.seed,
            out: self.out.clone(),
            algorithm: self.algo,
            searcher: self.searcher,
            evaluator: self.evaluator,
        });
        Ok(cfg)
    }
}

fn report(artifacts: &RunArtifacts) {
    for f in &artifacts.files {
        println!("wrote {}", f.display());
    }
    if let Some(results) = artifacts.summary.get("results") {
        println!(
            "{}",
            serde_json::to_string_pretty(results).unwrap_or_default()
        );
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Solve(c) => report(&cmd_solve(&c.load()?)?),
        Command::Compare(c) => {
            let artifacts = cmd_compare(&c.load()?)?;
            report(&artifacts);
            if let Some(gap) = artifacts.summary["results"]["terminal_gap"].as_f64() {
                println!("terminal gap |V_iwocs(s0) - V_rvi(s0)| = {gap:e}");
            }
        }
        Command::Scaling(c) => report(&cmd_scaling(&c.load()?)?),
        Command::ValidateMap { common, map } => {
            let r = cmd_validate_map(&common.load()?, map.as_deref())?;
            println!("{}", serde_json::to_string_pretty(&r)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::Usage(_) | Error::MapParse { .. } | Error::Json(_) => {
                    ExitCode::from(2)
                }
                _ => ExitCode::FAILURE,
            }
        }
    }
}
