use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lcbo_harness::config::{ExperimentConfig, Method, ProblemKind};
use lcbo_harness::experiment::run_experiment;
use lcbo_harness::report::aggregate_dir;
use lcbo_harness::HarnessError;

#[derive(Parser)]
#[command(name = "lcbo", version, about = "Local constrained Bayesian optimization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run repetitions and write per-seed traces plus the aggregate.
    Run {
        /// TOML file; flags below override its values.
        #[arg(long)]
        config: Option<PathBuf>,
        /// toy-circle | synthetic | truss | beam
        #[arg(long)]
        problem: Option<String>,
        /// Dimension of the synthetic problem.
        #[arg(long)]
        dim: Option<usize>,
        /// lcbo | random-search
        #[arg(long)]
        method: Option<String>,
        /// Evaluations per repetition.
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long)]
        reps: Option<usize>,
        /// Base seed; repetition r uses seed + r.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        plots: bool,
    },
    /// Recompute aggregate.csv from the trace files in a directory.
    Aggregate {
        dir: PathBuf,
        #[arg(long)]
        plots: bool,
    },
    /// Parse and check a config file without running it.
    ValidateConfig { config: PathBuf },
}

fn execute(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Run { config, problem, dim, method, budget, reps, seed, out, plots } => {
            let mut cfg = match config {
                Some(path) => ExperimentConfig::from_file(&path)?,
                None => ExperimentConfig::default(),
            };
            if let Some(p) = problem {
                cfg.problem = p.parse::<ProblemKind>()?;
            }
            if let Some(d) = dim {
                cfg.dim = d;
            }
            if let Some(m) = method {
                cfg.method = m.parse::<Method>()?;
            }
            if let Some(b) = budget {
                cfg.budget = b;
            }
            if let Some(r) = reps {
                cfg.repetitions = r;
            }
            if let Some(s) = seed {
                cfg.base_seed = s;
            }
            if let Some(o) = out {
                cfg.out = o;
            }
            cfg.plots |= plots;
            let output = run_experiment(&cfg)?;
            for run in &output.runs {
                let best = run.rows.last().map_or(f64::INFINITY, |r| r.best_feasible);
                println!("seed {}: best feasible {best}, {} iterations, {} oracle calls", run.seed, run.iterations, run.oracle_calls);
            }
            println!("wrote {}", output.aggregate_file.display());
        }
        Command::Aggregate { dir, plots } => {
            let rows = aggregate_dir(&dir, plots)?;
            println!("aggregated {} rows into {}", rows.len(), dir.join("aggregate.csv").display());
        }
        Command::ValidateConfig { config } => {
            let cfg = ExperimentConfig::from_file(&config)?;
            cfg.validate()?;
            println!("{}: ok", config.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
