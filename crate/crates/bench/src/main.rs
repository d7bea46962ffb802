use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use socnav_core::experiment::{self, ExperimentConfig, Workers, OUTPUT_DIR_ENV, PAPER_TRIALS};
use socnav_core::scenario::{find_condition, sample_scenario};
use socnav_core::Error;

#[derive(Parser)]
#[command(name = "socnav-bench", version, about = "Run and analyse social-navigation complexity sweeps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured sweep and write the result artifacts.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Use 500 trials per condition.
        #[arg(long)]
        paper: bool,
        #[arg(long)]
        workers: Option<usize>,
        /// Overrides `output_dir` from the config.
        #[arg(long, env = OUTPUT_DIR_ENV)]
        output_dir: Option<PathBuf>,
    },
    /// Recompute correlations.json from summary.json.
    Analyze { dir: PathBuf },
    /// Re-run one recorded trial and print its trajectory CSV.
    Replay {
        dir: PathBuf,
        condition: String,
        method: String,
        trial: usize,
    },
    /// Print the scenario JSON for a condition and seed.
    Gen {
        #[arg(long)]
        condition: String,
        #[arg(long)]
        seed: u64,
    },
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run { config, paper, workers, output_dir } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if paper {
                cfg.trials_per_condition = PAPER_TRIALS;
            }
            if let Some(n) = workers {
                cfg.workers = Workers::Count(n);
            }
            if let Some(dir) = output_dir {
                cfg.output_dir = dir;
            }
            let resolved = cfg.resolve()?;
            let out = experiment::run_experiments(&resolved)?;
            eprintln!("{} trials written to {}", out.rows.len(), resolved.output_dir.display());
            for r in &out.correlations.reports {
                let rho = r.rho.map_or("n/a".to_string(), |x| format!("{x:.3}"));
                let p = r.p_value.map_or("n/a".to_string(), |x| format!("{x:.2e}"));
                eprintln!("{:<15} {:<18} rho={rho:>7} p={p:>9} n={}", r.factor.as_str(), r.metric.as_str(), r.n);
            }
        }
        Command::Analyze { dir } => {
            let c = experiment::analyze(&dir)?;
            eprintln!("{} reports written to {}", c.reports.len(), dir.join(experiment::CORRELATIONS_FILE).display());
        }
        Command::Replay { dir, condition, method, trial } => {
            let (_, csv) = experiment::replay(&dir, &condition, &method, trial)?;
            print!("{csv}");
        }
        Command::Gen { condition, seed } => {
            let cond = find_condition(&condition)?;
            println!("{}", sample_scenario(&cond, seed)?.to_json_pretty());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
