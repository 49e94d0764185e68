use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use flcc::config::ExperimentConfig;
use flcc::experiment;
use flcc::mac::Mode;
use flcc::FlccError;

/// Federated learning over a clustered CSMA/CA network.
#[derive(Parser)]
#[command(name = "flcc", version)]
struct Cli {
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analytic vs simulated uplink success probability and capacity.
    NetAnalyze {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Federated training over the simulated network.
    FlRun {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_parser = parse_mode)]
        mode: Mode,
        #[arg(long)]
        out: PathBuf,
    },
    /// Overlays the accuracy and loss curves of finished runs.
    Compare {
        #[arg(required = true, num_args = 2..)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse()
}

fn load(path: &Path, seed: Option<u64>) -> Result<ExperimentConfig, FlccError> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), FlccError> {
    match cli.command {
        Command::NetAnalyze { config, out } => {
            let cfg = load(&config, cli.seed)?;
            let points = experiment::cmd_net_analyze(&cfg, &out)?;
            let gap = points
                .iter()
                .map(|p| (p.analytic - p.monte_carlo).abs())
                .fold(0.0, f64::max);
            println!(
                "{} grid points, max |analytic - simulated| = {gap:.4}; wrote {}",
                points.len(),
                out.display()
            );
        }
        Command::FlRun { config, mode, out } => {
            let cfg = load(&config, cli.seed)?;
            let run = experiment::cmd_fl_run(&cfg, mode, &out)?;
            match run.outcome.records.last() {
                Some(r) => println!(
                    "{mode}: {} rounds, final accuracy {:.4}, loss {:.4}{}; wrote {}",
                    run.outcome.records.len(),
                    r.accuracy,
                    r.loss,
                    if r.converged { " (converged)" } else { "" },
                    out.display()
                ),
                None => println!("{mode}: no rounds run; wrote {}", out.display()),
            }
        }
        Command::Compare { runs, out } => {
            let series = experiment::cmd_compare(&runs, &out)?;
            for s in &series {
                if let Some(last) = s.rounds.last() {
                    println!("{}: final accuracy {:.4}, loss {:.4}", s.label, last.1, last.2);
                } else {
                    println!("{}: no rounds", s.label);
                }
            }
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
