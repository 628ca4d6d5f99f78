//! `deadend-mdp`: solve, check, simulate and benchmark goal-oriented MDPs
//! with dead ends from the command line.

mod commands;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use crate::error::CliError;

/// Exit statuses shared by every subcommand.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Solved = 0,
    Unconverged = 2,
    InputError = 3,
    DeadStart = 4,
}

#[derive(Debug, Parser)]
#[command(name = "deadend-mdp", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Algo {
    ViSsp,
    ViFsspude,
    ViMp,
    Ivi,
    Lrtdp,
    Fret,
    Shs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OracleCriterion {
    Cost,
    FinitePenalty,
    Lex,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve an MDP file and print a JSON summary.
    Solve {
        #[arg(long, value_enum)]
        algo: Algo,
        #[arg(long)]
        input: PathBuf,
        /// Override the file's dead-end penalty (a number or "inf").
        #[arg(long)]
        penalty: Option<f64>,
        #[arg(long, default_value_t = 1e-6)]
        eps: f64,
        /// Greedy tolerance; defaults to 1e-9 for the sweeping solvers and to
        /// max(1e-9, 10 eps) for the search-based ones.
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Work budget in backups.
        #[arg(long)]
        max_backups: Option<usize>,
        /// Write the policy with values and goal probabilities here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Enumerate every deterministic policy of a small MDP and report the
    /// optimal ones.
    Oracle {
        #[arg(long, value_enum)]
        criterion: OracleCriterion,
        #[arg(long)]
        input: PathBuf,
        /// Override the file's penalty for the finite-penalty criterion.
        #[arg(long)]
        penalty: Option<f64>,
    },
    /// Compare capped and lexicographic optimal policies over a geometric
    /// grid of penalties.
    SweepPenalty {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        dmin: f64,
        #[arg(long)]
        dmax: f64,
        #[arg(long)]
        steps: usize,
    },
    /// Monte Carlo rollouts of a policy file.
    Simulate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        policy: PathBuf,
        #[arg(long)]
        trials: usize,
        #[arg(long)]
        horizon: usize,
        #[arg(long)]
        seed: u64,
    },
    /// Generate a gridworld MDP file from a JSON grid spec.
    GenGrid {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the finite-penalty versus staged-search comparison on the
    /// instances of a manifest; writes bench.txt and bench.json.
    Bench {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<Status, CliError> {
    match cli.command {
        Command::Solve {
            algo,
            input,
            penalty,
            eps,
            eta,
            seed,
            max_backups,
            out,
        } => commands::solve(&commands::SolveArgs {
            algo,
            input,
            penalty,
            eps,
            eta,
            seed,
            max_backups,
            out,
        }),
        Command::Oracle {
            criterion,
            input,
            penalty,
        } => commands::oracle(criterion, &input, penalty),
        Command::SweepPenalty {
            input,
            dmin,
            dmax,
            steps,
        } => commands::sweep_penalty(&input, dmin, dmax, steps),
        Command::Simulate {
            input,
            policy,
            trials,
            horizon,
            seed,
        } => commands::simulate(&input, &policy, trials, horizon, seed),
        Command::GenGrid { spec, seed, out } => commands::gen_grid(&spec, seed, &out),
        Command::Bench { manifest, out } => commands::bench(&manifest, &out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DEADEND_MDP_LOG", "error"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(Status::InputError as u8)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(status) => ExitCode::from(status as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(Status::InputError as u8)
        }
    }
}
