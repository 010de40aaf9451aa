//! Command-line front end for the multi-objective LQR toolkit.

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{
    cmd_ce, cmd_demo_pendulum, cmd_front, cmd_sensitivity, cmd_solve, cmd_verify, CeArgs, DemoArgs,
    Format, FrontArgs, SensitivityArgs, SolveArgs, VerifyArgs,
};

#[derive(Parser)]
#[command(
    name = "mobj-lqr",
    about = "Pareto fronts for multi-objective discrete-time LQR via linear scalarization",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one scalarized (or single-objective) problem
    Solve {
        /// Problem JSON file
        #[arg(long)]
        problem: PathBuf,
        /// Scalarization weight w1,...,wm (required when m > 1)
        #[arg(long)]
        weight: Option<String>,
        /// Report file; stdout summary only when omitted
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        /// Rescale objectives that miss the unit singular-value floor
        #[arg(long)]
        normalize: bool,
    },
    /// Sweep an epsilon-net of the weight simplex and export the front
    Front {
        #[arg(long)]
        problem: PathBuf,
        /// Covering radius of the weight net, in (0, 1]
        #[arg(long)]
        epsilon: f64,
        /// Worker threads for the per-weight solves
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        #[arg(long)]
        normalize: bool,
    },
    /// Stability margins, perturbation constants, and an epsilon sweep
    Sensitivity {
        #[arg(long)]
        problem: PathBuf,
        /// Net radius used to sample margins
        #[arg(long, default_value_t = 0.05)]
        epsilon: f64,
        /// Perturbation sizes for the empirical study
        #[arg(long, value_delimiter = ',', default_values_t = vec![1e-2, 1e-3, 1e-4])]
        sweep: Vec<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Scale of the unspecified universal constant in the bounds
        #[arg(long, default_value_t = 1.0)]
        universal_c: f64,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        normalize: bool,
    },
    /// Certainty equivalence: front on estimated dynamics, audited on truth
    Ce {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        epsilon: f64,
        /// Synthetic estimate: exact-norm perturbation of (A, B)
        #[arg(long)]
        dyn_epsilon: Option<f64>,
        /// Least-squares identification from excited noisy rollouts
        #[arg(long)]
        identify: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Identification: excitation input standard deviation
        #[arg(long, default_value_t = 1.0)]
        excitation_std: f64,
        /// Identification: steps per rollout
        #[arg(long, default_value_t = 50)]
        horizon: usize,
        /// Identification: number of rollouts
        #[arg(long, default_value_t = 20)]
        rollouts: usize,
        /// Identification: process noise standard deviation
        #[arg(long, default_value_t = 1e-3)]
        noise_std: f64,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        normalize: bool,
    },
    /// Inverted-pendulum showcase: problem file, front, and plot data
    DemoPendulum {
        /// Output directory
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Net radius; defaults to 10^-1.5
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Sufficiency and identity checks on a scalar problem
    Verify {
        /// Scalar problem file (n = d = 1); a built-in two-objective
        /// benchmark when omitted
        #[arg(long)]
        problem: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Solve {
            problem,
            weight,
            out,
            format,
            normalize,
        } => cmd_solve(&SolveArgs {
            problem,
            weight,
            out,
            format,
            normalize,
        }),
        Command::Front {
            problem,
            epsilon,
            workers,
            out,
            format,
            normalize,
        } => cmd_front(&FrontArgs {
            problem,
            epsilon,
            workers,
            out,
            format,
            normalize,
        }),
        Command::Sensitivity {
            problem,
            epsilon,
            sweep,
            seed,
            universal_c,
            workers,
            out,
            normalize,
        } => cmd_sensitivity(&SensitivityArgs {
            problem,
            epsilon,
            sweep,
            seed,
            universal_c,
            workers,
            out,
            normalize,
        }),
        Command::Ce {
            problem,
            epsilon,
            dyn_epsilon,
            identify,
            seed,
            excitation_std,
            horizon,
            rollouts,
            noise_std,
            workers,
            out,
            normalize,
        } => cmd_ce(&CeArgs {
            problem,
            epsilon,
            dyn_epsilon,
            identify,
            seed,
            excitation_std,
            horizon,
            rollouts,
            noise_std,
            workers,
            out,
            normalize,
        }),
        Command::DemoPendulum {
            out,
            epsilon,
            workers,
        } => cmd_demo_pendulum(&DemoArgs {
            out,
            epsilon,
            workers,
        }),
        Command::Verify { problem, seed } => cmd_verify(&VerifyArgs { problem, seed }),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message);
            ExitCode::from(err.exit_code)
        }
    }
}
