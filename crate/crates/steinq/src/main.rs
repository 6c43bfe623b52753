use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use steinq::{commands, Config};

#[derive(Parser)]
#[command(name = "steinq", version, about = "Steady states of M/Ph/n+M queues and their diffusion limit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the truncated reduced chain and write its pmf and scaled law.
    SolveCtmc {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Scaled-law CSV; defaults to `<out stem>.xtilde.csv`.
        #[arg(long)]
        xtilde_out: Option<PathBuf>,
    },
    /// Event-driven simulation of the FIFO system.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Euler–Maruyama samples of the diffusion.
    SimulateSde {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Exact one-dimensional stationary law of the diffusion.
    ExactOu1d {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 401)]
        points: usize,
    },
    /// Generator-coupling identity for polynomial h (d = 1).
    SteinCheck {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated coefficients c0,c1,...; defaults to the config's h_polynomials.
        #[arg(long)]
        h: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Queue composition given queue length against Multinomial(ℓ, p).
    SscCheck {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Distances across the config's λ values with log–log rate fits.
    RateSweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn run(cli: Cli) -> anyhow::Result<String> {
    let load = |p: &PathBuf| Config::load(p);
    match cli.command {
        Command::SolveCtmc { config, out, xtilde_out } => commands::solve_ctmc(&load(&config)?, &out, xtilde_out.as_deref()),
        Command::Simulate { config, seed, out } => commands::simulate(&load(&config)?, seed, &out),
        Command::SimulateSde { config, out } => commands::simulate_sde(&load(&config)?, &out),
        Command::ExactOu1d { config, out, points } => commands::exact_ou1d(&load(&config)?, out.as_deref(), points),
        Command::SteinCheck { config, h, out } => commands::stein_check(&load(&config)?, h.as_deref(), &out),
        Command::SscCheck { config, seed, out } => commands::ssc_check(&load(&config)?, seed, &out),
        Command::RateSweep { config, out_dir } => commands::rate_sweep(&load(&config)?, &out_dir),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
