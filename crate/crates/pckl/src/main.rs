use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use pckl::{run_command, Command, Overrides};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Cmd {
    /// Monte Carlo reference run
    Mc,
    /// Polynomial-chaos iteration without reduction
    Pc,
    /// Polynomial-chaos iteration with KL-reduced temperature exchange
    PcKl,
    /// Diagnostics from existing pc and pc-kl outputs
    Compare,
    /// Tolerance sweep over 0.90, 0.95, 0.99 of sigma_T^2 and k in {100, 1}
    Study,
}

#[derive(Debug, Parser)]
#[command(name = "pckl", version, about = "Stochastic coupled reactor solver with KL-reduced data exchange")]
struct Cli {
    #[arg(value_enum)]
    command: Cmd,
    /// Configuration file (sectioned key = value); defaults apply to missing keys
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; each command writes into a subdirectory named after it
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo sample count
    #[arg(long)]
    n: Option<usize>,
    /// PC degree, with quadrature level p + 1
    #[arg(long)]
    p: Option<usize>,
    /// Absolute KL energy tolerance
    #[arg(long, conflicts_with = "tol_fraction")]
    tol: Option<f64>,
    /// KL tolerance as a fraction of sigma_T^2
    #[arg(long)]
    tol_fraction: Option<f64>,
    /// Thermal conductivity
    #[arg(long)]
    k: Option<f64>,
    /// Worker threads (default: all cores)
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    max_iters: Option<usize>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let command = match cli.command {
        Cmd::Mc => Command::Mc,
        Cmd::Pc => Command::Pc,
        Cmd::PcKl => Command::PcKl,
        Cmd::Compare => Command::Compare,
        Cmd::Study => Command::Study,
    };
    let overrides = Overrides {
        seed: cli.seed,
        n: cli.n,
        p: cli.p,
        tol: cli.tol,
        tol_fraction: cli.tol_fraction,
        k: cli.k,
        threads: cli.threads,
        max_iters: cli.max_iters,
    };
    match run_command(command, cli.config.as_deref(), &cli.out, &overrides) {
        Ok(m) => {
            log::info!("wrote {} files to {} (digest {})", m.files.len() + 1, m.output_dir, &m.digest[..16]);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
