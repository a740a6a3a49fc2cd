use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gns::app::{cmd_convergence, cmd_gen_data, cmd_run, cmd_table1, cmd_tune, Artifact};
use gns::config::{Config, Overrides};

/// Adaptive graph filters under impulsive noise with missing data.
#[derive(Debug, Parser)]
#[command(name = "gns", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one Monte Carlo experiment, tuning missing step sizes first.
    Run(Common),
    /// Grid-search step sizes and report the pilot scores.
    Tune(Common),
    /// Sweep alpha over 1.05..1.25 and tabulate steady-state MSE.
    Table1(Common),
    /// Time-invariant run reporting spectral MAE and iterations to steady state.
    Convergence(Common),
    /// Write the synthetic dataset as CSV.
    GenData(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// TOML experiment config; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    band_size: Option<usize>,
    #[arg(long)]
    observed: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

impl Common {
    fn config(&self) -> gns::Result<Config> {
        let mut config = match &self.config {
            Some(path) => Config::load(path)?,
            None => Config::default(),
        };
        config.apply(&Overrides {
            alpha: self.alpha,
            gamma: self.gamma,
            runs: self.runs,
            seed: self.seed,
            band_size: self.band_size,
            observed: self.observed,
        })?;
        Ok(config)
    }
}

fn execute(cli: &Cli) -> gns::Result<PathBuf> {
    let (common, f): (&Common, fn(&Config) -> gns::Result<Artifact>) = match &cli.command {
        Command::Run(c) => (c, cmd_run),
        Command::Tune(c) => (c, cmd_tune),
        Command::Table1(c) => (c, cmd_table1),
        Command::Convergence(c) => (c, cmd_convergence),
        Command::GenData(c) => (c, cmd_gen_data),
    };
    let artifact = f(&common.config()?)?;
    artifact.write_to(&common.out)?;
    Ok(common.out.clone())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(out) => {
            eprintln!("wrote {}", out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
