use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;

/// Pseudospectral NLS runs and saturation studies.
#[derive(Debug, Parser)]
#[command(name = "satnls", version, arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evolve the configured datum and write diagnostics.
    Simulate(Common),
    /// Convergence of the saturated model to the unsaturated one as h -> 0.
    Converge(Common),
    /// Norm inflation of the closed-form ODE solution.
    OdeDemo(Common),
    /// Growth of the L2 distance between two nearby solutions.
    Continuity(Common),
    /// Focusing amplitude scan: unsaturated blow-up vs saturated runs.
    Blowup(Common),
    /// Mass and energy conservation check.
    Conserve(Common),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Config file.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Comma-separated h values.
    #[arg(long, value_delimiter = ',')]
    pub h_list: Option<Vec<f64>>,
    /// Comma-separated Sobolev indices.
    #[arg(long, value_delimiter = ',')]
    pub norms: Option<Vec<f64>>,
    /// Seed for random initial data.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Print nothing on success.
    #[arg(long)]
    pub quiet: bool,
}

pub enum Outcome {
    Pass,
    Fail,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, common) = match &cli.command {
        Command::Simulate(c) => ("simulate", c),
        Command::Converge(c) => ("converge", c),
        Command::OdeDemo(c) => ("ode-demo", c),
        Command::Continuity(c) => ("continuity", c),
        Command::Blowup(c) => ("blowup", c),
        Command::Conserve(c) => ("conserve", c),
    };
    match commands::run(name, common) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail) => ExitCode::from(1),
        Err(commands::CliError::Usage(msg)) => {
            eprintln!("satnls {name}: {msg}");
            ExitCode::from(2)
        }
        Err(commands::CliError::Run(msg)) => {
            eprintln!("satnls {name}: {msg}");
            ExitCode::from(1)
        }
    }
}
