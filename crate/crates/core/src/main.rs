use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use prospect_mdp::cli::{self, CliError, ExperimentConfig, MdpSource};

#[derive(Parser)]
#[command(name = "prospect-mdp", version, about = "Risk-sensitive MDP solver and learner")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one MDP under the configured map and criterion.
    Solve(Common),
    /// Solve once per value of the configured sweep parameter.
    Sweep(Common),
    /// Run Q-learning or dyna-Q and record the error trace.
    Learn(Common),
    /// Probe the prospect-map axioms on random value vectors.
    Check(Common),
}

#[derive(clap::Args)]
struct Common {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// MDP file overriding the configured source.
    #[arg(long)]
    mdp: Option<PathBuf>,
    /// Output directory; results go to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Self-loop weight kappa of the aperiodicity transform.
    #[arg(long)]
    aperiodicity: Option<f64>,
}

type Handler = fn(&ExperimentConfig) -> Result<cli::CmdOutput, CliError>;

fn run(args: Args) -> Result<i32, CliError> {
    let (command, common): (Handler, Common) = match args.command {
        Command::Solve(c) => (cli::cmd_solve, c),
        Command::Sweep(c) => (cli::cmd_sweep, c),
        Command::Learn(c) => (cli::cmd_learn, c),
        Command::Check(c) => (cli::cmd_check, c),
    };
    let mut cfg = ExperimentConfig::from_file(&common.config)?;
    if let Some(path) = common.mdp {
        cfg.mdp = MdpSource::Inline { mdp: cli::read_mdp(&path)? };
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(kappa) = common.aperiodicity {
        cfg.aperiodicity = Some(kappa);
    }
    let output = command(&cfg)?;
    output.emit(common.out.as_deref())?;
    if let Some(diag) = &output.diagnostic {
        eprintln!("{diag}");
    }
    Ok(output.exit_code)
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.code.exit_code() as u8)
        }
    }
}
