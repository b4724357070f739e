use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use keps_nullctl_cli::{commands, CliError, RunConfig, Status};

#[derive(Debug, Parser)]
#[command(name = "kepsctl", version, about = "Null controls for a k-epsilon turbulence model")]
struct Cli {
    /// TOML run configuration; defaults apply to missing keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory, overriding `io.out_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads for `sweep`.
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,

    /// Repeat for more detail.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the coupled fixed-point problem.
    Run,
    /// Evaluate the empirical constants of the weight inequalities.
    CheckWeights,
    /// Sample observability ratios for random adjoint data.
    CarlemanTest {
        #[arg(short = 'n', long = "samples", default_value_t = 50)]
        samples: usize,
    },
    /// Compare the iterative control solve with the dense optimality system.
    OracleCompare,
    /// Repeat `run` over values of one configuration key.
    Sweep {
        /// Dotted key, e.g. `init.v0_amplitude`.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
    },
}

fn base_text(cli: &Cli) -> Result<String, CliError> {
    match &cli.config {
        Some(path) => std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display()))),
        None => Ok(String::new()),
    }
}

fn execute(cli: &Cli) -> Result<Status, CliError> {
    let text = base_text(cli)?;
    let mut cfg = RunConfig::from_toml_str(&text).map_err(|e| match (&cli.config, e) {
        (Some(p), CliError::Config(m)) => CliError::Config(format!("{}: {m}", p.display())),
        (_, e) => e,
    })?;
    if let Some(out) = &cli.out {
        cfg.io.out_dir = out.clone();
    }
    let out = cfg.io.out_dir.clone();
    match &cli.command {
        Command::Run => commands::run(&cfg, &out),
        Command::CheckWeights => commands::check_weights(&cfg, &out),
        Command::CarlemanTest { samples } => commands::carleman_test(&cfg, &out, *samples),
        Command::OracleCompare => commands::oracle_compare(&cfg, &out),
        Command::Sweep { param, values } => commands::sweep(&text, param, values, &out, cli.workers),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let status = match execute(&cli) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("kepsctl: {e}");
            if let CliError::Solver(inner) = &e {
                if matches!(inner.root(), keps_nullctl::Error::PicardDivergence { .. }) {
                    eprintln!("kepsctl: the initial data are too large for the fixed-point iteration; reduce init.v0_amplitude");
                }
            }
            e.status()
        }
    };
    ExitCode::from(status.code() as u8)
}
