//! `kronrate`: compute rate functionals, run verification suites and adversaries
//! from a TOML experiment file.

mod commands;
mod config;
mod record;

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

use commands::RunParams;
use config::Format;
use record::ResultRecord;

#[derive(Debug)]
pub enum CliError {
    /// Unreadable or invalid configuration (exit code 2).
    Config(String),
    /// A computation refused to proceed, e.g. a budget was exceeded (exit code 2).
    Runtime(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

#[derive(Parser)]
#[command(name = "kronrate", version, about = "Rates of convergence for Kronecker's lemma and the strong law, checked exactly")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the requested rate functionals over the grid.
    Rate(Common),
    /// Run a verification suite; exits 1 if any check fails.
    Verify(Common),
    /// Search for witnesses against a candidate rate.
    Adversary(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides `run.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `run.trials`.
    #[arg(long)]
    trials: Option<u64>,
    /// Write the record here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Omit the timestamp and wall time so that reruns are byte-identical.
    #[arg(long)]
    no_timestamp: bool,
}

fn run(name: &str, args: Common) -> Result<bool, CliError> {
    let started = Instant::now();
    let text = fs::read(&args.config).map_err(|e| CliError::Config(format!("{}: {e}", args.config.display())))?;
    let text = String::from_utf8(text).map_err(|_| CliError::Config("config is not UTF-8".into()))?;
    let cfg = config::parse(&text)?;
    let hash: String = Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect();
    let params = RunParams { seed: args.seed.unwrap_or(cfg.run.seed), trials: args.trials.unwrap_or(cfg.run.trials) };
    if params.trials == 0 {
        return Err(CliError::Config("trials must be at least 1".into()));
    }
    let rows = match name {
        "rate" => commands::rate(&cfg)?,
        "verify" => commands::verify(&cfg, params)?,
        _ => commands::adversary(&cfg)?,
    };
    let mut rec = ResultRecord::new(name, hash, cfg.description.clone(), rows);
    if !args.no_timestamp {
        rec.timestamp = Some(SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()));
        rec.wall_time_ms = Some(started.elapsed().as_millis() as u64);
    }
    let format = args.format.or(cfg.output.format).unwrap_or_default();
    let text = rec.render(format)?;
    match args.out.or(cfg.output.path.map(PathBuf::from)) {
        Some(path) => fs::write(&path, text).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?,
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| CliError::Runtime(e.to_string()))?,
    }
    Ok(rec.all_passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, args) = match cli.command {
        Command::Rate(a) => ("rate", a),
        Command::Verify(a) => ("verify", a),
        Command::Adversary(a) => ("adversary", a),
    };
    match run(name, args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("kronrate: {e}");
            ExitCode::from(2)
        }
    }
}
