//! `mobius`: sieve, zero scans, explicit-formula verification and diagnostics.
//!
//! Exit codes: 0 pass, 1 a residual or bound outside its budget, 2 usage error,
//! 3 numerical failure.

mod commands;
mod config;
mod store;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mobius_core::Error as CoreError;

use config::{Format, Knobs, RunConfig};

/// Bad input from the user; maps to exit code 2.
#[derive(Debug)]
pub struct Usage(pub String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

#[derive(Parser, Debug)]
#[command(name = "mobius", version, about = "Truncated explicit formulas for Möbius partial sums")]
struct Cli {
    /// Flat TOML file with the same keys as the long flags (underscores for dashes).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(flatten)]
    knobs: Knobs,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Build or reuse the Möbius table and print partial sums at --x.
    Sieve,
    /// Scan, verify and cache critical zeros up to --t.
    Zeros,
    /// Assemble the explicit formula at each --x and compare with the sieve.
    Verify,
    /// Partial sums of 1/L'(rho) over 0 < gamma < T_nu.
    Derivsum,
    /// Finite Euler product of an imprimitive character: lattice, b, bounds.
    Fproduct,
    /// CSV of L(s) (or zeta_K(s)) on a rectangular grid.
    Lgrid,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Sieve => "sieve",
            Command::Zeros => "zeros",
            Command::Verify => "verify",
            Command::Derivsum => "derivsum",
            Command::Fproduct => "fproduct",
            Command::Lgrid => "lgrid",
        }
    }

    fn default_format(self) -> Format {
        match self {
            Command::Derivsum | Command::Lgrid => Format::Csv,
            _ => Format::Json,
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<Usage>().is_some() {
        return 2;
    }
    match err.downcast_ref::<CoreError>() {
        Some(
            CoreError::ZeroModulus
            | CoreError::NotCoprime { .. }
            | CoreError::OutOfRange { .. }
            | CoreError::MemoryBudget { .. }
            | CoreError::NotPrimitive(_)
            | CoreError::TrivialProduct(_)
            | CoreError::NotSubgroup(_)
            | CoreError::Invalid(_),
        ) => 2,
        _ => 3,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let run = || -> anyhow::Result<u8> {
        let cfg = RunConfig::resolve(cli.command.name(), cli.config.clone(), cli.knobs.clone(), cli.command.default_format())?;
        let out = match cli.command {
            Command::Sieve => commands::sieve(&cfg)?,
            Command::Zeros => commands::zeros(&cfg)?,
            Command::Verify => commands::verify(&cfg)?,
            Command::Derivsum => commands::derivsum(&cfg)?,
            Command::Fproduct => commands::fproduct(&cfg)?,
            Command::Lgrid => commands::lgrid(&cfg)?,
        };
        match &cfg.knobs.out {
            Some(path) => std::fs::write(path, &out.body)?,
            None => print!("{}", out.body),
        }
        Ok(out.code)
    };
    match run() {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("mobius: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
