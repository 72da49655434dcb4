//! The `qkdnet` command line.
//!
//! Exit codes: 0 completed (zero yield included), 1 usage or config error,
//! 2 session abort.

pub mod commands;
pub mod config;
pub mod report;

use std::io::{self, Write};
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use thiserror::Error;

use crate::entropy::EntropyInputs;
use crate::net::SessionError;
use commands::BenchArgs;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_ABORT: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Session(SessionError),
    #[error("output failed: {0}")]
    Io(#[from] io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Session(_) => EXIT_ABORT,
            Self::Usage(_) | Self::Io(_) => EXIT_USAGE,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "qkdnet", version, about = "BB84 post-processing and QKD network simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the sessions described by a config file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Report file; defaults to the config's `output`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare Cascade and Niagara on identical planted-error blocks.
    ReconBench {
        #[arg(long, default_value_t = 4096)]
        block_size: usize,
        #[arg(long, default_value_t = 0.03)]
        error_rate: f64,
        #[arg(long, default_value_t = 100)]
        blocks: usize,
        #[arg(long)]
        seed: u64,
        /// Add measured CPU seconds per megabit (not reproducible).
        #[arg(long)]
        timing: bool,
    },
    /// Tabulate t and usable bits for all four estimators.
    EntropyTable {
        #[arg(long)]
        b: u64,
        #[arg(long)]
        e: u64,
        #[arg(long)]
        n: u64,
        #[arg(long, default_value_t = 0)]
        d: u64,
        #[arg(long, default_value_t = 0.0)]
        r: f64,
        #[arg(long, default_value_t = 1e-6)]
        c: f64,
    },
    /// Emit privacy-amplification golden vectors.
    PaVectors {
        #[arg(long)]
        count: usize,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli, env_seed: Option<&str>, out: &mut impl Write) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate { config, out: report } => {
            let seed = env_seed
                .map(|s| {
                    s.trim()
                        .parse::<u64>()
                        .map_err(|_| CliError::Usage(format!("QKDNET_SEED: `{s}` is not an unsigned integer")))
                })
                .transpose()?;
            commands::simulate(&config, report.as_deref(), seed, out).map(drop)
        }
        Command::ReconBench {
            block_size,
            error_rate,
            blocks,
            seed,
            timing,
        } => {
            let args = BenchArgs {
                block_size,
                error_rate,
                blocks,
                seed,
                timing,
            };
            commands::recon_bench(&args, out).map(drop)
        }
        Command::EntropyTable { b, e, n, d, r, c } => {
            commands::entropy_table(&EntropyInputs { b, e, n, d, r, c }, out).map(drop)
        }
        Command::PaVectors {
            count,
            n,
            m,
            seed,
            out: path,
        } => {
            let text = commands::pa_vectors(count, n, m, seed)?;
            match path {
                Some(p) => std::fs::write(&p, text)
                    .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", p.display()))),
                None => Ok(out.write_all(text.as_bytes())?),
            }
        }
    }
}

/// Parses `args` (program name first) and runs the subcommand. `env_seed` is
/// the value of QKDNET_SEED, if set.
pub fn main_with_args<I, T>(args: I, env_seed: Option<&str>, out: &mut impl Write, err: &mut impl Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    match run(cli, env_seed, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "qkdnet: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = main_with_args(std::iter::once("qkdnet").chain(args.iter().copied()), None, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn help_and_usage_codes() {
        assert_eq!(call(&["--help"]).0, EXIT_OK);
        assert_eq!(call(&[]).0, EXIT_USAGE);
        assert_eq!(call(&["frobnicate"]).0, EXIT_USAGE);
        assert_eq!(call(&["recon-bench"]).0, EXIT_USAGE);
    }

    #[test]
    fn undefined_estimates_still_exit_zero() {
        let (code, out, _) = call(&["entropy-table", "--b", "100", "--e", "50", "--n", "200"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("undefined"), "{out}");
        let (code, _, err) = call(&["entropy-table", "--b", "100", "--e", "200", "--n", "200"]);
        assert_eq!(code, EXIT_USAGE);
        assert!(err.contains("e <= b"));
    }

    #[test]
    fn missing_config_is_a_usage_error() {
        let (code, _, err) = call(&["simulate", "--config", "/nonexistent/qkdnet.ini"]);
        assert_eq!(code, EXIT_USAGE);
        assert!(err.contains("cannot read"));
    }
}
