//! `bbcreds`: issuer key generation, enrollment, authentication, record
//! inspection and error-rate evaluation.
//!
//! Exit codes: 0 success, 2 usage/I/O/format, 3 issuance denied,
//! 4 liveness, 5 authentication failure, 6 relying-party deny.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

#[derive(Debug, Parser)]
#[command(name = "bbcreds", version, about = "Biometric bound age credentials")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// key=value configuration file; flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Seed for every random draw. One is generated and printed if absent.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Current time as unix seconds, replacing the system clock.
    #[arg(long, global = true, value_name = "UNIX_SECONDS")]
    pub clock: Option<u64>,
    /// Liveness mock: pass, fail, or random:<rate>:<seed>.
    #[arg(long, global = true)]
    pub liveness: Option<String>,
    /// Sketch variant: xor or encrypted.
    #[arg(long, global = true)]
    pub variant: Option<String>,
    #[arg(long, global = true)]
    pub age_threshold: Option<u32>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate an issuer key pair as PREFIX.pub and PREFIX.key.
    AspKeygen {
        #[arg(long, value_name = "PREFIX")]
        out: PathBuf,
        /// Overwrite existing key files.
        #[arg(long)]
        force: bool,
    },
    /// Enroll a synthetic identity against an in-process issuer.
    Enroll {
        /// Issuer key prefix from asp-keygen.
        #[arg(long, value_name = "PREFIX")]
        keys: PathBuf,
        #[arg(long)]
        identity_seed: u64,
        /// Date of birth presented as evidence (YYYY-MM-DD).
        #[arg(long, conflicts_with = "approve", required_unless_present = "approve")]
        dob: Option<String>,
        /// Present evidence the mock issuer always approves.
        #[arg(long)]
        approve: bool,
        /// Output record path (.bbc).
        #[arg(long)]
        out: PathBuf,
    },
    /// Authenticate against a stored record and run the relying-party check.
    Auth {
        #[arg(long)]
        record: PathBuf,
        /// Issuer key prefix; only PREFIX.pub is read.
        #[arg(long, value_name = "PREFIX")]
        keys: PathBuf,
        #[arg(long, required_unless_present = "impostor")]
        identity_seed: Option<u64>,
        /// Present a sample from an unrelated identity.
        #[arg(long)]
        impostor: bool,
        /// Genuine-sample noise; defaults to the calibrated value.
        #[arg(long)]
        sigma: Option<f64>,
        /// Age the relying party requires; defaults to the age threshold.
        #[arg(long)]
        required_age: Option<u32>,
    },
    /// Sweep FRR and FAR over noise levels and write CSV.
    Eval {
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
        sigmas: Vec<f64>,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        /// CSV output path; stdout if absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print record metadata without decrypting anything.
    Inspect { record: PathBuf },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },
    #[error("issuance denied: {0}")]
    IssuanceDenied(String),
    #[error("liveness check failed")]
    Liveness,
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("DENY {0}")]
    Deny(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Io { .. } | CliError::Format { .. } => 2,
            CliError::IssuanceDenied(_) => 3,
            CliError::Liveness => 4,
            CliError::Auth(_) => 5,
            CliError::Deny(_) => 6,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::AspKeygen { out, force } => commands::asp_keygen(&cli.common, &out, force),
        Command::Enroll {
            keys,
            identity_seed,
            dob,
            approve: _,
            out,
        } => commands::enroll(&cli.common, &keys, identity_seed, dob.as_deref(), &out),
        Command::Auth {
            record,
            keys,
            identity_seed,
            impostor,
            sigma,
            required_age,
        } => commands::auth(
            &cli.common,
            &commands::AuthArgs {
                record,
                keys,
                identity_seed,
                impostor,
                sigma,
                required_age,
            },
        ),
        Command::Eval { sigmas, trials, out } => commands::eval(&cli.common, &sigmas, trials, out.as_deref()),
        Command::Inspect { record } => commands::inspect(&record),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                // The decision line goes to stdout next to the credential fields.
                CliError::Deny(_) => println!("{e}"),
                _ => eprintln!("error: {e}"),
            }
            ExitCode::from(e.exit_code())
        }
    }
}
