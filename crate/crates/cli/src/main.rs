//! `speccodec`: fit, encode, decode, evaluate and inspect spectral codec files.
//!
//! Exit status is 0 on success, 1 on I/O failure and 2 on invalid input.

mod commands;
mod wav;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use speccodec::Variant;

#[derive(Debug)]
pub enum CliError {
    Io(String),
    Invalid(String),
}

impl CliError {
    pub fn io(msg: impl Into<String>) -> Self {
        CliError::Io(msg.into())
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        CliError::Invalid(msg.into())
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Invalid(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Io(m) | CliError::Invalid(m) => f.write_str(m),
        }
    }
}

impl From<speccodec::Error> for CliError {
    fn from(e: speccodec::Error) -> Self {
        CliError::Invalid(e.to_string())
    }
}

#[derive(Parser)]
#[command(
    name = "speccodec",
    version,
    about = "Mel-spectrogram codec with FSQ/RVQ tokens"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a codec model on every WAV file under a directory.
    Fit {
        corpus_dir: PathBuf,
        #[arg(long, default_value = "fsq")]
        variant: Variant,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        ridge_lambda: Option<f64>,
        /// Standard deviations per unit of tanh input.
        #[arg(long)]
        tanh_sigmas: Option<f64>,
        #[arg(long)]
        rvq_stages: Option<usize>,
        #[arg(long)]
        rvq_size: Option<usize>,
        /// Level counts of one FSQ group, repeated to fill the embedding.
        #[arg(long, value_delimiter = ',')]
        fsq_levels: Option<Vec<u32>>,
    },
    /// Encode a WAV file to a `.spct` token stream.
    Encode {
        input: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Decode a `.spct` token stream to a 16-bit WAV file.
    Decode {
        input: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 32)]
        gl_iters: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Compare a reconstruction against its reference.
    Eval {
        reference: PathBuf,
        estimate: PathBuf,
        /// Token stream whose bitrate to include in the report.
        #[arg(long)]
        stream: Option<PathBuf>,
    },
    /// Print the header of a `.spct` stream or `SCMK` model.
    Info { input: PathBuf },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Fit {
            corpus_dir,
            variant,
            seed,
            out,
            ridge_lambda,
            tanh_sigmas,
            rvq_stages,
            rvq_size,
            fsq_levels,
        } => commands::fit(commands::FitArgs {
            corpus_dir,
            variant,
            seed,
            out,
            ridge_lambda,
            tanh_sigmas,
            rvq_stages,
            rvq_size,
            fsq_levels,
        }),
        Command::Encode { input, model, out } => commands::encode(&input, &model, &out),
        Command::Decode {
            input,
            model,
            out,
            gl_iters,
            seed,
        } => commands::decode(&input, &model, &out, gl_iters, seed),
        Command::Eval {
            reference,
            estimate,
            stream,
        } => commands::eval(&reference, &estimate, stream.as_deref()),
        Command::Info { input } => commands::info(&input),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
