//! `relkit` command-line front end.
//!
//! Each subcommand reads one JSON configuration (see [`config`]), runs the
//! matching analysis, prints a summary and, given an output prefix, writes
//! plot-ready CSV files. Exit status is 0 on success, 1 for bad input and
//! 2 for numerical failures; errors print one line,
//! `error: <category>: <detail>`, to stderr.

pub mod config;
pub mod error;
pub mod format;

mod commands;
mod data;
mod output;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::{load_config, parse_config, Analysis, ProblemConfig};
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "relkit", version, about = "Structural reliability and uncertainty quantification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// First-order reliability method.
    Form(RunArgs),
    /// Subset simulation.
    Subset(RunArgs),
    /// Crude Monte Carlo.
    Mcs(RunArgs),
    /// 2D Gaussian random fields.
    Field(RunArgs),
    /// Gibbs sampling of a multivariate normal with missing data.
    Gibbs(RunArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// JSON configuration file.
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Overrides the seed in the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Output path prefix for CSV files (overrides the configuration).
    #[arg(long, value_name = "PREFIX")]
    output: Option<PathBuf>,
    /// Suppress the summary on stdout.
    #[arg(long)]
    quiet: bool,
    /// Worker threads for parallel sections; 0 uses all cores.
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

/// Runs the CLI against the process's stdout/stderr and returns the exit status.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_cli_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

/// [`run_cli`] with explicit output streams.
pub fn run_cli_with<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(
                e.kind(),
                ErrorKind::DisplayHelp
                    | ErrorKind::DisplayVersion
                    | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand
            ) {
                let _ = write!(stdout, "{e}");
                return if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand { 1 } else { 0 };
            }
            let text = e.to_string();
            // Keep clap's message but drop its usage block and help hint.
            let message: Vec<&str> = text
                .lines()
                .take_while(|l| !l.starts_with("Usage:"))
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .collect();
            let message = message.join(" ");
            let message = message.trim_start_matches("error: ");
            let _ = writeln!(stderr, "error: {}", CliError::Usage(message.to_string()));
            return 1;
        }
    };
    match dispatch(cli, stdout, stderr) {
        Ok(()) => 0,
        Err(e) => {
            let line = e.to_string().replace('\n', " ");
            let _ = writeln!(stderr, "error: {line}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    let (analysis, args) = match cli.command {
        Command::Form(a) => (Analysis::Form, a),
        Command::Subset(a) => (Analysis::Subset, a),
        Command::Mcs(a) => (Analysis::Mcs, a),
        Command::Field(a) => (Analysis::Field, a),
        Command::Gibbs(a) => (Analysis::Gibbs, a),
    };
    let mut config = load_config(&args.config)?;
    if config.analysis != analysis {
        return Err(CliError::Config(format!(
            "/analysis: configuration is for `{}`, not `{}`",
            config.analysis.name(),
            analysis.name()
        )));
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let prefix = args.output.or_else(|| config.output.clone());
    let mut ctx = commands::Context {
        config,
        outputs: output::Outputs::new(prefix),
        threads: args.threads,
        quiet: args.quiet,
        stdout,
        stderr,
    };
    match analysis {
        Analysis::Form => commands::form(&mut ctx),
        Analysis::Subset => commands::subset(&mut ctx),
        Analysis::Mcs => commands::mcs(&mut ctx),
        Analysis::Field => commands::field(&mut ctx),
        Analysis::Gibbs => commands::gibbs(&mut ctx),
    }
}
