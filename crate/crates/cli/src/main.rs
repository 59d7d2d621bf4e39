//! `littertrack` command line.
//!
//! Exit codes: 0 success, 2 usage, 3 input, 4 configuration, 5 numerical.
//! Log verbosity comes from `LITTERTRACK_LOG` (env_logger syntax, default
//! `warn`) or `-v`.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use littertrack::ErrorKind;

#[derive(Debug, Parser)]
#[command(name = "littertrack", version, about = "Multi-object tracking with littering event detection")]
struct Cli {
    /// Log at info level (debug when repeated).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct ConfigArgs {
    /// Key-value config file (`key = value`, `#` comments).
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Tracking mode; shorthand for `--set mode=...`.
    #[arg(long, value_name = "MODE")]
    mode: Option<String>,

    /// Override one key, e.g. `--set association.lambda_m=0.5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic scenario: detections, embeddings, ground truth and gallery.
    Simulate(commands::SimulateArgs),
    /// Track detections and write MOT-format tracks.
    Track(commands::TrackArgs),
    /// Detect littering and cleaning events in a tracks file.
    Events(commands::EventsArgs),
    /// Score tracks (and optionally events) against ground truth.
    Eval(commands::EvalArgs),
    /// Manage the identity gallery.
    #[command(subcommand)]
    Gallery(commands::GalleryCommand),
    /// Full pipeline: track, post-process, events, identity, optional metrics.
    Run(commands::RunArgs),
    /// Print the effective configuration and its digest.
    Config(ConfigArgs),
}

const EXIT_USAGE: u8 = 2;
const EXIT_INPUT: u8 = 3;
const EXIT_CONFIG: u8 = 4;
const EXIT_NUMERICAL: u8 = 5;

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<littertrack::Error>() {
            return match e.kind() {
                ErrorKind::Input => EXIT_INPUT,
                ErrorKind::Config => EXIT_CONFIG,
                ErrorKind::Numerical => EXIT_NUMERICAL,
            };
        }
    }
    EXIT_INPUT
}

/// The error chain, skipping causes whose text an outer message already shows.
fn describe(err: &anyhow::Error) -> String {
    let mut msg = String::new();
    for cause in err.chain() {
        let text = cause.to_string();
        if !msg.contains(&text) {
            if !msg.is_empty() {
                msg.push_str(": ");
            }
            msg.push_str(&text);
        }
    }
    msg
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let default_level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("LITTERTRACK_LOG", default_level))
        .format_timestamp(None)
        .init();

    let result = match cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Track(a) => commands::track(a),
        Command::Events(a) => commands::events(a),
        Command::Eval(a) => commands::eval(a),
        Command::Gallery(g) => commands::gallery(g),
        Command::Run(a) => commands::run(a),
        Command::Config(a) => commands::show_config(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}
