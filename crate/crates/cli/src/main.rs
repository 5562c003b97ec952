//! `zsar`: zero-shot video action recognition from the command line.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error, 3 environment
//! problem (missing model files, inputs or API key). Failures print one line
//! `error[<class>]: <message>` on stderr.

mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

/// A failure with its machine-readable class and exit code.
#[derive(Debug)]
pub struct CliError {
    pub class: &'static str,
    pub message: String,
    pub code: u8,
}

impl CliError {
    pub fn runtime(class: &'static str, message: impl Into<String>) -> Self {
        Self {
            class,
            message: message.into(),
            code: 1,
        }
    }

    pub fn environment(class: &'static str, message: impl Into<String>) -> Self {
        Self {
            class,
            message: message.into(),
            code: 3,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    let result = match &cli.command {
        Command::GenDescriptors(a) => commands::gen_descriptors(a),
        Command::EmbedClasses(a) => commands::embed_classes(a),
        Command::Classify(a) => commands::classify(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Ablate(a) => commands::ablate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let message = e.message.replace('\n', " ");
            eprintln!("error[{}]: {}", e.class, message);
            ExitCode::from(e.code)
        }
    }
}
