//! The `pai` command-line tool.
//!
//! Exit codes: 0 success, 1 internal failure, 2 configuration or parse error,
//! 3 enumeration budget refusal. Every failure also prints one JSON object on
//! standard error: `{"error": kind, "exit_code": n, "message": text}`.

mod args;
mod commands;
mod report;

use std::ffi::OsString;

use clap::error::ErrorKind;
use clap::Parser;
use pai_core::Error;

pub use args::{Cli, Command};

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::BudgetExceeded { .. } => 3,
        Error::Io(_) | Error::InvalidOperator { .. } | Error::EmptyCell(_) => 1,
        _ => 2,
    }
}

fn report_error(kind: &str, code: i32, message: &str) {
    let line = serde_json::json!({ "error": kind, "exit_code": code, "message": message });
    eprintln!("{line}");
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            let _ = e.print();
            report_error("usage", 2, e.kind().as_str().unwrap_or("invalid arguments"));
            return 2;
        }
    };
    let result = match cli.threads {
        Some(0) => Err(Error::Config("--threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))
            .and_then(|pool| pool.install(|| commands::dispatch(&cli.command))),
        None => commands::dispatch(&cli.command),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let code = exit_code(&e);
            report_error(e.kind(), code, &e.to_string());
            code
        }
    }
}
