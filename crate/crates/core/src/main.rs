use std::process::ExitCode;

use clap::Parser;
use elmd::cli::{execute, Cli};

fn main() -> ExitCode {
    ExitCode::from(execute(&Cli::parse()))
}
