use std::process::ExitCode;

use clap::Parser;
use landscape_cli::{run, Cli};

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("landscape: {e}");
            e.exit_code()
        }
    }
}
