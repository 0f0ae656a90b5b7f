use std::process::ExitCode;

use clap::Parser;
use qbestd::cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(d) if d.ok() => ExitCode::SUCCESS,
        Ok(d) => {
            eprintln!("{} error(s)", d.errors.len());
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
