//! `weyl-canon`: Weyl disks, τ and deficiency indices from the command line.

mod args;
mod run;

use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = args::Cli::parse();
    if let Err(e) = run::configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(run::EXIT_VALIDATION);
    }
    match run::dispatch(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}
