use std::process::ExitCode;

use clap::Parser;

use uhs_cli::error::{EXIT_SUCCESS, EXIT_VIOLATION};
use uhs_cli::{Cli, Outcome};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match uhs_cli::run(cli) {
        Ok(Outcome::Success) => ExitCode::from(EXIT_SUCCESS),
        Ok(Outcome::Violations(_)) => ExitCode::from(EXIT_VIOLATION),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
