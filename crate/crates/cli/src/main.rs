use std::process::ExitCode;

use clap::Parser;
use ecfmon_cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(outcome) => ExitCode::from(outcome.exit_code()),
        Err(e) => {
            eprintln!("ecfmon: error: {e}");
            ExitCode::from(1)
        }
    }
}
