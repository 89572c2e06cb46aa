use std::process::ExitCode;

use clap::Parser;
use recipcal::cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("recipcal: {e}");
            e.exit_code()
        }
    }
}
