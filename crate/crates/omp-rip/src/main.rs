use std::process::ExitCode;

use clap::Parser;
use omp_rip::cli::{run, Cli};

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("omp-rip: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
