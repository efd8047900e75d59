use std::process::ExitCode;

use clap::Parser;
use hfss_cli::{dispatch, Cli};

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hfss: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
