use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use vhn::cli::{log_error, run, Cli};
use vhn::ExitKind;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // usage errors are validation failures; clap's own code 2 is
            // reserved for numerical failures here
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(ExitKind::Validation as u8),
            };
        }
    };
    match run(cli) {
        Ok(kind) => ExitCode::from(kind as u8),
        Err(e) => {
            log_error(&e);
            ExitCode::from(e.exit_kind() as u8)
        }
    }
}
