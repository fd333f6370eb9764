use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use vistomo_cli::error::{EXIT_OK, EXIT_USAGE};
use vistomo_cli::{run, Cli};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("vistomo: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
