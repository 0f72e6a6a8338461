use std::io;
use std::process::ExitCode;

use clap::Parser;
use ncbwt::cli::{self, Cli};

fn main() -> ExitCode {
    let args = Cli::parse();
    let stdout = io::stdout();
    match cli::run(&args, &mut stdout.lock()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ncbwt: {e}");
            ExitCode::FAILURE
        }
    }
}
