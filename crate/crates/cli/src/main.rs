use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use krr_cli::{execute, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(outcome) => {
            let mut out = std::io::stdout().lock();
            let _ = out.write_all(outcome.stdout.as_bytes());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("krr: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
