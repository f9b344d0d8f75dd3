use std::io::Write;
use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let outcome = sdx_cli::run(sdx_cli::Cli::parse());
    print!("{}", outcome.out);
    eprint!("{}", outcome.err);
    let _ = std::io::stdout().flush();
    ExitCode::from(outcome.code)
}
