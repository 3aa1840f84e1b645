use std::io;
use std::process::ExitCode;

fn main() -> ExitCode {
    gapquest_gateway::cli::main_with(std::env::args_os(), &mut io::stdout(), &mut io::stderr())
}
