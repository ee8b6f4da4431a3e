use std::process::ExitCode;

fn main() -> ExitCode {
    axistream::cli::run(std::env::args_os())
}
