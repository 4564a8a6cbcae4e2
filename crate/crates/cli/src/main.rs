use std::process::ExitCode;

fn main() -> ExitCode {
    al_lab::cli::main_with_args(std::env::args_os())
}
