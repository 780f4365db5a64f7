use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(sue_cli::run(std::env::args_os()))
}
