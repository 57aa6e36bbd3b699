use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(nora::cli::run(std::env::args_os()))
}
