use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(dimprofile_cli::run(std::env::args_os()))
}
