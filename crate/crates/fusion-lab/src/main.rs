use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(fusion_lab::cli::run(std::env::args()))
}
