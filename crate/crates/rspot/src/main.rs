use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(rspot::main_with_args(std::env::args_os()))
}
