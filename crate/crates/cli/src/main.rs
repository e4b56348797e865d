mod args;
mod commands;

use std::process::ExitCode;

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    match commands::run(&argv) {
        Ok(commands::Status::Ok) => ExitCode::SUCCESS,
        Ok(commands::Status::ValidationFailed) => ExitCode::from(2),
        Err(e) => {
            eprintln!("pvtcell: error: {e}");
            ExitCode::from(1)
        }
    }
}
