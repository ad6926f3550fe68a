use std::process::ExitCode;

use clap::Parser;
use tcmerton::cli::{run, Cli};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    ExitCode::from(run(Cli::parse()))
}
