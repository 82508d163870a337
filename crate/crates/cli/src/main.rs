use std::process::ExitCode;

use carleman_lab::{configure_threads, exit_code, run, RunConfig, EXIT_CERTIFICATE, EXIT_OK};
use clap::Parser;

fn main() -> ExitCode {
    let cfg = RunConfig::parse();
    let status = configure_threads().and_then(|_| run(&cfg));
    match status {
        Ok(true) => ExitCode::from(EXIT_OK),
        Ok(false) => {
            eprintln!("certificate failed; see the report");
            ExitCode::from(EXIT_CERTIFICATE)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
