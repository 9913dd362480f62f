use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use spreadopt_cli::{run, Cli};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(out) => {
            emit(&out);
            ExitCode::SUCCESS
        }
        Err(e) => {
            if let Some(report) = e.report() {
                emit(report);
            }
            eprintln!("error: {}: {e}", e.name());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn emit(out: &str) {
    let nl = if out.ends_with('\n') { "" } else { "\n" };
    // A closed pipe (e.g. `| head`) is not an error.
    let _ = write!(std::io::stdout().lock(), "{out}{nl}");
}
