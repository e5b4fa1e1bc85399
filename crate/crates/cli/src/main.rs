use std::io::Write;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use diffspline_cli::{run, to_sorted_json, Cli, CliError};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => e.exit(),
        Err(e) => {
            let first = e
                .to_string()
                .lines()
                .next()
                .unwrap_or("bad arguments")
                .trim_start_matches("error: ")
                .to_string();
            eprintln!("{}", CliError::Usage(first).line());
            return ExitCode::from(2);
        }
    };
    if let Ok(threads) = std::env::var("DIFFSPLINE_THREADS") {
        match threads.parse::<usize>() {
            Ok(t) if t > 0 => {
                // fails only if a pool already exists, which cannot happen this early
                let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
            }
            _ => {
                eprintln!(
                    "{}",
                    CliError::Usage(format!(
                        "DIFFSPLINE_THREADS must be a positive integer, got {threads:?}"
                    ))
                    .line()
                );
                return ExitCode::from(2);
            }
        }
    }
    match run(&cli) {
        Ok(outcome) => {
            // a closed stdout (e.g. piped into `head`) is not an error of the run
            let _ = writeln!(std::io::stdout(), "{}", to_sorted_json(&outcome.summary));
            match outcome.failure {
                None => ExitCode::SUCCESS,
                Some(e) => {
                    eprintln!("{}", e.line());
                    ExitCode::FAILURE
                }
            }
        }
        Err(e) => {
            eprintln!("{}", e.line());
            match e {
                CliError::Usage(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
