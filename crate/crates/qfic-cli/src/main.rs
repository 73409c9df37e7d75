//! `qfic`: batch CLI over the qfic-core simulation library. Resolves a run
//! configuration (flags over config file over paper defaults), dispatches the
//! requested experiment, and writes CSV (and optionally SVG) output.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical
//! non-convergence, 4 I/O failure.

// `!(x > 0.0)` style validation is deliberate: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod experiments;
mod output;

use clap::Parser;

fn main() {
    let cli = match config::Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            if matches!(
                err.kind(),
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion
            ) {
                let _ = err.print();
                std::process::exit(0);
            }
            let _ = err.print();
            std::process::exit(2);
        }
    };
    if let Err(err) = run(&cli) {
        eprintln!("qfic: {err}");
        std::process::exit(err.code());
    }
}

fn run(cli: &config::Cli) -> Result<(), config::CliError> {
    let cfg = config::resolve(cli)?;
    let result = experiments::run_experiment(&cfg)?;
    output::emit(&cfg, &result)
}
