#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;

mod commands;
mod config;
mod output;

use config::{Cli, ExperimentConfig, FileValues};

const EXIT_INVARIANT: u8 = 1;
const EXIT_CONFIG: u8 = 2;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let file = match &cli.config {
        Some(p) => match config::read_config_file(p) {
            Ok(f) => f,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(EXIT_CONFIG);
            }
        },
        None => FileValues::default(),
    };
    let cfg = match ExperimentConfig::resolve(&cli, &file) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };

    let start = Instant::now();
    let outcome = match commands::run(&cfg) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {} failed: {e}", cfg.command);
            return ExitCode::from(EXIT_INVARIANT);
        }
    };
    let files = match output::write_tables(&cfg.output, cfg.format, &outcome.tables) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("error: cannot write to {}: {e}", cfg.output.display());
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let wall = start.elapsed().as_secs_f64();
    let m = output::manifest(&cfg, &files, &outcome.scalars, &outcome.failures, wall);
    if let Err(e) = output::write_manifest(&cfg.output, &m) {
        eprintln!("error: cannot write manifest: {e}");
        return ExitCode::from(EXIT_CONFIG);
    }

    for (k, v) in &outcome.scalars {
        println!("{k} = {v}");
    }
    if outcome.failures.is_empty() {
        println!("{}: ok ({wall:.2}s), outputs in {}", cfg.command, cfg.output.display());
        ExitCode::SUCCESS
    } else {
        for f in &outcome.failures {
            eprintln!("invariant failed: {f}");
        }
        ExitCode::from(EXIT_INVARIANT)
    }
}
