use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fell_core::generator::{generate_scenario, GenParams, GroupKind};
use fell_core::pipeline::{run_path, Command, RunOptions, EXIT_PARSE};

/// Finite groupoid crossed products, checked exactly.
#[derive(Parser)]
#[command(name = "fellcheck", version)]
struct Cli {
    #[command(subcommand)]
    action: Action,
}

#[derive(Subcommand)]
enum Action {
    /// Run a command on a scenario file and write the JSON report.
    Run {
        scenario: PathBuf,
        /// validate | build | verify-measures | verify-theorem
        #[arg(long, default_value = "verify-theorem")]
        command: Command,
        /// Report destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Relative tolerance for norm comparisons.
        #[arg(long, default_value_t = fell_core::isomorphism::NORM_TOLERANCE)]
        tolerance: f64,
    },
    /// Write a deterministic pseudo-random scenario.
    Gen {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of units of the groupoid being acted on.
        #[arg(long)]
        units: Option<usize>,
        /// z1..z6, k4, s3 or p2.
        #[arg(long)]
        group: Option<String>,
        /// Largest unit fiber dimension (1..=3).
        #[arg(long)]
        max_dim: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn write(out: Option<&PathBuf>, text: &str) -> Result<(), String> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| format!("cannot write {}: {e}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.action {
        Action::Run { scenario, command, out, tolerance } => {
            let report = run_path(&scenario, command, &RunOptions { tolerance });
            for c in &report.certificates {
                eprintln!("{:<12} {}", c.name, if c.passed { "passed" } else { "FAILED" });
            }
            if let Some(e) = &report.error {
                eprintln!("{} error: {}", e.class, e.message);
            }
            if let Err(e) = write(out.as_ref(), &report.to_json()) {
                eprintln!("{e}");
                return ExitCode::from(EXIT_PARSE as u8);
            }
            ExitCode::from(report.exit_code as u8)
        }
        Action::Gen { seed, units, group, max_dim, out } => {
            let group = match group.as_deref().map(GroupKind::parse).transpose() {
                Ok(g) => g,
                Err(e) => {
                    eprintln!("{e}");
                    return ExitCode::from(EXIT_PARSE as u8);
                }
            };
            match generate_scenario(&GenParams { seed, units, group, max_dim }) {
                Ok(file) => match write(out.as_ref(), &file.dump()) {
                    Ok(()) => ExitCode::SUCCESS,
                    Err(e) => {
                        eprintln!("{e}");
                        ExitCode::from(EXIT_PARSE as u8)
                    }
                },
                Err(e) => {
                    eprintln!("{e}");
                    ExitCode::from(EXIT_PARSE as u8)
                }
            }
        }
    }
}
