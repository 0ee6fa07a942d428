//! Experiment runner for averaging-based finite element projections.
//!
//! Exit codes: 0 all checks passed, 1 an asserted tolerance failed,
//! 2 configuration error, 3 runtime failure.

mod config;
mod runner;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::ExperimentConfig;
use runner::RunError;

#[derive(Parser)]
#[command(name = "feecavg", version, about = "finite element projection experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a JSON config file
    Run {
        /// path to the config file
        config: PathBuf,
        /// directory for report files (default: current directory)
        #[arg(long, default_value = ".")]
        output_dir: PathBuf,
    },
    /// List mesh generators, named spaces, fields, weights, and backends
    List,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::List => {
            print!("{}", runner::catalog_listing());
            ExitCode::SUCCESS
        }
        Command::Run { config, output_dir } => {
            let text = match std::fs::read_to_string(&config) {
                Ok(text) => text,
                Err(e) => {
                    eprintln!("cannot read {}: {e}", config.display());
                    return ExitCode::from(2);
                }
            };
            let config = match ExperimentConfig::from_json(&text) {
                Ok(config) => config,
                Err(e) => {
                    eprintln!("{e}");
                    return ExitCode::from(2);
                }
            };
            match runner::run_experiment(&config, &output_dir) {
                Ok(report) => {
                    for (ns, slope) in &report.slopes {
                        println!("norm {}: fitted slope {slope:.4}", ns.label());
                    }
                    println!(
                        "local-vs-global ratio {:.4}, projection property error {:.3e}",
                        report.local_vs_global_ratio, report.projection_property_error
                    );
                    ExitCode::SUCCESS
                }
                Err(RunError::AssertionFailed(msg)) => {
                    eprintln!("assertion failed: {msg}");
                    ExitCode::from(1)
                }
                Err(RunError::Runtime(msg)) => {
                    eprintln!("runtime failure: {msg}");
                    ExitCode::from(3)
                }
            }
        }
    }
}
