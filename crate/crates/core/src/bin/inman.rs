use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use inman::error::Error;
use inman::experiment::{self, ExperimentConfig};
use inman::presets;

#[derive(Parser)]
#[command(
    name = "inman",
    version,
    about = "Invariant-set experiments for spectrally truncated semilinear evolution equations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a config-driven experiment and write its reports.
    Run {
        /// Path to the experiment TOML config.
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides the config's `out_dir`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker thread count (default: INMAN_JOBS or all cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Print a preset's spectrum, constants, and validity flags.
    Describe { preset: String },
    /// Regenerate the certified constants for a preset.
    Certify {
        preset: String,
        #[arg(long, default_value_t = 20000)]
        samples: usize,
        #[arg(long, default_value_t = 20240501)]
        seed: u64,
    },
}

/// Exit code 2 for configuration problems, 1 for numeric failures.
fn classify(err: &Error) -> u8 {
    match err {
        Error::Config(_)
        | Error::UnknownPreset(_)
        | Error::Toml(_)
        | Error::Io(_)
        | Error::DimensionMismatch { .. } => 2,
        _ => 1,
    }
}

fn init_threads(jobs: Option<usize>) {
    let jobs = jobs.or_else(|| {
        std::env::var("INMAN_JOBS")
            .ok()
            .and_then(|s| s.parse().ok())
    });
    if let Some(jobs) = jobs {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, out, jobs } => {
            init_threads(jobs);
            let config = match ExperimentConfig::from_path(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("config error: {e}");
                    return ExitCode::from(2);
                }
            };
            let out_dir = out
                .or_else(|| config.out_dir.clone())
                .unwrap_or_else(|| PathBuf::from("out"));
            match experiment::run(&config, &out_dir) {
                Ok(outcome) => {
                    print!("{}", outcome.summary);
                    println!("report: {}", out_dir.join("report.json").display());
                    if outcome.pass {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(1)
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(classify(&e))
                }
            }
        }
        Command::Describe { preset } => match experiment::describe(&preset) {
            Ok(text) => {
                print!("{text}");
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        },
        Command::Certify {
            preset,
            samples,
            seed,
        } => {
            let config = match presets::load_preset(&preset) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            match presets::certify(&config, samples, seed) {
                Ok(certified) => {
                    println!("preset {preset} (samples = {samples}, seed = {seed})");
                    println!("  ball_estimate = {}", certified.ball_estimate);
                    println!("  k0_raw        = {}", certified.k0_raw);
                    println!("  r_trunc       = {}", certified.r_trunc);
                    println!("  k0            = {}", certified.k0);
                    println!("  k1            = {}", certified.k1);
                    println!("  pinned k0     = {}", config.constants.k0);
                    println!("  pinned k1     = {}", config.constants.k1);
                    println!("  pinned r      = {}", config.constants.r_trunc);
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(classify(&e))
                }
            }
        }
    }
}
