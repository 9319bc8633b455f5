//! Command-line front end: run a configured experiment, list the registered
//! presets, or validate a config without running it.
//!
//! Exit codes: 0 when every verdict passes, 1 when any fails (or the run
//! itself breaks down), 2 for configuration errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use qpflow::error::Error;
use qpflow::experiment::{list_presets, run_preset, ExperimentConfig, OUTPUT_ROOT_ENV};

#[derive(Parser)]
#[command(
    name = "qpflow",
    version,
    about = "Quasilinear degenerate parabolic flow laboratory",
    after_help = format!(
        "Relative output paths resolve against ${OUTPUT_ROOT_ENV} when it is set."
    )
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the experiment described by a TOML config file.
    Run { config: PathBuf },
    /// List the registered experiment presets.
    ListPresets,
    /// Parse and validate a config file without running anything.
    Validate { config: PathBuf },
}

fn main() -> ExitCode {
    match Cli::parse().cmd {
        Cmd::ListPresets => {
            for info in list_presets() {
                println!("{:<26} {}", info.name, info.summary);
            }
            ExitCode::SUCCESS
        }
        Cmd::Validate { config } => match load_and_validate(&config) {
            Ok(cfg) => {
                println!("OK: preset '{}' -> {}", cfg.preset, cfg.output_dir().display());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("{e}");
                ExitCode::from(2)
            }
        },
        Cmd::Run { config } => {
            let cfg = match load_and_validate(&config) {
                Ok(cfg) => cfg,
                Err(e) => {
                    eprintln!("{e}");
                    return ExitCode::from(2);
                }
            };
            match run_preset(&cfg) {
                Ok(manifest) => {
                    for v in &manifest.verdicts {
                        println!(
                            "{} {:<28} value {:<14.6e} {}",
                            if v.pass { "PASS" } else { "FAIL" },
                            v.name,
                            v.value,
                            v.detail
                        );
                    }
                    println!(
                        "{}: {} in {:.2}s -> {}",
                        if manifest.all_pass { "PASS" } else { "FAIL" },
                        manifest.preset,
                        manifest.runtime_seconds,
                        cfg.output_dir().display()
                    );
                    if manifest.all_pass {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(1)
                    }
                }
                Err(e @ Error::Config(_)) => {
                    eprintln!("{e}");
                    ExitCode::from(2)
                }
                Err(e) => {
                    eprintln!("run failed: {e}");
                    ExitCode::from(1)
                }
            }
        }
    }
}

fn load_and_validate(path: &PathBuf) -> qpflow::Result<ExperimentConfig> {
    let cfg = ExperimentConfig::load(path)?;
    cfg.validate()?;
    Ok(cfg)
}
