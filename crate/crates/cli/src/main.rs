use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use shiftmor_cli::config::{self, Sources};
use shiftmor_cli::presets::PRESETS;
use shiftmor_cli::runner::{self, RunError};

#[derive(Parser)]
#[command(name = "shiftmor", version, about = "Relaxation solver with shifted basis functions and POD reduction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the full-order model.
    RunFull(Common),
    /// Train a POD basis from full-order runs.
    RunPod(Common),
    /// Integrate the reduced model and compare it with the full model and finite volumes.
    RunReduced(WithBasis),
    /// Compare the full (and, with a rank, reduced) model against the finite-volume reference.
    CompareFv(WithBasis),
    /// Print the built-in presets.
    ListPresets,
}

#[derive(Args)]
struct Common {
    /// Config file (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in preset applied before the config file.
    #[arg(long)]
    preset: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// `key=value` applied last; repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output times, comma separated.
    #[arg(long, value_delimiter = ',')]
    times: Option<Vec<f64>>,
}

#[derive(Args)]
struct WithBasis {
    #[command(flatten)]
    common: Common,
    /// Directory holding basis files written by `run-pod`.
    #[arg(long)]
    basis: Option<PathBuf>,
}

fn load(c: &Common) -> Result<config::ExperimentConfig, RunError> {
    let mut overrides = c.overrides.clone();
    if let Some(times) = &c.times {
        let list: Vec<String> = times.iter().map(|t| format!("{t:?}")).collect();
        overrides.push(format!("times=[{}]", list.join(",")));
    }
    Ok(config::load(&Sources {
        preset: c.preset.as_deref(),
        file: c.config.as_deref(),
        overrides: &overrides,
        output_dir: c.out.as_deref(),
    })?)
}

fn run(cli: Cli) -> Result<(), RunError> {
    let report = match cli.command {
        Command::ListPresets => {
            for p in PRESETS {
                println!("{:<16} {}", p.name, p.summary);
            }
            return Ok(());
        }
        Command::RunFull(c) => runner::run_full(&load(&c)?)?,
        Command::RunPod(c) => runner::run_pod(&load(&c)?)?,
        Command::RunReduced(w) => runner::run_reduced(&load(&w.common)?, w.basis.as_deref())?,
        Command::CompareFv(w) => runner::compare_fv(&load(&w.common)?, w.basis.as_deref())?,
    };
    print!("{}", report.render_entries());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
