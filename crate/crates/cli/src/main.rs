use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use kzquench_cli::commands::{outcome, persist, prepare_out_dir};
use kzquench_cli::fit::FitModel;
use kzquench_cli::{run, CliError, Command, Overrides, RunConfig};

#[derive(Parser)]
#[command(
    name = "kzquench",
    version,
    about = "Quench schedules, defect densities and scaling fits for the transverse-field Ising chain"
)]
struct Cli {
    /// TOML configuration, or a manifest.json from an earlier run.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Step factor of the integrator.
    #[arg(long, global = true)]
    eta: Option<f64>,
    /// Chain length N.
    #[arg(long, global = true)]
    modes: Option<usize>,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Dump t, epsilon, g and the two timescales of one schedule.
    Schedule,
    /// Integrate a single quench.
    Quench,
    /// One run per (g_i, r, zeta, W, tau_Q) tuple.
    Sweep,
    /// (W, tau_Q) grid with per-W optimal quench times and the s' fit.
    NoiseSweep,
    /// Fit a scaling law to a runs.csv table.
    Fit {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, value_enum)]
        model: Option<FitModel>,
    },
}

fn main_inner(cli: Cli) -> Result<(), CliError> {
    let started = Instant::now();
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cfg.apply(&Overrides {
        out: cli.out,
        workers: cli.workers,
        eta: cli.eta,
        modes: cli.modes,
    });
    cfg.validate_common()?;
    prepare_out_dir(&cfg.run.out)?;
    let cmd = match cli.command {
        Sub::Schedule => Command::Schedule,
        Sub::Quench => Command::Quench,
        Sub::Sweep => Command::Sweep,
        Sub::NoiseSweep => Command::NoiseSweep,
        Sub::Fit { input, model } => Command::Fit { input, model },
    };
    let out = run(&cmd, &cfg)?;
    persist(&cfg, &out, started)?;
    print!("{}", out.report);
    outcome(&out)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match main_inner(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("kzquench: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
