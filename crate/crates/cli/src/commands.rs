//! The five subcommands. Each builds its output files in memory; [`persist`]
//! writes them together with `manifest.json`.

use std::path::{Path, PathBuf};
use std::time::Instant;

use kzquench::protocols::Branch;

use crate::config::{Purpose, RunConfig};
use crate::error::CliError;
use crate::fit::{fit_runs, optimal_by_noise, optimal_csv, FitModel};
use crate::manifest::{FileEntry, RunManifest, Timings, TOOL};
use crate::runner::{execute, expand, read_runs, runs_csv, write_csv, RunOutcome};

pub const SCHEDULE_HEADER: [&str; 5] = ["t", "epsilon", "g", "drive_timescale", "relax_timescale"];

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Schedule,
    Quench,
    Sweep,
    NoiseSweep,
    Fit {
        input: Option<PathBuf>,
        model: Option<FitModel>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Schedule => "schedule",
            Command::Quench => "quench",
            Command::Sweep => "sweep",
            Command::NoiseSweep => "noise-sweep",
            Command::Fit { .. } => "fit",
        }
    }
}

/// Files (relative path, contents) and the text printed on stdout.
#[derive(Debug, Clone, Default)]
pub struct CommandOutput {
    pub command: String,
    pub files: Vec<(String, String)>,
    pub report: String,
    pub failed_runs: usize,
    pub tau_grid: Vec<f64>,
    pub noise_grid: Vec<f64>,
    pub run_seconds: Vec<f64>,
}

impl CommandOutput {
    pub fn file(&self, path: &str) -> Option<&str> {
        self.files
            .iter()
            .find(|(p, _)| p == path)
            .map(|(_, c)| c.as_str())
    }
}

pub fn run(cmd: &Command, cfg: &RunConfig) -> Result<CommandOutput, CliError> {
    match cmd {
        Command::Schedule => cmd_schedule(cfg),
        Command::Quench => cmd_quench(cfg),
        Command::Sweep => cmd_sweep(cfg),
        Command::NoiseSweep => cmd_noise_sweep(cfg),
        Command::Fit { input, model } => {
            let input = input
                .clone()
                .or_else(|| cfg.fit.input.clone())
                .ok_or_else(|| CliError::config("fit needs --input or [fit] input"))?;
            let model = model
                .or(cfg.fit.model)
                .ok_or_else(|| CliError::config("fit needs --model or [fit] model"))?;
            let text = std::fs::read_to_string(&input)
                .map_err(|e| CliError::config(format!("cannot read {}: {e}", input.display())))?;
            cmd_fit(cfg, &text, model)
        }
    }
}

fn fmt_cell(x: f64) -> String {
    x.to_string()
}

/// `t, epsilon, g, drive_timescale, relax_timescale` for the first tuple of
/// the configuration, on `samples` uniform times plus `t = 0`.
pub fn cmd_schedule(cfg: &RunConfig) -> Result<CommandOutput, CliError> {
    let specs = expand(cfg, Purpose::Schedule)?;
    let p = specs[0].protocol(cfg)?;
    let (a, b) = p.window();
    let n = cfg.schedule.samples;
    let mut times: Vec<f64> = (0..n)
        .map(|k| {
            if k + 1 == n {
                b
            } else {
                a + (b - a) * k as f64 / (n - 1) as f64
            }
        })
        .collect();
    if !times.contains(&0.0) {
        let at = times.partition_point(|&t| t < 0.0);
        times.insert(at, 0.0);
    }
    let mut rows = Vec::with_capacity(times.len());
    for &t in &times {
        let ts = p.timescales(t, Branch::Full)?;
        rows.push(vec![
            fmt_cell(t),
            fmt_cell(p.epsilon(t)?),
            fmt_cell(p.g_of_t(t)?),
            fmt_cell(ts.drive),
            fmt_cell(ts.relax),
        ]);
    }
    Ok(CommandOutput {
        command: "schedule".into(),
        files: vec![("schedule.csv".into(), write_csv(&SCHEDULE_HEADER, rows))],
        report: format!(
            "protocol = {}\nt_i = {a}\nt_f = {b}\ntotal_time = {}\nrows = {}\n",
            p.label(),
            p.total_time(),
            times.len()
        ),
        tau_grid: vec![specs[0].tau_q],
        noise_grid: vec![specs[0].w],
        ..Default::default()
    })
}

fn assemble(
    command: &str,
    cfg: &RunConfig,
    purpose: Purpose,
    outcomes: &[RunOutcome],
) -> Result<CommandOutput, CliError> {
    let failed = outcomes.iter().filter(|o| !o.ok()).count();
    Ok(CommandOutput {
        command: command.into(),
        files: vec![("runs.csv".into(), runs_csv(outcomes))],
        report: format!("runs = {}\nfailed = {failed}\n", outcomes.len()),
        failed_runs: failed,
        tau_grid: cfg.tau_grid(purpose)?,
        noise_grid: cfg.noise_grid(purpose)?,
        run_seconds: outcomes.iter().map(|o| o.seconds).collect(),
    })
}

/// One quench; the configuration must describe exactly one tuple.
pub fn cmd_quench(cfg: &RunConfig) -> Result<CommandOutput, CliError> {
    let specs = expand(cfg, Purpose::Quench)?;
    if specs.len() != 1 {
        return Err(CliError::config(format!(
            "quench runs a single tuple, the configuration expands to {}; use sweep",
            specs.len()
        )));
    }
    let outcomes = execute(&specs, cfg)?;
    let mut out = assemble("quench", cfg, Purpose::Quench, &outcomes)?;
    if let Ok(r) = &outcomes[0].result {
        out.files.push(("modes.csv".into(), r.modes_csv()));
        out.report.push_str(&format!("n = {}\n", r.defect_density));
    }
    Ok(out)
}

pub fn cmd_sweep(cfg: &RunConfig) -> Result<CommandOutput, CliError> {
    let specs = expand(cfg, Purpose::Sweep)?;
    let outcomes = execute(&specs, cfg)?;
    let mut out = assemble("sweep", cfg, Purpose::Sweep, &outcomes)?;
    if cfg.run.write_modes {
        for (i, o) in outcomes.iter().enumerate() {
            if let Ok(r) = &o.result {
                out.files
                    .push((format!("modes/run_{i:04}.csv"), r.modes_csv()));
            }
        }
    }
    Ok(out)
}

/// `(W, tau_q)` grid, the per-`W` minima and the `s'` fit.
pub fn cmd_noise_sweep(cfg: &RunConfig) -> Result<CommandOutput, CliError> {
    let specs = expand(cfg, Purpose::NoiseSweep)?;
    let outcomes = execute(&specs, cfg)?;
    let mut out = assemble("noise-sweep", cfg, Purpose::NoiseSweep, &outcomes)?;
    let runs = read_runs(&out.files[0].1)?;
    let minima = optimal_by_noise(&runs);
    out.files
        .push(("optimal_tau.csv".into(), optimal_csv(&minima)));
    for (w, res) in &minima {
        match res {
            Ok(o) => out.report.push_str(&format!(
                "W = {w}: tau_tilde = {}, n_min = {}\n",
                o.tau_tilde, o.n_min
            )),
            Err(e) => out.report.push_str(&format!("W = {w}: flagged: {e}\n")),
        }
    }
    match fit_runs(&runs, FitModel::AkzOptimal, &cfg.crit()) {
        Ok(rep) => {
            out.report.push_str(&rep.key_values());
            out.files.push(("optimal_tau_fit.csv".into(), rep.csv()));
        }
        Err(e) => out.report.push_str(&format!("fit: {e}\n")),
    }
    Ok(out)
}

pub fn cmd_fit(
    cfg: &RunConfig,
    runs_text: &str,
    model: FitModel,
) -> Result<CommandOutput, CliError> {
    let runs = read_runs(runs_text)?;
    let report = fit_runs(&runs, model, &cfg.crit())?;
    Ok(CommandOutput {
        command: "fit".into(),
        files: vec![(format!("fit_{}.csv", model.name()), report.csv())],
        report: report.key_values(),
        ..Default::default()
    })
}

/// Checks that the output directory exists or can be created.
pub fn prepare_out_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| {
        CliError::config(format!(
            "output directory {} is not writable: {e}",
            dir.display()
        ))
    })
}

/// Writes every output file and `manifest.json` under `cfg.run.out`.
pub fn persist(
    cfg: &RunConfig,
    out: &CommandOutput,
    started: Instant,
) -> Result<RunManifest, CliError> {
    let dir = &cfg.run.out;
    prepare_out_dir(dir)?;
    let mut entries = Vec::with_capacity(out.files.len());
    for (rel, contents) in &out.files {
        let path = dir.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&path, contents)?;
        entries.push(FileEntry::describe(rel, contents));
    }
    let manifest = RunManifest {
        tool: TOOL.into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: out.command.clone(),
        config: cfg.clone(),
        tau_grid: out.tau_grid.clone(),
        noise_grid: out.noise_grid.clone(),
        workers: cfg.run.workers,
        files: entries,
        timings: Timings {
            total_seconds: started.elapsed().as_secs_f64(),
            run_seconds: out.run_seconds.clone(),
        },
    };
    std::fs::write(dir.join("manifest.json"), manifest.to_json())?;
    Ok(manifest)
}

/// Maps run failures to an error after the output has been written.
pub fn outcome(out: &CommandOutput) -> Result<(), CliError> {
    if out.failed_runs > 0 {
        return Err(CliError::run(format!(
            "{} of the runs failed; see runs.csv",
            out.failed_runs
        )));
    }
    Ok(())
}
