//! Parameter tuples, their parallel execution and the `runs.csv` schema.

use std::time::Instant;

use kzquench::protocols::make_nloai_with;
use kzquench::{defect_density, make_linear, make_nlq, QuenchProtocol, QuenchResult};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Kind, Purpose, RunConfig};
use crate::error::CliError;

pub const RUNS_HEADER: [&str; 13] = [
    "protocol", "tau_Q", "zeta", "alpha", "r", "W", "N", "g_i", "g_f", "T_total", "n", "dt_eta",
    "status",
];

/// One point of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub kind: Kind,
    pub tau_q: f64,
    pub zeta: Option<f64>,
    pub alpha: Option<f64>,
    pub r: f64,
    pub w: f64,
    pub g_i: f64,
    pub g_f: f64,
}

impl RunSpec {
    pub fn protocol(&self, cfg: &RunConfig) -> Result<QuenchProtocol, CliError> {
        let crit = cfg.crit();
        let p = match self.kind {
            Kind::Lq => make_linear(self.tau_q, self.g_i, self.g_f, crit)?,
            Kind::Nlq => make_nlq(self.tau_q, self.r, self.g_i, self.g_f, crit)?,
            Kind::Oai | Kind::Nloai => make_nloai_with(
                self.tau_q,
                self.zeta.unwrap_or(f64::NAN),
                self.r,
                self.g_i,
                self.g_f,
                crit,
                cfg.protocol.regime.into(),
            )?,
        };
        Ok(p)
    }
}

/// Expands the configuration into run tuples, nested as
/// `g_i -> r -> zeta -> W -> tau_q` (`tau_q` varies fastest).
pub fn expand(cfg: &RunConfig, purpose: Purpose) -> Result<Vec<RunSpec>, CliError> {
    cfg.validate_common()?;
    let taus = cfg.tau_grid(purpose)?;
    let ws = cfg.noise_grid(purpose)?;
    let kind = cfg.protocol.kind;
    let mut specs = Vec::new();
    for &g_i in &cfg.protocol.g_i {
        for &r in &cfg.protocol.r {
            let zetas: Vec<Vec<(f64, Option<f64>)>> = if kind.uses_zeta() {
                taus.iter().map(|&t| cfg.zeta.resolve(t)).collect()
            } else {
                taus.iter().map(|_| vec![(f64::NAN, None)]).collect()
            };
            let n_zeta = zetas[0].len();
            for iz in 0..n_zeta {
                for &w in &ws {
                    for (it, &tau_q) in taus.iter().enumerate() {
                        let (zeta, alpha) = zetas[it][iz];
                        specs.push(RunSpec {
                            kind,
                            tau_q,
                            zeta: kind.uses_zeta().then_some(zeta),
                            alpha: if kind.uses_zeta() { alpha } else { None },
                            r,
                            w,
                            g_i,
                            g_f: cfg.protocol.g_f,
                        });
                    }
                }
            }
        }
    }
    // every protocol must be constructible before anything runs
    for s in &specs {
        s.protocol(cfg)?;
        cfg.noise(s.w).validate().map_err(CliError::config)?;
    }
    Ok(specs)
}

/// Outcome of one run; `result` holds the error text when the integration failed.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub spec: RunSpec,
    pub n_sites: usize,
    pub eta: f64,
    pub total_time: f64,
    pub result: Result<QuenchResult, String>,
    pub seconds: f64,
}

impl RunOutcome {
    pub fn ok(&self) -> bool {
        self.result.is_ok()
    }

    pub fn defect_density(&self) -> Option<f64> {
        self.result.as_ref().ok().map(|r| r.defect_density)
    }

    pub fn status(&self) -> String {
        match &self.result {
            Ok(_) => "ok".into(),
            Err(e) => format!("error: {e}"),
        }
    }
}

fn run_one(spec: &RunSpec, cfg: &RunConfig) -> RunOutcome {
    let start = Instant::now();
    let n_sites = cfg.run.modes;
    let policy = cfg.policy();
    let (total_time, result) = match spec.protocol(cfg) {
        Ok(p) => (
            p.total_time(),
            defect_density(&p, n_sites, &cfg.noise(spec.w), &policy).map_err(|e| e.to_string()),
        ),
        Err(e) => (f64::NAN, Err(e.to_string())),
    };
    match &result {
        Ok(r) => log::info!(
            "{} tau_q = {} zeta = {:?} W = {}: n = {} ({:.2} s)",
            spec.kind.label(),
            spec.tau_q,
            spec.zeta,
            spec.w,
            r.defect_density,
            start.elapsed().as_secs_f64()
        ),
        Err(e) => log::error!("run tau_q = {} W = {} failed: {e}", spec.tau_q, spec.w),
    }
    RunOutcome {
        spec: *spec,
        n_sites,
        eta: policy.eta,
        total_time,
        result,
        seconds: start.elapsed().as_secs_f64(),
    }
}

pub fn thread_pool(workers: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::config(format!("cannot start {workers} workers: {e}")))
}

/// Runs every tuple on a pool of `cfg.run.workers` threads; outcomes come
/// back in input order.
pub fn execute(specs: &[RunSpec], cfg: &RunConfig) -> Result<Vec<RunOutcome>, CliError> {
    let pool = thread_pool(cfg.run.workers)?;
    Ok(pool.install(|| specs.par_iter().map(|s| run_one(s, cfg)).collect()))
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn finite(x: f64) -> String {
    if x.is_finite() {
        x.to_string()
    } else {
        String::new()
    }
}

fn csv_bytes<I, R>(header: &[&str], rows: I) -> Vec<u8>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(row.into_iter().collect::<Vec<_>>())
            .expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

pub fn write_csv<I, R>(header: &[&str], rows: I) -> String
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    String::from_utf8(csv_bytes(header, rows)).expect("csv output is utf-8")
}

pub fn runs_csv(outcomes: &[RunOutcome]) -> String {
    write_csv(
        &RUNS_HEADER,
        outcomes.iter().map(|o| {
            let s = &o.spec;
            vec![
                s.kind.label().to_string(),
                s.tau_q.to_string(),
                opt(s.zeta),
                opt(s.alpha),
                s.r.to_string(),
                s.w.to_string(),
                o.n_sites.to_string(),
                s.g_i.to_string(),
                s.g_f.to_string(),
                finite(o.total_time),
                opt(o.defect_density()),
                o.eta.to_string(),
                o.status(),
            ]
        }),
    )
}

/// A parsed `runs.csv` row.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct RunRecord {
    pub protocol: String,
    #[serde(rename = "tau_Q")]
    pub tau_q: f64,
    pub zeta: Option<f64>,
    pub alpha: Option<f64>,
    pub r: f64,
    #[serde(rename = "W")]
    pub w: f64,
    #[serde(rename = "N")]
    pub n_sites: usize,
    pub g_i: f64,
    pub g_f: f64,
    #[serde(rename = "T_total")]
    pub t_total: Option<f64>,
    pub n: Option<f64>,
    pub dt_eta: f64,
    pub status: String,
}

pub fn read_runs(text: &str) -> Result<Vec<RunRecord>, CliError> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header = rdr
        .headers()
        .map_err(|e| CliError::config(format!("runs table: {e}")))?
        .clone();
    if header.iter().ne(RUNS_HEADER.iter().copied()) {
        return Err(CliError::config(format!(
            "runs table schema mismatch: expected `{}`, found `{}`",
            RUNS_HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    rdr.deserialize()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| CliError::config(format!("runs table row {}: {e}", i + 1))))
        .collect()
}
