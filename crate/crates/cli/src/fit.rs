//! Fits over a `runs.csv` table and the fit-report format.
//!
//! The report is printed as `key = value` lines and written as a one-row CSV
//! with header `model,exponent,prefactor,r_squared,n_points,theory,rel_deviation`.
//! For `zeta_collapse` the exponent column holds `y` and the prefactor column
//! holds `x`; for `akz_optimal` the exponent is `s'` in `tau_opt ~ W^(-s')`.

use std::collections::BTreeMap;

use kzquench::scaling::{
    fit_power_law, fit_zeta_collapse, optimal_tau, theory_exponents, OptimalTau, PowerLawFit,
    ZetaCollapse, ZetaRow,
};
use kzquench::CriticalData;
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::runner::{write_csv, RunRecord};

pub const FIT_HEADER: [&str; 7] = [
    "model",
    "exponent",
    "prefactor",
    "r_squared",
    "n_points",
    "theory",
    "rel_deviation",
];

pub const OPTIMAL_HEADER: [&str; 4] = ["W", "tau_tilde", "n_min", "status"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum FitModel {
    Kz,
    ZetaCollapse,
    AkzOptimal,
    Nlkz,
}

impl FitModel {
    pub fn name(self) -> &'static str {
        match self {
            FitModel::Kz => "kz",
            FitModel::ZetaCollapse => "zeta_collapse",
            FitModel::AkzOptimal => "akz_optimal",
            FitModel::Nlkz => "nlkz",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub model: FitModel,
    pub exponent: f64,
    pub prefactor: f64,
    pub r_squared: f64,
    pub n_points: usize,
    pub theory: f64,
    pub rel_deviation: f64,
}

impl FitReport {
    fn new(model: FitModel, exponent: f64, prefactor: f64, fit: &PowerLawFit, theory: f64) -> Self {
        Self {
            model,
            exponent,
            prefactor,
            r_squared: fit.r_squared,
            n_points: fit.n_points,
            theory,
            rel_deviation: (exponent - theory).abs() / theory.abs(),
        }
    }

    pub fn key_values(&self) -> String {
        format!(
            "model = {}\nexponent = {}\nprefactor = {}\nr_squared = {}\nn_points = {}\ntheory = {}\nrel_deviation = {}\n",
            self.model.name(),
            self.exponent,
            self.prefactor,
            self.r_squared,
            self.n_points,
            self.theory,
            self.rel_deviation
        )
    }

    pub fn csv(&self) -> String {
        write_csv(
            &FIT_HEADER,
            [vec![
                self.model.name().to_string(),
                self.exponent.to_string(),
                self.prefactor.to_string(),
                self.r_squared.to_string(),
                self.n_points.to_string(),
                self.theory.to_string(),
                self.rel_deviation.to_string(),
            ]],
        )
    }
}

fn usable(records: &[RunRecord]) -> Vec<(&RunRecord, f64)> {
    records
        .iter()
        .filter(|r| r.status == "ok")
        .filter_map(|r| r.n.map(|n| (r, n)))
        .collect()
}

fn single<T: PartialEq + Copy + std::fmt::Display>(
    what: &str,
    values: impl IntoIterator<Item = T>,
) -> Result<T, CliError> {
    let mut it = values.into_iter();
    let first = it
        .next()
        .ok_or_else(|| CliError::run("no usable rows in the runs table"))?;
    if let Some(other) = it.find(|v| *v != first) {
        return Err(CliError::config(format!(
            "table mixes {what} values ({first} and {other}); filter it first"
        )));
    }
    Ok(first)
}

fn run_err(e: impl std::fmt::Display) -> CliError {
    CliError::run(e.to_string())
}

/// Minimum of every `W > 0` curve, in ascending `W`.
pub fn optimal_by_noise(records: &[RunRecord]) -> Vec<(f64, Result<OptimalTau, String>)> {
    let mut curves: BTreeMap<u64, (f64, Vec<(f64, f64)>)> = BTreeMap::new();
    for (r, n) in usable(records) {
        if r.w > 0.0 {
            curves
                .entry(r.w.to_bits())
                .or_insert_with(|| (r.w, Vec::new()))
                .1
                .push((r.tau_q, n));
        }
    }
    curves
        .into_values()
        .map(|(w, rows)| (w, optimal_tau(&rows).map_err(|e| e.to_string())))
        .collect()
}

pub fn optimal_csv(rows: &[(f64, Result<OptimalTau, String>)]) -> String {
    write_csv(
        &OPTIMAL_HEADER,
        rows.iter().map(|(w, res)| match res {
            Ok(o) => vec![
                w.to_string(),
                o.tau_tilde.to_string(),
                o.n_min.to_string(),
                "ok".into(),
            ],
            Err(e) => vec![
                w.to_string(),
                String::new(),
                String::new(),
                format!("flagged: {e}"),
            ],
        }),
    )
}

fn akz_theory(records: &[(&RunRecord, f64)], crit: &CriticalData) -> Result<f64, CliError> {
    let protocol = single("protocol", records.iter().map(|(r, _)| r.protocol.as_str()))?;
    let r = single("r", records.iter().map(|(r, _)| r.r))?;
    let alpha = single(
        "alpha",
        records
            .iter()
            .map(|(r, _)| r.alpha.unwrap_or(f64::NAN).to_bits()),
    )
    .map(f64::from_bits)?;
    let fixed_zeta = alpha.is_nan();
    let th = theory_exponents(if fixed_zeta { 0.0 } else { alpha }, r, crit);
    Ok(match protocol {
        "lq" => th.s_lq,
        "nlq" => th.s_nlq,
        "oai" => th.s_oai,
        "nloai" if fixed_zeta => th.s_nloai,
        "nloai" => 2.0 / (th.beta_nlkz + th.t_exponent),
        other => {
            return Err(CliError::config(format!(
                "unknown protocol label `{other}`"
            )))
        }
    })
}

/// Fits `model` to the usable rows of a runs table.
pub fn fit_runs(
    records: &[RunRecord],
    model: FitModel,
    crit: &CriticalData,
) -> Result<FitReport, CliError> {
    let rows = usable(records);
    if rows.is_empty() {
        return Err(CliError::run("no usable rows in the runs table"));
    }
    match model {
        FitModel::Kz | FitModel::Nlkz => {
            let points: Vec<(f64, f64)> = rows.iter().map(|(r, n)| (r.tau_q, *n)).collect();
            let fit = fit_power_law(&points).map_err(run_err)?;
            let theory = if model == FitModel::Kz {
                -theory_exponents(0.0, 1.0, crit).beta_kz
            } else {
                let r = single("r", rows.iter().map(|(r, _)| r.r))?;
                -theory_exponents(0.0, r, crit).beta_nlkz
            };
            Ok(FitReport::new(
                model,
                fit.exponent,
                fit.prefactor(),
                &fit,
                theory,
            ))
        }
        FitModel::ZetaCollapse => {
            let zrows: Vec<ZetaRow> = rows
                .iter()
                .filter_map(|(r, n)| {
                    r.zeta.map(|zeta| ZetaRow {
                        tau_q: r.tau_q,
                        zeta,
                        n: *n,
                    })
                })
                .collect();
            let (c, fit) = fit_zeta_collapse(&zrows).map_err(run_err)?;
            Ok(FitReport::new(
                model,
                c.y,
                c.x,
                &fit,
                ZetaCollapse::REFERENCE.y,
            ))
        }
        FitModel::AkzOptimal => {
            let theory = akz_theory(&rows, crit)?;
            let minima = optimal_by_noise(records);
            for (w, res) in &minima {
                if let Err(e) = res {
                    log::warn!("W = {w} skipped: {e}");
                }
            }
            let points: Vec<(f64, f64)> = minima
                .iter()
                .filter_map(|(w, res)| res.as_ref().ok().map(|o| (*w, o.tau_tilde)))
                .collect();
            let fit = fit_power_law(&points).map_err(run_err)?;
            Ok(FitReport::new(
                model,
                -fit.exponent,
                fit.prefactor(),
                &fit,
                theory,
            ))
        }
    }
}
