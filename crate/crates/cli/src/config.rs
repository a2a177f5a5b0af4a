//! Run configuration: a TOML file with sections, overridable from the command
//! line.
//!
//! ```toml
//! [protocol]
//! kind = "oai"          # lq | nlq | oai | nloai
//! g_i = 2.0             # scalar or list
//! g_f = 0.0
//! r = 1.0               # scalar or list
//! regime = "kz"         # kz | unrestricted
//!
//! [zeta]
//! policy = "fixed"      # or "power" with alpha and c
//! values = [32.0]
//!
//! [tau]
//! values = [50.0, 100.0, 200.0]
//! # range = { min = 50.0, max = 3200.0, per_decade = 4 }
//!
//! [noise]
//! w = [0.0]
//! rate_scale = 1.0
//!
//! [run]
//! modes = 2000
//! eta = 0.02
//! workers = 1
//! out = "kzquench-out"
//! ```

use std::path::{Path, PathBuf};

use kzquench::dynamics::{Noise, StepPolicy};
use kzquench::protocols::{ProtocolError, ZetaRegime};
use kzquench::{AlphaPolicy, CriticalData};
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::CliError;
use crate::fit::FitModel;
use crate::manifest::RunManifest;

/// Noise grid used by `noise-sweep` when none is configured.
pub const DEFAULT_NOISE_GRID: [f64; 5] = [0.004, 0.008, 0.012, 0.016, 0.02];

fn one_or_many<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        One(f64),
        Many(Vec<f64>),
    }
    Ok(match Raw::deserialize(d)? {
        Raw::One(x) => vec![x],
        Raw::Many(v) => v,
    })
}

fn opt_one_or_many<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<f64>>, D::Error> {
    one_or_many(d).map(Some)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Lq,
    Nlq,
    Oai,
    Nloai,
}

impl Kind {
    pub fn label(self) -> &'static str {
        match self {
            Kind::Lq => "lq",
            Kind::Nlq => "nlq",
            Kind::Oai => "oai",
            Kind::Nloai => "nloai",
        }
    }

    pub fn uses_zeta(self) -> bool {
        matches!(self, Kind::Oai | Kind::Nloai)
    }

    pub fn from_label(s: &str) -> Option<Self> {
        match s {
            "lq" => Some(Kind::Lq),
            "nlq" => Some(Kind::Nlq),
            "oai" => Some(Kind::Oai),
            "nloai" => Some(Kind::Nloai),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    #[default]
    Kz,
    Unrestricted,
}

impl From<Regime> for ZetaRegime {
    fn from(r: Regime) -> Self {
        match r {
            Regime::Kz => ZetaRegime::KibbleZurek,
            Regime::Unrestricted => ZetaRegime::Unrestricted,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolSection {
    pub kind: Kind,
    #[serde(deserialize_with = "one_or_many")]
    pub g_i: Vec<f64>,
    pub g_f: f64,
    #[serde(deserialize_with = "one_or_many")]
    pub r: Vec<f64>,
    pub regime: Regime,
}

impl Default for ProtocolSection {
    fn default() -> Self {
        Self {
            kind: Kind::Oai,
            g_i: vec![2.0],
            g_f: 0.0,
            r: vec![1.0],
            regime: Regime::Kz,
        }
    }
}

/// How `zeta` is chosen for each quench time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "lowercase", deny_unknown_fields)]
pub enum ZetaPolicy {
    Fixed {
        #[serde(deserialize_with = "one_or_many")]
        values: Vec<f64>,
    },
    /// `zeta = c * tau_q^alpha`.
    Power { alpha: f64, c: f64 },
}

impl Default for ZetaPolicy {
    fn default() -> Self {
        ZetaPolicy::Fixed { values: vec![32.0] }
    }
}

impl ZetaPolicy {
    /// `(zeta, alpha)` pairs for one quench time.
    pub fn resolve(&self, tau_q: f64) -> Vec<(f64, Option<f64>)> {
        match self {
            ZetaPolicy::Fixed { values } => values.iter().map(|&z| (z, None)).collect(),
            ZetaPolicy::Power { alpha, c } => {
                vec![(AlphaPolicy::new(*alpha, *c).zeta(tau_q), Some(*alpha))]
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogRange {
    pub min: f64,
    pub max: f64,
    pub per_decade: usize,
}

impl LogRange {
    pub fn points(&self) -> Result<Vec<f64>, CliError> {
        if !(self.min > 0.0 && self.max > self.min && self.max.is_finite()) {
            return Err(CliError::config(format!(
                "log range needs 0 < min < max, got [{}, {}]",
                self.min, self.max
            )));
        }
        if self.per_decade < 2 {
            return Err(CliError::config(format!(
                "log range needs at least 2 points per decade, got {}",
                self.per_decade
            )));
        }
        let ratio = self.max / self.min;
        let intervals = ((ratio.log10() * self.per_decade as f64).round() as usize).max(1);
        Ok((0..=intervals)
            .map(|k| {
                if k == intervals {
                    self.max
                } else {
                    self.min * ratio.powf(k as f64 / intervals as f64)
                }
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TauSection {
    #[serde(
        deserialize_with = "opt_one_or_many",
        skip_serializing_if = "Option::is_none"
    )]
    pub values: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub range: Option<LogRange>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    #[serde(
        deserialize_with = "opt_one_or_many",
        skip_serializing_if = "Option::is_none"
    )]
    pub w: Option<Vec<f64>>,
    pub rate_scale: f64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self {
            w: None,
            rate_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub modes: usize,
    pub eta: f64,
    pub check_every: usize,
    pub workers: usize,
    pub out: PathBuf,
    /// Write a `q,p_q` file per run under `modes/`.
    pub write_modes: bool,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            modes: 2000,
            eta: StepPolicy::default().eta,
            check_every: StepPolicy::default().check_every,
            workers: 1,
            out: PathBuf::from("kzquench-out"),
            write_modes: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleSection {
    pub samples: usize,
}

impl Default for ScheduleSection {
    fn default() -> Self {
        Self { samples: 2000 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<FitModel>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub protocol: ProtocolSection,
    pub zeta: ZetaPolicy,
    pub tau: TauSection,
    pub noise: NoiseSection,
    pub run: RunSection,
    pub schedule: ScheduleSection,
    pub fit: FitSection,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub eta: Option<f64>,
    pub modes: Option<usize>,
}

/// Which command a configuration is resolved for; selects grid defaults.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Schedule,
    Quench,
    Sweep,
    NoiseSweep,
    Fit,
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, CliError> {
        toml::from_str(s).map_err(|e| CliError::config(format!("invalid config: {e}")))
    }

    /// Reads a TOML config, or the `config` block of a JSON run manifest.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        if path.extension().is_some_and(|e| e == "json") {
            let manifest: RunManifest = serde_json::from_str(&text).map_err(|e| {
                CliError::config(format!("invalid manifest {}: {e}", path.display()))
            })?;
            return Ok(manifest.config);
        }
        Self::from_toml_str(&text)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(out) = &o.out {
            self.run.out = out.clone();
        }
        if let Some(w) = o.workers {
            self.run.workers = w;
        }
        if let Some(eta) = o.eta {
            self.run.eta = eta;
        }
        if let Some(n) = o.modes {
            self.run.modes = n;
        }
    }

    pub fn policy(&self) -> StepPolicy {
        StepPolicy {
            eta: self.run.eta,
            check_every: self.run.check_every,
        }
    }

    pub fn noise(&self, w: f64) -> Noise {
        Noise::new(w).with_rate_scale(self.noise.rate_scale)
    }

    /// Quench-time grid, falling back to the per-command default.
    pub fn tau_grid(&self, purpose: Purpose) -> Result<Vec<f64>, CliError> {
        let grid = match (&self.tau.values, &self.tau.range) {
            (Some(_), Some(_)) => {
                return Err(CliError::config(
                    "tau: give either values or range, not both",
                ))
            }
            (Some(v), None) => v.clone(),
            (None, Some(r)) => r.points()?,
            (None, None) => default_tau_range(self.protocol.kind, purpose).points()?,
        };
        if grid.is_empty() {
            return Err(CliError::config("tau grid is empty"));
        }
        if let Some(bad) = grid.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
            return Err(CliError::config(format!(
                "tau values must be positive, got {bad}"
            )));
        }
        Ok(grid)
    }

    pub fn noise_grid(&self, purpose: Purpose) -> Result<Vec<f64>, CliError> {
        let grid = match (&self.noise.w, purpose) {
            (Some(w), _) => w.clone(),
            (None, Purpose::NoiseSweep) => DEFAULT_NOISE_GRID.to_vec(),
            (None, _) => vec![0.0],
        };
        if grid.is_empty() {
            return Err(CliError::config("noise grid is empty"));
        }
        if let Some(bad) = grid.iter().find(|w| !(**w >= 0.0 && w.is_finite())) {
            return Err(CliError::config(format!(
                "noise strengths must be >= 0, got {bad}"
            )));
        }
        Ok(grid)
    }

    /// Checks settings shared by every command.
    pub fn validate_common(&self) -> Result<(), CliError> {
        if self.run.workers == 0 {
            return Err(CliError::config("workers must be at least 1"));
        }
        kzquench::ising::mode_grid(self.run.modes).map_err(CliError::config)?;
        self.policy().validate().map_err(CliError::config)?;
        if !(self.noise.rate_scale >= 0.0 && self.noise.rate_scale.is_finite()) {
            return Err(CliError::config(format!(
                "noise rate_scale must be >= 0, got {}",
                self.noise.rate_scale
            )));
        }
        if self.protocol.g_i.is_empty() || self.protocol.r.is_empty() {
            return Err(CliError::config(
                "protocol g_i and r lists must be nonempty",
            ));
        }
        if let ZetaPolicy::Fixed { values } = &self.zeta {
            if values.is_empty() && self.protocol.kind.uses_zeta() {
                return Err(CliError::config("zeta values must be nonempty"));
            }
        }
        for &r in &self.protocol.r {
            if r != 1.0 && matches!(self.protocol.kind, Kind::Lq | Kind::Oai) {
                return Err(CliError::config(format!(
                    "r = {r} needs kind nlq or nloai, not {}",
                    self.protocol.kind.label()
                )));
            }
        }
        if self.schedule.samples < 2 {
            return Err(CliError::config("schedule samples must be at least 2"));
        }
        Ok(())
    }

    pub fn crit(&self) -> CriticalData {
        CriticalData::ISING
    }
}

/// Default quench-time grids per command and protocol.
pub fn default_tau_range(kind: Kind, purpose: Purpose) -> LogRange {
    match (purpose, kind) {
        (Purpose::NoiseSweep, Kind::Lq | Kind::Nlq) => LogRange {
            min: 10.0,
            max: 2000.0,
            per_decade: 8,
        },
        (Purpose::NoiseSweep, _) => LogRange {
            min: 50.0,
            max: 5000.0,
            per_decade: 8,
        },
        _ => LogRange {
            min: 50.0,
            max: 3200.0,
            per_decade: 4,
        },
    }
}

impl From<ProtocolError> for CliError {
    fn from(e: ProtocolError) -> Self {
        CliError::config(e)
    }
}
