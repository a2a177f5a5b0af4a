//! Scaling laws: log-log fits, the KZ reference density, the `zeta`
//! crossover collapse, the anti-KZ defect model and the theory exponents.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::protocols::CriticalData;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScalingError {
    #[error("power-law fit needs at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("power-law fit needs strictly positive finite data, got ({x}, {y})")]
    NonPositive { x: f64, y: f64 },
    #[error("all x values coincide; the exponent is undetermined")]
    DegenerateAbscissa,
    #[error("collapse window 0.2 <= tau_q^(-1/4) zeta <= 1 with n/n_KZ - 1 >= 0.05 is empty after filtering ({0} rows kept)")]
    EmptyCollapseWindow(usize),
    #[error("optimal quench time needs at least 5 rows, got {0}")]
    TooFewRows(usize),
    #[error("defect density has no interior minimum: curve is {0}")]
    NoInteriorMinimum(&'static str),
}

/// `n_KZ = 1 / (2 pi sqrt(2 tau_q))`.
pub fn kz_reference(tau_q: f64) -> f64 {
    1.0 / (2.0 * PI * (2.0 * tau_q).sqrt())
}

/// Approximate sudden-quench density `1/2 - 1/(4 g_i)`.
pub fn sudden_estimate(g_i: f64) -> f64 {
    0.5 - 0.25 / g_i
}

/// Least-squares line through `(ln x, ln y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub log_prefactor: f64,
    pub r_squared: f64,
    pub n_points: usize,
}

impl PowerLawFit {
    pub fn prefactor(&self) -> f64 {
        self.log_prefactor.exp()
    }

    pub fn predict(&self, x: f64) -> f64 {
        (self.log_prefactor + self.exponent * x.ln()).exp()
    }
}

pub fn fit_power_law(points: &[(f64, f64)]) -> Result<PowerLawFit, ScalingError> {
    if points.len() < 3 {
        return Err(ScalingError::TooFewPoints(points.len()));
    }
    if let Some(&(x, y)) = points
        .iter()
        .find(|(x, y)| !(*x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite()))
    {
        return Err(ScalingError::NonPositive { x, y });
    }
    let n = points.len() as f64;
    let logs: Vec<(f64, f64)> = points.iter().map(|(x, y)| (x.ln(), y.ln())).collect();
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (lx, ly) in &logs {
        let (dx, dy) = (lx - mx, ly - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(ScalingError::DegenerateAbscissa);
    }
    let exponent = sxy / sxx;
    let log_prefactor = my - exponent * mx;
    let ss_res: f64 = logs
        .iter()
        .map(|(lx, ly)| {
            let e = ly - (log_prefactor + exponent * lx);
            e * e
        })
        .sum();
    // constant data is fitted exactly
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    };
    Ok(PowerLawFit {
        exponent,
        log_prefactor,
        r_squared,
        n_points: points.len(),
    })
}

/// Lower and upper bounds on `tau_q^(-1/4) zeta` kept by the collapse fit.
pub const COLLAPSE_WINDOW: (f64, f64) = (0.2, 1.0);
/// Smallest excess `n / n_KZ - 1` kept by the collapse fit.
pub const COLLAPSE_MIN_EXCESS: f64 = 0.05;

/// `n / n_KZ - 1 = x (tau_q^(-1/4) zeta)^(-y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZetaCollapse {
    pub x: f64,
    pub y: f64,
}

impl ZetaCollapse {
    /// Values reported for `g_i = 2`, `g_f = 0`.
    pub const REFERENCE: ZetaCollapse = ZetaCollapse { x: 0.113, y: 1.732 };

    pub fn scaling_variable(tau_q: f64, zeta: f64) -> f64 {
        tau_q.powf(-0.25) * zeta
    }

    pub fn excess(&self, tau_q: f64, zeta: f64) -> f64 {
        self.x * Self::scaling_variable(tau_q, zeta).powf(-self.y)
    }
}

/// A row `(tau_q, zeta, n)` of a `zeta` scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZetaRow {
    pub tau_q: f64,
    pub zeta: f64,
    pub n: f64,
}

/// Fits the collapse on the rows inside [`COLLAPSE_WINDOW`].
pub fn fit_zeta_collapse(rows: &[ZetaRow]) -> Result<(ZetaCollapse, PowerLawFit), ScalingError> {
    let points: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| {
            let s = ZetaCollapse::scaling_variable(r.tau_q, r.zeta);
            let excess = r.n / kz_reference(r.tau_q) - 1.0;
            (s >= COLLAPSE_WINDOW.0 && s <= COLLAPSE_WINDOW.1 && excess >= COLLAPSE_MIN_EXCESS)
                .then_some((s, excess))
        })
        .collect();
    if points.len() < 3 {
        return Err(ScalingError::EmptyCollapseWindow(points.len()));
    }
    let fit = fit_power_law(&points)?;
    Ok((
        ZetaCollapse {
            x: fit.prefactor(),
            y: -fit.exponent,
        },
        fit,
    ))
}

/// Piecewise defect density as a function of `zeta`.
///
/// * `zeta = 0`: sudden value `1/2 - 1/(4 g_i)`;
/// * `0 < zeta <= tau_q^(1/4)`: `n_KZ (1 + x s^(-y))`, capped at the sudden value;
/// * `zeta > tau_q^(1/4)`: `n_KZ`.
pub fn defect_model(zeta: f64, tau_q: f64, collapse: &ZetaCollapse, g_i: f64) -> f64 {
    let sudden = sudden_estimate(g_i);
    if zeta <= 0.0 {
        return sudden;
    }
    let n_kz = kz_reference(tau_q);
    if zeta > tau_q.powf(0.25) {
        return n_kz;
    }
    (n_kz * (1.0 + collapse.excess(tau_q, zeta))).min(sudden)
}

/// `n(tau_q, W) = a tau_q^(-beta) + b W^2 tau_q^(alpha')`.
///
/// For `z nu = 1` the noise term equals `b (W^(4/(1+alpha)) tau_q)^((1+alpha)/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AkzModel {
    pub a: f64,
    pub b: f64,
    pub beta: f64,
    pub alpha_prime: f64,
}

impl AkzModel {
    /// OAI with `zeta ~ tau_q^alpha`: `alpha' = (alpha + z nu) / (1 + z nu)`.
    pub fn oai(a: f64, b: f64, alpha: f64, crit: &CriticalData) -> Self {
        let zn = crit.z_nu();
        Self {
            a,
            b,
            beta: zn / (1.0 + zn),
            alpha_prime: (alpha + zn) / (1.0 + zn),
        }
    }

    pub fn predict(&self, tau_q: f64, w: f64) -> f64 {
        self.a * tau_q.powf(-self.beta) + self.b * w * w * tau_q.powf(self.alpha_prime)
    }

    /// Stationary point of [`AkzModel::predict`] in `tau_q`.
    pub fn optimal_tau(&self, w: f64) -> f64 {
        (self.a * self.beta / (self.b * self.alpha_prime * w * w))
            .powf(1.0 / (self.beta + self.alpha_prime))
    }

    /// `tau_opt ~ W^(-s)` with `s = 2 / (beta + alpha')`.
    pub fn exponent_s(&self) -> f64 {
        2.0 / (self.beta + self.alpha_prime)
    }
}

/// Location of the minimum of a `(tau_q, n)` curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimalTau {
    pub tau_tilde: f64,
    pub n_min: f64,
    /// Index (in ascending `tau_q`) of the discrete minimum.
    pub grid_index: usize,
}

/// Discrete argmin refined by a parabola through the three bracketing
/// points in `(ln tau_q, ln n)`.
pub fn optimal_tau(rows: &[(f64, f64)]) -> Result<OptimalTau, ScalingError> {
    if rows.len() < 5 {
        return Err(ScalingError::TooFewRows(rows.len()));
    }
    if let Some(&(x, y)) = rows
        .iter()
        .find(|(x, y)| !(*x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite()))
    {
        return Err(ScalingError::NonPositive { x, y });
    }
    let mut sorted = rows.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    // first occurrence wins ties, i.e. the smaller tau_q
    let mut k = 0;
    for (i, row) in sorted.iter().enumerate() {
        if row.1 < sorted[k].1 {
            k = i;
        }
    }
    if k == 0 {
        return Err(ScalingError::NoInteriorMinimum("increasing"));
    }
    if k == sorted.len() - 1 {
        return Err(ScalingError::NoInteriorMinimum("decreasing"));
    }
    let (x0, y0) = (sorted[k - 1].0.ln(), sorted[k - 1].1.ln());
    let (x1, y1) = (sorted[k].0.ln(), sorted[k].1.ln());
    let (x2, y2) = (sorted[k + 1].0.ln(), sorted[k + 1].1.ln());
    let d0 = (y1 - y0) / (x1 - x0);
    let d1 = (y2 - y1) / (x2 - x1);
    let curvature = (d1 - d0) / (x2 - x0);
    let (xv, yv) = if curvature > 0.0 {
        let xv = 0.5 * (x0 + x1) - 0.5 * d0 / curvature;
        let xv = xv.clamp(x0, x2);
        let yv = y0 + d0 * (xv - x0) + curvature * (xv - x0) * (xv - x1);
        (xv, yv)
    } else {
        (x1, y1)
    };
    // a vertex on the grid point (up to roundoff in the logs) returns it verbatim
    let (tau_tilde, n_min) = if (xv - x1).abs() <= 1e-12 * x1.abs().max(1.0) {
        (sorted[k].0, sorted[k].1)
    } else {
        (xv.exp(), yv.exp())
    };
    Ok(OptimalTau {
        tau_tilde,
        n_min,
        grid_index: k,
    })
}

/// Theory exponents for given `alpha`, `r` and universality class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryExponents {
    /// `tau_opt ~ W^(-s)` under OAI with `zeta ~ tau_q^alpha`.
    pub s_oai: f64,
    /// Linear quench limit.
    pub s_lq: f64,
    /// NLOAI at fixed `zeta`.
    pub s_nloai: f64,
    /// Nonlinear quench with total time linear in `tau_q`.
    pub s_nlq: f64,
    /// `z nu / (1 + z nu)`.
    pub beta_kz: f64,
    /// `d r nu / (1 + r z nu)`.
    pub beta_nlkz: f64,
    /// `r d nu / (1 + r d nu)`, the generic-form exponent; equals
    /// `beta_nlkz` only when `z = d`.
    pub beta_nlkz_generic: f64,
    /// `T ~ tau_q^((alpha + z nu)/(1 + z nu))`.
    pub t_exponent: f64,
}

pub fn theory_exponents(alpha: f64, r: f64, crit: &CriticalData) -> TheoryExponents {
    let zn = crit.z_nu();
    let d = crit.d as f64;
    let dn = d * crit.nu;
    let beta_kz = zn / (1.0 + zn);
    let beta_density = dn / (1.0 + zn);
    let beta_nlkz = dn * r / (1.0 + r * zn);
    let alpha_fixed = zn / (1.0 + zn);
    TheoryExponents {
        s_oai: 2.0 * (1.0 + zn) / ((d + crit.z) * crit.nu + alpha),
        s_lq: 2.0 / (beta_density + 1.0),
        s_nloai: 2.0 / (beta_nlkz + alpha_fixed),
        s_nlq: 2.0 / (beta_nlkz + 1.0),
        beta_kz,
        beta_nlkz,
        beta_nlkz_generic: r * dn / (1.0 + r * dn),
        t_exponent: (alpha + zn) / (1.0 + zn),
    }
}

/// Total time needed to keep the defect density below `epsilon_target` in a
/// system of linear size `l`, up to an undetermined prefactor (set to 1):
/// `T ~ eps^(-(1+alpha)/2) L^((1 + z nu)(1 + alpha) / (2 nu))`.
pub fn adiabatic_time_for_size(
    l: f64,
    epsilon_target: f64,
    alpha: f64,
    crit: &CriticalData,
) -> f64 {
    let zn = crit.z_nu();
    epsilon_target.powf(-(1.0 + alpha) / 2.0) * l.powf((1.0 + zn) * (1.0 + alpha) / (2.0 * crit.nu))
}
