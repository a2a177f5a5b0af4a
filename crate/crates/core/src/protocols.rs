//! Closed-form quench schedules: linear (and power-law) ramps, the optimized
//! adiabatic-impulse (OAI) schedule and its nonlinear generalization (NLOAI).
//!
//! Every schedule is expressed through the dimensionless distance from the
//! critical point, `epsilon(t) = (g(t) - g_c) / g_c`, which decreases
//! monotonically from `epsilon_i > 0` at `t_i` to `-epsilon_f < 0` at `t_f`
//! and crosses zero at `t = 0`.
//!
//! The OAI schedule follows `|eps / eps_dot| = zeta * |eps|^(-z nu)` away from
//! the critical point and crosses it linearly with rate `1 / tau_q`.  All
//! window endpoints are evaluated from closed forms; nothing is root-found.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Above this value of `(zeta / tau_q)^(1/(1+z nu))` the constant offset of the
/// schedule is no longer small and KZ scaling is not guaranteed.
pub const OFFSET_WARN_THRESHOLD: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("quench time must be positive and finite, got {0}")]
    InvalidQuenchTime(f64),
    #[error("adiabatic coefficient must be positive and finite, got {0}")]
    InvalidZeta(f64),
    #[error("adiabatic coefficient zeta = {zeta} must stay below tau_q = {tau_q} for a KZ-faithful schedule")]
    ZetaTooLarge { zeta: f64, tau_q: f64 },
    #[error(
        "couplings must satisfy g_i > g_c > g_f >= 0, got g_i = {g_i}, g_c = {g_c}, g_f = {g_f}"
    )]
    InvalidCouplings { g_i: f64, g_f: f64, g_c: f64 },
    #[error("nonlinearity exponent must satisfy r >= 1, got {0}")]
    InvalidExponent(f64),
    #[error("invalid critical data: {0}")]
    InvalidCriticalData(String),
    #[error("time {t} lies outside the schedule window [{t_i}, {t_f}]")]
    OutOfWindow { t: f64, t_i: f64, t_f: f64 },
    #[error("the auxiliary adiabatic branch is only defined for OAI/NLOAI schedules")]
    NoAuxiliaryBranch,
}

/// Universality data of the transition being crossed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalData {
    pub z: f64,
    pub nu: f64,
    pub d: u32,
    pub g_c: f64,
}

impl CriticalData {
    /// Transverse-field Ising chain: `z = nu = d = 1`, `g_c = 1`.
    pub const ISING: CriticalData = CriticalData {
        z: 1.0,
        nu: 1.0,
        d: 1,
        g_c: 1.0,
    };

    pub fn new(z: f64, nu: f64, d: u32, g_c: f64) -> Result<Self, ProtocolError> {
        if !(z > 0.0 && z.is_finite()) {
            return Err(ProtocolError::InvalidCriticalData(format!("z = {z}")));
        }
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(ProtocolError::InvalidCriticalData(format!("nu = {nu}")));
        }
        if d < 1 {
            return Err(ProtocolError::InvalidCriticalData(format!("d = {d}")));
        }
        if !(g_c > 0.0 && g_c.is_finite()) {
            return Err(ProtocolError::InvalidCriticalData(format!("g_c = {g_c}")));
        }
        Ok(Self { z, nu, d, g_c })
    }

    pub fn z_nu(&self) -> f64 {
        self.z * self.nu
    }
}

impl Default for CriticalData {
    fn default() -> Self {
        Self::ISING
    }
}

/// `zeta = c * tau_q^alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaPolicy {
    pub alpha: f64,
    pub c: f64,
}

impl AlphaPolicy {
    pub fn new(alpha: f64, c: f64) -> Self {
        Self { alpha, c }
    }

    /// Fixed `zeta = c` (noisy-field mode).
    pub fn constant(c: f64) -> Self {
        Self { alpha: 0.0, c }
    }

    pub fn zeta(&self, tau_q: f64) -> f64 {
        self.c * tau_q.powf(self.alpha)
    }

    /// Whether the policy stays in the regime `1/4 <= alpha < 1` where OAI
    /// reproduces KZ scaling for the Ising chain.
    pub fn is_kz_faithful(&self) -> bool {
        (0.25..1.0).contains(&self.alpha)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProtocolKind {
    /// `eps(t) = -sgn(t) |t / tau_q|^r`; `r = 1` is the linear quench (LQ),
    /// `r > 1` the nonlinear quench (NLQ).
    Linear,
    Oai,
    Nloai,
}

/// How strictly `zeta` is checked against `tau_q` at construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ZetaRegime {
    /// `zeta >= tau_q` is rejected.
    #[default]
    KibbleZurek,
    /// Any positive `zeta` is accepted (used for the `zeta -> inf` limit).
    Unrestricted,
}

/// Which `epsilon` the AIA timescales are evaluated on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Branch {
    #[default]
    Full,
    /// The offset-free adiabatic solution `eps_1(t)`, for which
    /// `|eps_1 / eps_1_dot| = zeta |eps_1|^(-z nu)` holds exactly.
    Auxiliary,
}

/// Driving timescale `|eps / eps_dot|` and relaxation time `|eps|^(-z nu)`.
///
/// At `t = 0` on the full branch the relaxation time is `f64::INFINITY` and
/// the driving timescale is `0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Timescales {
    pub drive: f64,
    pub relax: f64,
}

/// An immutable quench schedule together with its window `[t_i, t_f]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuenchProtocol {
    kind: ProtocolKind,
    tau_q: f64,
    zeta: Option<f64>,
    r: f64,
    g_i: f64,
    g_f: f64,
    theta: Option<f64>,
    t_i: f64,
    t_f: f64,
    crit: CriticalData,
    // (zeta / (z nu theta))^(1/z nu), the offset eps_1(0)
    offset: f64,
}

fn check_common(tau_q: f64, g_i: f64, g_f: f64, crit: &CriticalData) -> Result<(), ProtocolError> {
    if !(tau_q > 0.0 && tau_q.is_finite()) {
        return Err(ProtocolError::InvalidQuenchTime(tau_q));
    }
    if !(g_i > crit.g_c && crit.g_c > g_f && g_f >= 0.0 && g_i.is_finite()) {
        return Err(ProtocolError::InvalidCouplings {
            g_i,
            g_f,
            g_c: crit.g_c,
        });
    }
    Ok(())
}

fn check_exponent(r: f64) -> Result<(), ProtocolError> {
    if !(r >= 1.0 && r.is_finite()) {
        return Err(ProtocolError::InvalidExponent(r));
    }
    Ok(())
}

/// Linear quench `eps(t) = -t / tau_q`.
pub fn make_linear(
    tau_q: f64,
    g_i: f64,
    g_f: f64,
    crit: CriticalData,
) -> Result<QuenchProtocol, ProtocolError> {
    make_nlq(tau_q, 1.0, g_i, g_f, crit)
}

/// Power-law quench `eps(t) = -sgn(t) |t / tau_q|^r` (NLQ for `r > 1`).
pub fn make_nlq(
    tau_q: f64,
    r: f64,
    g_i: f64,
    g_f: f64,
    crit: CriticalData,
) -> Result<QuenchProtocol, ProtocolError> {
    check_common(tau_q, g_i, g_f, &crit)?;
    check_exponent(r)?;
    let eps_i = (g_i - crit.g_c) / crit.g_c;
    let eps_f = (crit.g_c - g_f) / crit.g_c;
    let (t_i, t_f) = if r == 1.0 {
        (-eps_i * tau_q, eps_f * tau_q)
    } else {
        (-tau_q * eps_i.powf(1.0 / r), tau_q * eps_f.powf(1.0 / r))
    };
    Ok(QuenchProtocol {
        kind: ProtocolKind::Linear,
        tau_q,
        zeta: None,
        r,
        g_i,
        g_f,
        theta: None,
        t_i,
        t_f,
        crit,
        offset: 0.0,
    })
}

/// OAI schedule with adiabatic coefficient `zeta`; rejects `zeta >= tau_q`.
pub fn make_oai(
    tau_q: f64,
    zeta: f64,
    g_i: f64,
    g_f: f64,
    crit: CriticalData,
) -> Result<QuenchProtocol, ProtocolError> {
    make_nloai_with(tau_q, zeta, 1.0, g_i, g_f, crit, ZetaRegime::KibbleZurek)
}

/// NLOAI schedule; `r = 1` reproduces [`make_oai`] exactly.
pub fn make_nloai(
    tau_q: f64,
    zeta: f64,
    r: f64,
    g_i: f64,
    g_f: f64,
    crit: CriticalData,
) -> Result<QuenchProtocol, ProtocolError> {
    make_nloai_with(tau_q, zeta, r, g_i, g_f, crit, ZetaRegime::KibbleZurek)
}

/// OAI/NLOAI constructor with an explicit `zeta` regime.
pub fn make_nloai_with(
    tau_q: f64,
    zeta: f64,
    r: f64,
    g_i: f64,
    g_f: f64,
    crit: CriticalData,
    regime: ZetaRegime,
) -> Result<QuenchProtocol, ProtocolError> {
    check_common(tau_q, g_i, g_f, &crit)?;
    check_exponent(r)?;
    if !(zeta > 0.0 && zeta.is_finite()) {
        return Err(ProtocolError::InvalidZeta(zeta));
    }
    if regime == ZetaRegime::KibbleZurek && zeta >= tau_q {
        return Err(ProtocolError::ZetaTooLarge { zeta, tau_q });
    }
    let zn = crit.z_nu();
    let theta = (zeta.powf(1.0 / zn) * tau_q).powf(zn / (1.0 + zn)) / zn;
    let offset = (zeta / (zn * theta)).powf(1.0 / zn);
    if regime == ZetaRegime::KibbleZurek && offset > OFFSET_WARN_THRESHOLD {
        log::warn!(
            "schedule offset (zeta/tau_q)^(1/(1+z nu)) = {offset:.3} exceeds {OFFSET_WARN_THRESHOLD}; \
             KZ scaling may not hold (zeta = {zeta}, tau_q = {tau_q})"
        );
    }

    // |t| at which the inner OAI magnitude reaches `a`:
    // |t| = -theta * expm1(-z nu * ln(1 + a / offset))
    let reach = |a: f64| -theta * (-zn * (a / offset).ln_1p()).exp_m1();
    let eps_i = (g_i - crit.g_c) / crit.g_c;
    let eps_f = (crit.g_c - g_f) / crit.g_c;
    let (a_i, a_f) = if r == 1.0 {
        (eps_i, eps_f)
    } else {
        (eps_i.powf(1.0 / r), eps_f.powf(1.0 / r))
    };

    Ok(QuenchProtocol {
        kind: if r == 1.0 {
            ProtocolKind::Oai
        } else {
            ProtocolKind::Nloai
        },
        tau_q,
        zeta: Some(zeta),
        r,
        g_i,
        g_f,
        theta: Some(theta),
        t_i: -reach(a_i),
        t_f: reach(a_f),
        crit,
        offset,
    })
}

impl QuenchProtocol {
    pub fn kind(&self) -> ProtocolKind {
        self.kind
    }

    /// Short label used in CSV output: `lq`, `nlq`, `oai` or `nloai`.
    pub fn label(&self) -> &'static str {
        match self.kind {
            ProtocolKind::Linear if self.r == 1.0 => "lq",
            ProtocolKind::Linear => "nlq",
            ProtocolKind::Oai => "oai",
            ProtocolKind::Nloai => "nloai",
        }
    }

    pub fn tau_q(&self) -> f64 {
        self.tau_q
    }

    pub fn zeta(&self) -> Option<f64> {
        self.zeta
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn g_i(&self) -> f64 {
        self.g_i
    }

    pub fn g_f(&self) -> f64 {
        self.g_f
    }

    pub fn theta(&self) -> Option<f64> {
        self.theta
    }

    pub fn t_i(&self) -> f64 {
        self.t_i
    }

    pub fn t_f(&self) -> f64 {
        self.t_f
    }

    pub fn window(&self) -> (f64, f64) {
        (self.t_i, self.t_f)
    }

    pub fn crit(&self) -> &CriticalData {
        &self.crit
    }

    /// `|eps_1(0)| = (zeta / tau_q)^(1/(1+z nu))`; zero for linear ramps.
    pub fn adiabatic_offset(&self) -> f64 {
        self.offset
    }

    /// `T = t_f - t_i`.
    pub fn total_time(&self) -> f64 {
        self.t_f - self.t_i
    }

    /// Upper bound `2 theta` on the total time; infinite for linear ramps.
    pub fn time_bound(&self) -> f64 {
        self.theta.map_or(f64::INFINITY, |th| 2.0 * th)
    }

    fn check_window(&self, t: f64) -> Result<(), ProtocolError> {
        if t >= self.t_i && t <= self.t_f {
            Ok(())
        } else {
            Err(ProtocolError::OutOfWindow {
                t,
                t_i: self.t_i,
                t_f: self.t_f,
            })
        }
    }

    /// `eps(t)` on the full branch.
    pub fn epsilon(&self, t: f64) -> Result<f64, ProtocolError> {
        self.check_window(t)?;
        Ok(self.epsilon_unchecked(t))
    }

    pub fn g_of_t(&self, t: f64) -> Result<f64, ProtocolError> {
        self.check_window(t)?;
        Ok(self.coupling_unchecked(t))
    }

    pub fn epsilon_dot(&self, t: f64) -> Result<f64, ProtocolError> {
        self.check_window(t)?;
        Ok(self.epsilon_dot_unchecked(t))
    }

    /// `g(t) = g_c (1 + eps(t))` without the window check.  Valid for
    /// `|t| < theta` (any `t` for linear ramps).
    pub fn coupling_unchecked(&self, t: f64) -> f64 {
        self.crit.g_c * (1.0 + self.epsilon_unchecked(t))
    }

    // |eps| of the r = 1 schedule
    fn oai_magnitude(&self, abs_t: f64) -> f64 {
        let theta = self.theta.expect("adiabatic schedule carries theta");
        let zn = self.crit.z_nu();
        self.offset * (-(-abs_t / theta).ln_1p() / zn).exp_m1()
    }

    fn magnitude(&self, abs_t: f64) -> f64 {
        let m = match self.kind {
            ProtocolKind::Linear => abs_t / self.tau_q,
            ProtocolKind::Oai | ProtocolKind::Nloai => self.oai_magnitude(abs_t),
        };
        if self.r == 1.0 {
            m
        } else {
            m.powf(self.r)
        }
    }

    pub fn epsilon_unchecked(&self, t: f64) -> f64 {
        if t == 0.0 {
            return 0.0;
        }
        let m = self.magnitude(t.abs());
        if t < 0.0 {
            m
        } else {
            -m
        }
    }

    pub fn epsilon_dot_unchecked(&self, t: f64) -> f64 {
        let abs_t = t.abs();
        let (m, m_dot) = match self.kind {
            ProtocolKind::Linear => (abs_t / self.tau_q, 1.0 / self.tau_q),
            ProtocolKind::Oai | ProtocolKind::Nloai => {
                let theta = self.theta.expect("adiabatic schedule carries theta");
                let zn = self.crit.z_nu();
                let slope = self.offset / (zn * theta)
                    * (-(1.0 + 1.0 / zn) * (-abs_t / theta).ln_1p()).exp();
                (self.oai_magnitude(abs_t), slope)
            }
        };
        if self.r == 1.0 {
            -m_dot
        } else {
            -self.r * m.powf(self.r - 1.0) * m_dot
        }
    }

    /// The adiabatic solution `eps_1(t)` without the constant offset.
    pub fn epsilon_auxiliary(&self, t: f64) -> Result<f64, ProtocolError> {
        self.check_window(t)?;
        let theta = self.theta.ok_or(ProtocolError::NoAuxiliaryBranch)?;
        let x = self.auxiliary_relax(theta, t);
        let mag = x.powf(-1.0 / self.crit.z_nu());
        Ok(if t < 0.0 { mag } else { -mag })
    }

    // (z nu / zeta)(theta - |t|) = |eps_1|^(-z nu)
    fn auxiliary_relax(&self, theta: f64, t: f64) -> f64 {
        let zeta = self.zeta.expect("adiabatic schedule carries zeta");
        self.crit.z_nu() / zeta * (theta - t.abs())
    }

    /// AIA timescales at `t`.
    pub fn timescales(&self, t: f64, branch: Branch) -> Result<Timescales, ProtocolError> {
        self.check_window(t)?;
        let zn = self.crit.z_nu();
        match branch {
            Branch::Full => {
                if t == 0.0 {
                    return Ok(Timescales {
                        drive: 0.0,
                        relax: f64::INFINITY,
                    });
                }
                let eps = self.epsilon_unchecked(t);
                let drive = match self.kind {
                    // |t/tau|^r / (r |t/tau|^(r-1) / tau)
                    ProtocolKind::Linear => t.abs() / self.r,
                    _ => (eps / self.epsilon_dot_unchecked(t)).abs(),
                };
                Ok(Timescales {
                    drive,
                    relax: eps.abs().powf(-zn),
                })
            }
            Branch::Auxiliary => {
                let theta = self.theta.ok_or(ProtocolError::NoAuxiliaryBranch)?;
                let zeta = self.zeta.expect("adiabatic schedule carries zeta");
                let relax = self.auxiliary_relax(theta, t);
                Ok(Timescales {
                    drive: zeta * relax,
                    relax,
                })
            }
        }
    }

    /// Largest `|g(t)|` over the window (the schedule is monotone).
    pub fn max_abs_coupling(&self) -> f64 {
        self.g_i.abs().max(self.g_f.abs())
    }
}
