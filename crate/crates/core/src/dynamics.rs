//! Time evolution of the Ising chain modes under a quench schedule.
//!
//! Pure dynamics integrates the time-dependent BdG equations
//! `i d/dt (u, v) = [[h_z, h_x], [h_x, -h_z]] (u, v)` for each momentum.
//! Noisy dynamics integrates the per-mode dephasing master equation
//! `d rho/dt = -i[H_q, rho] - (W^2/2) [sigma_z, [sigma_z, rho]]`, carried as a
//! Bloch vector `rho = (1 + r . sigma) / 2` so that trace and Hermiticity are
//! exact by construction.
//!
//! Both use classical fixed-step RK4 with `dt = eta / max(2(1 + |g|max), W^2, 1)`,
//! shrunk so that an integer number of steps spans the window exactly.
//!
//! Modes are integrated in lanes of [`LANES`] momenta laid out as
//! struct-of-arrays.  Each lane slot performs the same arithmetic as a
//! single-mode integration, so results do not depend on how modes are
//! batched or how many worker threads are used.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ising::{self, IsingError, ModeGrid, ModeHamiltonian};
use crate::protocols::{ProtocolError, QuenchProtocol};

/// Number of modes advanced together by the integration kernels.
pub const LANES: usize = 8;

/// Norm drift beyond which a pure integration is aborted.
pub const NORM_ABORT: f64 = 1e-6;
/// Most negative density eigenvalue tolerated before aborting.
pub const POSITIVITY_ABORT: f64 = -1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("norm drift {drift:.3e} at q = {q}, t = {t} exceeds {NORM_ABORT:e}; reduce the step factor (dt = {dt:.3e})")]
    NormDrift { q: f64, t: f64, drift: f64, dt: f64 },
    #[error("density matrix lost positivity at q = {q}, t = {t}: eigenvalue {min_eigenvalue:.3e} (dt = {dt:.3e})")]
    Positivity {
        q: f64,
        t: f64,
        min_eigenvalue: f64,
        dt: f64,
    },
    #[error("noise strength must be finite and non-negative, got W = {0}")]
    InvalidNoise(f64),
    #[error("invalid step policy: {0}")]
    InvalidStepPolicy(String),
    #[error(transparent)]
    Ising(#[from] IsingError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

/// Bogoliubov amplitudes `(u, v)` of one momentum mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeState {
    pub u: Complex64,
    pub v: Complex64,
}

impl ModeState {
    pub fn new(u: Complex64, v: Complex64) -> Self {
        Self { u, v }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.u.norm_sqr() + self.v.norm_sqr()
    }

    /// `<self|other>`.
    pub fn overlap(&self, other: &ModeState) -> Complex64 {
        self.u.conj() * other.u + self.v.conj() * other.v
    }

    /// Bloch vector `(2 Re u*v, 2 Im u*v, |u|^2 - |v|^2)`.
    pub fn bloch(&self) -> [f64; 3] {
        let c = self.u.conj() * self.v;
        [
            2.0 * c.re,
            2.0 * c.im,
            self.u.norm_sqr() - self.v.norm_sqr(),
        ]
    }
}

/// Per-mode density matrix `rho = (1 + r . sigma) / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeDensity {
    bloch: [f64; 3],
}

impl ModeDensity {
    pub fn from_bloch(bloch: [f64; 3]) -> Self {
        Self { bloch }
    }

    pub fn pure(state: &ModeState) -> Self {
        let n = state.norm_sqr();
        let b = state.bloch();
        Self::from_bloch([b[0] / n, b[1] / n, b[2] / n])
    }

    pub fn maximally_mixed() -> Self {
        Self::from_bloch([0.0; 3])
    }

    pub fn bloch(&self) -> [f64; 3] {
        self.bloch
    }

    /// The 2x2 matrix in the `(u, v)` basis.
    pub fn matrix(&self) -> [[Complex64; 2]; 2] {
        let [x, y, z] = self.bloch;
        [
            [
                Complex64::new(0.5 * (1.0 + z), 0.0),
                Complex64::new(0.5 * x, -0.5 * y),
            ],
            [
                Complex64::new(0.5 * x, 0.5 * y),
                Complex64::new(0.5 * (1.0 - z), 0.0),
            ],
        ]
    }

    pub fn trace(&self) -> f64 {
        let m = self.matrix();
        m[0][0].re + m[1][1].re
    }

    /// Eigenvalues `(1 ± |r|) / 2`, ascending.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let len = self.bloch_length();
        [0.5 * (1.0 - len), 0.5 * (1.0 + len)]
    }

    pub fn bloch_length(&self) -> f64 {
        let [x, y, z] = self.bloch;
        (x * x + y * y + z * z).sqrt()
    }
}

/// Anything whose overlap with a pure target state can be measured.
pub trait Population {
    /// `|<target|psi>|^2` or `<target|rho|target>`.
    fn population(&self, target: &ModeState) -> f64;
}

impl Population for ModeState {
    fn population(&self, target: &ModeState) -> f64 {
        target.overlap(self).norm_sqr()
    }
}

impl Population for ModeDensity {
    fn population(&self, target: &ModeState) -> f64 {
        let b = ModeDensity::pure(target).bloch;
        let r = self.bloch;
        0.5 * (1.0 + r[0] * b[0] + r[1] * b[1] + r[2] * b[2])
    }
}

/// Probability of finding mode `q` in the excited state of `H(g_f)`.
pub fn excitation_probability<S: Population>(
    state: &S,
    q: f64,
    g_f: f64,
) -> Result<f64, DynamicsError> {
    let ex = ising::excited_state(g_f, q)?;
    Ok(state.population(&ex))
}

/// A time-dependent coupling `g(t)` over a finite window.
pub trait Schedule: Sync {
    fn window(&self) -> (f64, f64);
    /// `g(t)`; only called inside (or within roundoff of) the window.
    fn coupling(&self, t: f64) -> f64;
    fn max_abs_coupling(&self) -> f64;

    /// Exact coupling at the start of the window.
    fn initial_coupling(&self) -> f64 {
        self.coupling(self.window().0)
    }

    /// Exact coupling at the end of the window.
    fn final_coupling(&self) -> f64 {
        self.coupling(self.window().1)
    }
}

impl Schedule for QuenchProtocol {
    fn window(&self) -> (f64, f64) {
        QuenchProtocol::window(self)
    }

    fn coupling(&self, t: f64) -> f64 {
        self.coupling_unchecked(t)
    }

    fn max_abs_coupling(&self) -> f64 {
        QuenchProtocol::max_abs_coupling(self)
    }

    fn initial_coupling(&self) -> f64 {
        self.g_i()
    }

    fn final_coupling(&self) -> f64 {
        self.g_f()
    }
}

/// Constant coupling held for `duration`; used for smoke tests.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrozenSchedule {
    pub g: f64,
    pub duration: f64,
}

impl Schedule for FrozenSchedule {
    fn window(&self) -> (f64, f64) {
        (0.0, self.duration)
    }

    fn coupling(&self, _t: f64) -> f64 {
        self.g
    }

    fn max_abs_coupling(&self) -> f64 {
        self.g.abs()
    }
}

/// Dephasing noise of strength `W`; the dephasing rate prefactor is
/// `rate_scale * W^2 / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Noise {
    pub w: f64,
    pub rate_scale: f64,
}

impl Noise {
    pub const NONE: Noise = Noise {
        w: 0.0,
        rate_scale: 1.0,
    };

    pub fn new(w: f64) -> Self {
        Self { w, rate_scale: 1.0 }
    }

    pub fn with_rate_scale(self, rate_scale: f64) -> Self {
        Self { rate_scale, ..self }
    }

    pub fn is_silent(&self) -> bool {
        self.w == 0.0 || self.rate_scale == 0.0
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.w >= 0.0
            && self.w.is_finite()
            && self.rate_scale >= 0.0
            && self.rate_scale.is_finite())
        {
            return Err(DynamicsError::InvalidNoise(self.w));
        }
        Ok(())
    }

    // decay rate of the transverse Bloch components
    fn dephasing(&self) -> f64 {
        2.0 * self.rate_scale * self.w * self.w
    }
}

impl Default for Noise {
    fn default() -> Self {
        Self::NONE
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepPolicy {
    /// Step factor; `dt = eta / max(omega_max, W^2, 1)`.
    pub eta: f64,
    /// Invariants are asserted every this many steps (and at the end).
    pub check_every: usize,
}

impl Default for StepPolicy {
    fn default() -> Self {
        Self {
            eta: 0.02,
            check_every: 100,
        }
    }
}

impl StepPolicy {
    pub fn with_eta(eta: f64) -> Self {
        Self {
            eta,
            ..Self::default()
        }
    }

    pub fn halved(&self) -> Self {
        Self {
            eta: 0.5 * self.eta,
            ..*self
        }
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(DynamicsError::InvalidStepPolicy(format!(
                "eta = {}",
                self.eta
            )));
        }
        if self.check_every == 0 {
            return Err(DynamicsError::InvalidStepPolicy("check_every = 0".into()));
        }
        Ok(())
    }

    /// Largest admissible step for the given schedule and noise.
    pub fn max_step<S: Schedule + ?Sized>(&self, schedule: &S, noise: &Noise) -> f64 {
        let omega_max = 2.0 * (1.0 + schedule.max_abs_coupling());
        let rate = omega_max.max(noise.rate_scale * noise.w * noise.w).max(1.0);
        self.eta / rate
    }

    /// Number of steps and the uniform step covering `[t_start, t_end]`.
    pub fn plan<S: Schedule + ?Sized>(
        &self,
        schedule: &S,
        noise: &Noise,
        t_start: f64,
        t_end: f64,
    ) -> StepPlan {
        let span = t_end - t_start;
        let steps = ((span.abs() / self.max_step(schedule, noise)).ceil() as usize).max(1);
        StepPlan {
            steps,
            dt: span / steps as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepPlan {
    pub steps: usize,
    pub dt: f64,
}

// ---------------------------------------------------------------------------
// lane kernels

/// A block of [`LANES`] modes advanced in lockstep.
trait LaneBlock: Send {
    fn step(&mut self, dt: f64, g0: f64, gm: f64, g1: f64);
    /// First slot whose invariant is violated, with the offending value.
    fn violation(&self) -> Option<(usize, f64)>;
}

#[derive(Clone)]
struct PureBlock {
    ur: [f64; LANES],
    ui: [f64; LANES],
    vr: [f64; LANES],
    vi: [f64; LANES],
    cos_q: [f64; LANES],
    h_x: [f64; LANES],
}

impl PureBlock {
    fn new(modes: &[(f64, ModeState)]) -> Self {
        let mut b = PureBlock {
            ur: [0.0; LANES],
            ui: [0.0; LANES],
            vr: [0.0; LANES],
            vi: [0.0; LANES],
            cos_q: [0.0; LANES],
            h_x: [0.0; LANES],
        };
        for j in 0..LANES {
            // pad unused slots with the last mode
            let (q, s) = modes[j.min(modes.len() - 1)];
            let h = ModeHamiltonian::new(0.0, q);
            b.ur[j] = s.u.re;
            b.ui[j] = s.u.im;
            b.vr[j] = s.v.re;
            b.vi[j] = s.v.im;
            b.cos_q[j] = q.cos();
            b.h_x[j] = h.h_x();
        }
        b
    }

    fn state(&self, j: usize) -> ModeState {
        ModeState::new(
            Complex64::new(self.ur[j], self.ui[j]),
            Complex64::new(self.vr[j], self.vi[j]),
        )
    }
}

// -i H psi with H = [[a, b], [b, -a]]
#[inline(always)]
fn bdg_rhs(a: f64, b: f64, ur: f64, ui: f64, vr: f64, vi: f64) -> (f64, f64, f64, f64) {
    let xr = a * ur + b * vr;
    let xi = a * ui + b * vi;
    let yr = b * ur - a * vr;
    let yi = b * ui - a * vi;
    (xi, -xr, yi, -yr)
}

impl LaneBlock for PureBlock {
    #[inline]
    fn step(&mut self, dt: f64, g0: f64, gm: f64, g1: f64) {
        let h = 0.5 * dt;
        let sixth = dt / 6.0;
        for j in 0..LANES {
            let c = self.cos_q[j];
            let b = self.h_x[j];
            let a0 = 2.0 * (g0 - c);
            let am = 2.0 * (gm - c);
            let a1 = 2.0 * (g1 - c);
            let (ur, ui, vr, vi) = (self.ur[j], self.ui[j], self.vr[j], self.vi[j]);

            let k1 = bdg_rhs(a0, b, ur, ui, vr, vi);
            let k2 = bdg_rhs(
                am,
                b,
                ur + h * k1.0,
                ui + h * k1.1,
                vr + h * k1.2,
                vi + h * k1.3,
            );
            let k3 = bdg_rhs(
                am,
                b,
                ur + h * k2.0,
                ui + h * k2.1,
                vr + h * k2.2,
                vi + h * k2.3,
            );
            let k4 = bdg_rhs(
                a1,
                b,
                ur + dt * k3.0,
                ui + dt * k3.1,
                vr + dt * k3.2,
                vi + dt * k3.3,
            );

            self.ur[j] = ur + sixth * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
            self.ui[j] = ui + sixth * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
            self.vr[j] = vr + sixth * (k1.2 + 2.0 * k2.2 + 2.0 * k3.2 + k4.2);
            self.vi[j] = vi + sixth * (k1.3 + 2.0 * k2.3 + 2.0 * k3.3 + k4.3);
        }
    }

    fn violation(&self) -> Option<(usize, f64)> {
        (0..LANES).find_map(|j| {
            let drift = (self.state(j).norm_sqr() - 1.0).abs();
            (drift > NORM_ABORT || !drift.is_finite()).then_some((j, drift))
        })
    }
}

#[derive(Clone)]
struct BlochBlock {
    x: [f64; LANES],
    y: [f64; LANES],
    z: [f64; LANES],
    cos_q: [f64; LANES],
    h_x: [f64; LANES],
    gamma: f64,
}

impl BlochBlock {
    fn new(modes: &[(f64, ModeDensity)], gamma: f64) -> Self {
        let mut b = BlochBlock {
            x: [0.0; LANES],
            y: [0.0; LANES],
            z: [0.0; LANES],
            cos_q: [0.0; LANES],
            h_x: [0.0; LANES],
            gamma,
        };
        for j in 0..LANES {
            let (q, rho) = modes[j.min(modes.len() - 1)];
            let h = ModeHamiltonian::new(0.0, q);
            let [x, y, z] = rho.bloch();
            b.x[j] = x;
            b.y[j] = y;
            b.z[j] = z;
            b.cos_q[j] = q.cos();
            b.h_x[j] = h.h_x();
        }
        b
    }

    fn density(&self, j: usize) -> ModeDensity {
        ModeDensity::from_bloch([self.x[j], self.y[j], self.z[j]])
    }
}

// d r/dt = 2 h x r - gamma (x, y, 0), h = (b, 0, a)
#[inline(always)]
fn bloch_rhs(a: f64, b: f64, gamma: f64, x: f64, y: f64, z: f64) -> (f64, f64, f64) {
    (
        -2.0 * a * y - gamma * x,
        2.0 * (a * x - b * z) - gamma * y,
        2.0 * b * y,
    )
}

impl LaneBlock for BlochBlock {
    #[inline]
    fn step(&mut self, dt: f64, g0: f64, gm: f64, g1: f64) {
        let h = 0.5 * dt;
        let sixth = dt / 6.0;
        let gamma = self.gamma;
        for j in 0..LANES {
            let c = self.cos_q[j];
            let b = self.h_x[j];
            let a0 = 2.0 * (g0 - c);
            let am = 2.0 * (gm - c);
            let a1 = 2.0 * (g1 - c);
            let (x, y, z) = (self.x[j], self.y[j], self.z[j]);

            let k1 = bloch_rhs(a0, b, gamma, x, y, z);
            let k2 = bloch_rhs(am, b, gamma, x + h * k1.0, y + h * k1.1, z + h * k1.2);
            let k3 = bloch_rhs(am, b, gamma, x + h * k2.0, y + h * k2.1, z + h * k2.2);
            let k4 = bloch_rhs(a1, b, gamma, x + dt * k3.0, y + dt * k3.1, z + dt * k3.2);

            self.x[j] = x + sixth * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
            self.y[j] = y + sixth * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
            self.z[j] = z + sixth * (k1.2 + 2.0 * k2.2 + 2.0 * k3.2 + k4.2);
        }
    }

    fn violation(&self) -> Option<(usize, f64)> {
        (0..LANES).find_map(|j| {
            let min_eig = self.density(j).eigenvalues()[0];
            (min_eig < POSITIVITY_ABORT || !min_eig.is_finite()).then_some((j, min_eig))
        })
    }
}

struct Violation {
    slot: usize,
    t: f64,
    value: f64,
}

/// Advances every block from `t_start` to `t_end` in `plan.steps` RK4 steps.
fn drive<S: Schedule + ?Sized, B: LaneBlock>(
    blocks: &mut [B],
    schedule: &S,
    t_start: f64,
    t_end: f64,
    plan: StepPlan,
    check_every: usize,
) -> Result<(), (usize, Violation)> {
    let StepPlan { steps, dt } = plan;
    let mut g0 = schedule.coupling(t_start);
    for k in 0..steps {
        let t0 = t_start + k as f64 * dt;
        let tm = t0 + 0.5 * dt;
        let t1 = if k + 1 == steps {
            t_end
        } else {
            t_start + (k + 1) as f64 * dt
        };
        let gm = schedule.coupling(tm);
        let g1 = schedule.coupling(t1);
        for b in blocks.iter_mut() {
            b.step(dt, g0, gm, g1);
        }
        g0 = g1;
        if (k + 1) % check_every == 0 || k + 1 == steps {
            for (i, b) in blocks.iter().enumerate() {
                if let Some((slot, value)) = b.violation() {
                    return Err((i, Violation { slot, t: t1, value }));
                }
            }
        }
    }
    Ok(())
}

fn check_window_inputs(policy: &StepPolicy, noise: &Noise) -> Result<(), DynamicsError> {
    policy.validate()?;
    noise.validate()
}

/// Integrates one mode from `t_start` to `t_end` (either direction).
pub fn evolve_pure_between<S: Schedule + ?Sized>(
    schedule: &S,
    q: f64,
    initial: ModeState,
    t_start: f64,
    t_end: f64,
    policy: &StepPolicy,
) -> Result<ModeState, DynamicsError> {
    check_window_inputs(policy, &Noise::NONE)?;
    let plan = policy.plan(schedule, &Noise::NONE, t_start, t_end);
    let mut blocks = [PureBlock::new(&[(q, initial)])];
    drive(
        &mut blocks,
        schedule,
        t_start,
        t_end,
        plan,
        policy.check_every,
    )
    .map_err(|(_, v)| DynamicsError::NormDrift {
        q,
        t: v.t,
        drift: v.value,
        dt: plan.dt,
    })?;
    Ok(blocks[0].state(0))
}

/// Integrates the BdG equations for mode `q` across the whole window,
/// starting from the ground state at the initial coupling.
pub fn evolve_pure<S: Schedule + ?Sized>(
    schedule: &S,
    q: f64,
    policy: &StepPolicy,
) -> Result<ModeState, DynamicsError> {
    let (t_i, t_f) = schedule.window();
    let gs = ising::ground_state(schedule.initial_coupling(), q)?;
    evolve_pure_between(schedule, q, gs, t_i, t_f, policy)
}

/// Integrates the dephasing master equation for mode `q` from `initial`.
pub fn evolve_lindblad_between<S: Schedule + ?Sized>(
    schedule: &S,
    q: f64,
    initial: ModeDensity,
    noise: &Noise,
    t_start: f64,
    t_end: f64,
    policy: &StepPolicy,
) -> Result<ModeDensity, DynamicsError> {
    check_window_inputs(policy, noise)?;
    let plan = policy.plan(schedule, noise, t_start, t_end);
    let mut blocks = [BlochBlock::new(&[(q, initial)], noise.dephasing())];
    drive(
        &mut blocks,
        schedule,
        t_start,
        t_end,
        plan,
        policy.check_every,
    )
    .map_err(|(_, v)| DynamicsError::Positivity {
        q,
        t: v.t,
        min_eigenvalue: v.value,
        dt: plan.dt,
    })?;
    Ok(blocks[0].density(0))
}

/// Noisy evolution of mode `q` across the window from the initial ground state.
pub fn evolve_lindblad<S: Schedule + ?Sized>(
    schedule: &S,
    q: f64,
    noise: &Noise,
    policy: &StepPolicy,
) -> Result<ModeDensity, DynamicsError> {
    let (t_i, t_f) = schedule.window();
    let gs = ising::ground_state(schedule.initial_coupling(), q)?;
    evolve_lindblad_between(schedule, q, ModeDensity::pure(&gs), noise, t_i, t_f, policy)
}

// ---------------------------------------------------------------------------
// defect density

/// Identifies the schedule a result was produced with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolDescriptor {
    pub label: String,
    pub tau_q: Option<f64>,
    pub zeta: Option<f64>,
    pub r: f64,
    pub g_i: f64,
    pub g_f: f64,
}

impl From<&QuenchProtocol> for ProtocolDescriptor {
    fn from(p: &QuenchProtocol) -> Self {
        Self {
            label: p.label().to_string(),
            tau_q: Some(p.tau_q()),
            zeta: p.zeta(),
            r: p.r(),
            g_i: p.g_i(),
            g_f: p.g_f(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub steps: usize,
    pub dt: f64,
    pub eta: f64,
    /// The run was evaluated with the closed-form sudden-quench overlap.
    pub sudden: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuenchResult {
    pub protocol: ProtocolDescriptor,
    pub n_sites: usize,
    pub w: f64,
    /// `(q, p_q)` in ascending `q`.
    pub modes: Vec<(f64, f64)>,
    pub defect_density: f64,
    pub total_time: f64,
    pub stats: StepStats,
}

impl QuenchResult {
    fn assemble(
        protocol: ProtocolDescriptor,
        grid: &ModeGrid,
        w: f64,
        probabilities: Vec<f64>,
        total_time: f64,
        stats: StepStats,
    ) -> Self {
        let modes: Vec<(f64, f64)> = grid.momenta().iter().copied().zip(probabilities).collect();
        let defect_density = aggregate(&modes, grid.n_sites());
        Self {
            protocol,
            n_sites: grid.n_sites(),
            w,
            modes,
            defect_density,
            total_time,
            stats,
        }
    }

    /// `q,p_q` rows with a header, shortest round-trip decimals.
    pub fn modes_csv(&self) -> String {
        let mut out = String::from("q,p_q\n");
        for (q, p) in &self.modes {
            out.push_str(&format!("{q},{p}\n"));
        }
        out
    }
}

/// `n = (2/N) sum_q p_q`, summed in the order given.
pub fn aggregate(modes: &[(f64, f64)], n_sites: usize) -> f64 {
    let sum = modes.iter().fold(0.0, |acc, &(_, p)| acc + p);
    2.0 * sum / n_sites as f64
}

// enough lanes per task to amortize the schedule evaluations
const MIN_BLOCKS_PER_TASK: usize = 8;

fn blocks_per_task(n_blocks: usize) -> usize {
    let workers = rayon::current_num_threads().max(1);
    n_blocks.div_ceil(workers).max(MIN_BLOCKS_PER_TASK)
}

/// Final-state excitation probabilities for every momentum of `grid`.
///
/// With silent noise the pure BdG equations are integrated, otherwise the
/// master equation.  Blocks of modes are spread over the current rayon pool.
pub fn mode_probabilities<S: Schedule + ?Sized>(
    schedule: &S,
    grid: &ModeGrid,
    noise: &Noise,
    policy: &StepPolicy,
) -> Result<(Vec<f64>, StepPlan), DynamicsError> {
    check_window_inputs(policy, noise)?;
    let (t_i, t_f) = schedule.window();
    let g_i = schedule.initial_coupling();
    let g_f = schedule.final_coupling();
    let plan = policy.plan(schedule, noise, t_i, t_f);
    let qs = grid.momenta();
    let excited = qs
        .iter()
        .map(|&q| ising::excited_state(g_f, q))
        .collect::<Result<Vec<_>, _>>()?;
    let initial = qs
        .iter()
        .map(|&q| ising::ground_state(g_i, q).map(|s| (q, s)))
        .collect::<Result<Vec<_>, _>>()?;

    let mut probs = Vec::with_capacity(qs.len());
    if noise.is_silent() {
        let mut blocks: Vec<PureBlock> = initial.chunks(LANES).map(PureBlock::new).collect();
        let per_task = blocks_per_task(blocks.len());
        blocks
            .par_chunks_mut(per_task)
            .enumerate()
            .try_for_each(|(task, chunk)| {
                drive(chunk, schedule, t_i, t_f, plan, policy.check_every).map_err(|(i, v)| {
                    let mode = (task * per_task + i) * LANES + v.slot;
                    DynamicsError::NormDrift {
                        q: qs[mode.min(qs.len() - 1)],
                        t: v.t,
                        drift: v.value,
                        dt: plan.dt,
                    }
                })
            })?;
        for (m, ex) in excited.iter().enumerate() {
            probs.push(blocks[m / LANES].state(m % LANES).population(ex));
        }
    } else {
        let init: Vec<(f64, ModeDensity)> = initial
            .iter()
            .map(|(q, s)| (*q, ModeDensity::pure(s)))
            .collect();
        let gamma = noise.dephasing();
        let mut blocks: Vec<BlochBlock> = init
            .chunks(LANES)
            .map(|c| BlochBlock::new(c, gamma))
            .collect();
        let per_task = blocks_per_task(blocks.len());
        blocks
            .par_chunks_mut(per_task)
            .enumerate()
            .try_for_each(|(task, chunk)| {
                drive(chunk, schedule, t_i, t_f, plan, policy.check_every).map_err(|(i, v)| {
                    let mode = (task * per_task + i) * LANES + v.slot;
                    DynamicsError::Positivity {
                        q: qs[mode.min(qs.len() - 1)],
                        t: v.t,
                        min_eigenvalue: v.value,
                        dt: plan.dt,
                    }
                })
            })?;
        for (m, ex) in excited.iter().enumerate() {
            probs.push(blocks[m / LANES].density(m % LANES).population(ex));
        }
    }
    Ok((probs, plan))
}

/// Kink density after the quench, `n = (2/N) sum_{q>0} p_q`.
///
/// Adiabatic schedules whose whole window `2 theta` is shorter than ten
/// steps are evaluated as a sudden quench instead of being integrated.
pub fn defect_density(
    protocol: &QuenchProtocol,
    n_sites: usize,
    noise: &Noise,
    policy: &StepPolicy,
) -> Result<QuenchResult, DynamicsError> {
    let grid = ising::mode_grid(n_sites)?;
    check_window_inputs(policy, noise)?;
    if let Some(theta) = protocol.theta() {
        if 2.0 * theta < 10.0 * policy.max_step(protocol, noise) {
            let mut res = sudden_quench(protocol.g_i(), protocol.g_f(), n_sites)?;
            res.protocol = protocol.into();
            res.w = noise.w;
            res.total_time = protocol.total_time();
            res.stats.eta = policy.eta;
            return Ok(res);
        }
    }
    let (probs, plan) = mode_probabilities(protocol, &grid, noise, policy)?;
    Ok(QuenchResult::assemble(
        protocol.into(),
        &grid,
        noise.w,
        probs,
        protocol.total_time(),
        StepStats {
            steps: plan.steps,
            dt: plan.dt,
            eta: policy.eta,
            sudden: false,
        },
    ))
}

/// Instantaneous jump from `g_i` to `g_f`: `p_q = |<ex(g_f)|gs(g_i)>|^2`.
pub fn sudden_quench(g_i: f64, g_f: f64, n_sites: usize) -> Result<QuenchResult, DynamicsError> {
    let grid = ising::mode_grid(n_sites)?;
    let probs = grid
        .momenta()
        .iter()
        .map(|&q| {
            let gs = ising::ground_state(g_i, q)?;
            excitation_probability(&gs, q, g_f)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(QuenchResult::assemble(
        ProtocolDescriptor {
            label: "sudden".into(),
            tau_q: None,
            zeta: None,
            r: 1.0,
            g_i,
            g_f,
        },
        &grid,
        0.0,
        probs,
        0.0,
        StepStats {
            steps: 0,
            dt: 0.0,
            eta: 0.0,
            sudden: true,
        },
    ))
}
