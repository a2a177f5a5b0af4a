//! Optimized adiabatic-impulse quenches of the transverse-field Ising chain.
//!
//! * [`protocols`]: closed-form LQ/NLQ, OAI and NLOAI schedules.
//! * [`ising`]: per-momentum Hamiltonians, eigenvectors and the mode grid.
//! * [`dynamics`]: BdG and dephasing master-equation integration, defect density.
//! * [`scaling`]: power-law fits and the scaling-law predictors.

pub mod dynamics;
pub mod ising;
pub mod protocols;
pub mod scaling;

pub use dynamics::{
    defect_density, evolve_lindblad, evolve_pure, excitation_probability, sudden_quench,
    ModeDensity, ModeState, Noise, QuenchResult, StepPolicy,
};
pub use protocols::{
    make_linear, make_nloai, make_nlq, make_oai, AlphaPolicy, CriticalData, ProtocolKind,
    QuenchProtocol,
};
