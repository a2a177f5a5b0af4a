//! Momentum-space data of the transverse-field Ising chain after the
//! Jordan-Wigner and Bogoliubov reduction.
//!
//! Each mode `q` evolves under the 2x2 matrix `[[h_z, h_x], [h_x, -h_z]]`
//! with `h_z = 2(g - cos q)` and `h_x = 2 sin q`; its eigenvalues are
//! `±omega_q`.

use std::f64::consts::PI;

use num_complex::Complex64;
use thiserror::Error;

use crate::dynamics::ModeState;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IsingError {
    #[error("gap closes at g = {g}, q = {q}: eigenvectors are degenerate")]
    GapClosed { g: f64, q: f64 },
    #[error("mode grid needs an even site count N >= 4, got {0}")]
    InvalidSiteCount(usize),
}

/// Quasiparticle dispersion `omega_q = 2 sqrt(1 + g^2 - 2 g cos q)`.
pub fn dispersion(g: f64, q: f64) -> f64 {
    ModeHamiltonian::new(g, q).gap()
}

/// The 2x2 BdG Hamiltonian of a single mode at fixed coupling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeHamiltonian {
    pub q: f64,
    pub g: f64,
}

impl ModeHamiltonian {
    pub fn new(g: f64, q: f64) -> Self {
        Self { q, g }
    }

    pub fn h_z(&self) -> f64 {
        2.0 * (self.g - self.q.cos())
    }

    pub fn h_x(&self) -> f64 {
        2.0 * self.q.sin()
    }

    /// Positive eigenvalue, equal to `omega_q`.
    pub fn gap(&self) -> f64 {
        self.h_z().hypot(self.h_x())
    }

    /// Unit vector along `(h_x, 0, h_z)`, the Bloch vector of the excited state.
    pub fn field_direction(&self) -> Result<[f64; 3], IsingError> {
        let e = self.gap();
        if !(e > 0.0) {
            return Err(IsingError::GapClosed {
                g: self.g,
                q: self.q,
            });
        }
        Ok([self.h_x() / e, 0.0, self.h_z() / e])
    }

    pub fn apply(&self, s: &ModeState) -> ModeState {
        let (a, b) = (self.h_z(), self.h_x());
        ModeState::new(a * s.u + b * s.v, b * s.u - a * s.v)
    }

    fn eigenvector(&self, upper: bool) -> Result<ModeState, IsingError> {
        let (a, b) = (self.h_z(), self.h_x());
        let e = self.gap();
        if !(e > 0.0) {
            return Err(IsingError::GapClosed {
                g: self.g,
                q: self.q,
            });
        }
        // pick the row of (H - lambda) that avoids cancellation
        let (u, v) = match (upper, a >= 0.0) {
            (false, true) => (b, -(a + e)),
            (false, false) => (e - a, -b),
            (true, true) => (a + e, b),
            (true, false) => (b, e - a),
        };
        let norm = u.hypot(v);
        let (mut u, mut v) = (u / norm, v / norm);
        if u < 0.0 || (u == 0.0 && v < 0.0) {
            u = -u;
            v = -v;
        }
        Ok(ModeState::new(
            Complex64::new(u, 0.0),
            Complex64::new(v, 0.0),
        ))
    }
}

/// Ground-state amplitudes `(u, v)`; eigenvalue `-omega_q`.
///
/// Phase convention: the first nonzero component is real and non-negative.
pub fn ground_state(g: f64, q: f64) -> Result<ModeState, IsingError> {
    ModeHamiltonian::new(g, q).eigenvector(false)
}

/// Excited-state amplitudes; eigenvalue `+omega_q`.
pub fn excited_state(g: f64, q: f64) -> Result<ModeState, IsingError> {
    ModeHamiltonian::new(g, q).eigenvector(true)
}

/// Antiperiodic momenta `q_m = pi (2m - 1) / N`, `m = 1..N/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeGrid {
    n_sites: usize,
    momenta: Vec<f64>,
}

impl ModeGrid {
    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn momenta(&self) -> &[f64] {
        &self.momenta
    }

    pub fn len(&self) -> usize {
        self.momenta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.momenta.is_empty()
    }

    /// `(2 / N) * sum f(q_m)`, the grid form of `(1/pi) int_0^pi f dq`,
    /// summed in ascending `q`.
    pub fn average<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        let sum: f64 = self.momenta.iter().map(|&q| f(q)).sum();
        2.0 * sum / self.n_sites as f64
    }
}

pub fn mode_grid(n_sites: usize) -> Result<ModeGrid, IsingError> {
    if n_sites < 4 || !n_sites.is_multiple_of(2) {
        return Err(IsingError::InvalidSiteCount(n_sites));
    }
    let momenta = (1..=n_sites / 2)
        .map(|m| PI * (2 * m - 1) as f64 / n_sites as f64)
        .collect();
    Ok(ModeGrid { n_sites, momenta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn dispersion_values() {
        assert!(dispersion(1.0, 1e-9) < 1e-8);
        for &q in &[0.1, 1.0, 2.5] {
            assert_relative_eq!(dispersion(0.0, q), 2.0, max_relative = 1e-15);
        }
        assert_relative_eq!(dispersion(2.0, 0.0), 2.0, max_relative = 1e-15);
    }

    #[test]
    fn dispersion_minimum_is_gap() {
        for &g in &[0.0, 0.3, 1.0, 1.7, 4.0] {
            let min = (0..=20_000)
                .map(|k| dispersion(g, PI * k as f64 / 20_000.0))
                .fold(f64::INFINITY, f64::min);
            assert!((min - 2.0 * (g - 1.0f64).abs()).abs() < 1e-9, "g = {g}");
            assert_eq!(dispersion(g, 0.7), dispersion(g, -0.7));
        }
    }

    #[test]
    fn hand_solved_ground_state() {
        let gs = ground_state(2.0, PI / 2.0).unwrap();
        assert!((gs.u.re - 0.2298).abs() < 1e-4);
        assert!((gs.v.re + 0.9732).abs() < 1e-4);
        assert_eq!(gs.u.im, 0.0);
    }

    #[test]
    fn field_polarized_limit() {
        let gs = ground_state(1e8, PI / 2.0).unwrap();
        assert!(gs.u.norm() < 1e-7);
        assert!((gs.v.re + 1.0).abs() < 1e-12);
        let ex = excited_state(1e8, PI / 2.0).unwrap();
        assert!(gs.overlap(&ex).norm() < 1e-15);
    }

    #[test]
    fn degenerate_point() {
        assert!(matches!(
            ground_state(1.0, 0.0),
            Err(IsingError::GapClosed { .. })
        ));
        assert!(excited_state(1.0, 0.0).is_err());
    }

    #[test]
    fn grid() {
        let g = mode_grid(4).unwrap();
        assert_eq!(g.momenta(), &[PI / 4.0, 3.0 * PI / 4.0]);
        let g = mode_grid(2000).unwrap();
        assert_eq!(g.len(), 1000);
        assert_eq!(*g.momenta().last().unwrap(), PI * 1999.0 / 2000.0);
        assert!(g.momenta().windows(2).all(|w| w[0] < w[1]));
        assert!(mode_grid(7).is_err());
        assert!(mode_grid(2).is_err());
    }

    #[test]
    fn grid_quadrature_converges_quadratically() {
        // (1/pi) int_0^pi q^2 dq = pi^2 / 3
        let exact = PI * PI / 3.0;
        let e1 = (mode_grid(40).unwrap().average(|q| q * q) - exact).abs();
        let e2 = (mode_grid(80).unwrap().average(|q| q * q) - exact).abs();
        assert!((e1 / e2 - 4.0).abs() < 1e-6, "ratio = {}", e1 / e2);

        let s2 = mode_grid(100).unwrap().average(|q| q.sin().powi(2));
        assert!((s2 - 0.5).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn eigenpairs_are_orthonormal(g in -5.0f64..5.0, q in 1e-3f64..(PI - 1e-3)) {
            let gs = ground_state(g, q).unwrap();
            let ex = excited_state(g, q).unwrap();
            prop_assert!((gs.norm_sqr() - 1.0).abs() < 1e-14);
            prop_assert!((ex.norm_sqr() - 1.0).abs() < 1e-14);
            prop_assert!(gs.overlap(&ex).norm() < 1e-14);

            let h = ModeHamiltonian::new(g, q);
            let e = h.gap();
            let hg = h.apply(&gs);
            let he = h.apply(&ex);
            let rg = ((hg.u + e * gs.u).norm_sqr() + (hg.v + e * gs.v).norm_sqr()).sqrt();
            let re = ((he.u - e * ex.u).norm_sqr() + (he.v - e * ex.v).norm_sqr()).sqrt();
            prop_assert!(rg < 1e-12 && re < 1e-12);
        }
    }
}
