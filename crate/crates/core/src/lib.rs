//! Subwavelength wave localisation in one-dimensional, time-modulated chains of
//! high-contrast resonators.
//!
//! The crate works entirely at the level of the capacitance-matrix ODE: the
//! wave field inside each resonator is reduced to one complex amplitude and the
//! chain dynamics become a finite (or Floquet-Bloch reduced) system of
//! second-order ODEs with time-periodic coefficients.
//!
//! * [`geometry`] – resonator layout, quasiperiodic / generalised / real-space
//!   capacitance matrices and the one-dimensional Floquet-Bloch transform.
//! * [`modulation`] – Fourier-series modulations of `1/κ_i(t)` and `1/s_i(t)`,
//!   the diagonal `W₁, W₂, W₃` matrices and temporal defect envelopes.
//! * [`floquet_band`] – monodromy matrices, quasifrequencies, Brillouin-zone
//!   sweeps and band / momentum gap detection.
//! * [`defect_lab`] – finite super-cells with spatial and temporal defects,
//!   degrees of localisation and time evolution.
//! * [`toeplitz_roots`] – the single-resonator Toeplitz determinant
//!   characterisation of defect resonances.

pub mod defect_lab;
pub mod error;
pub mod floquet_band;
pub mod geometry;
pub mod linalg;
pub mod modulation;
pub mod ode;
pub mod toeplitz_roots;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Modulation period `T = 2π/Ω`.
pub fn period(omega_mod: f64) -> f64 {
    2.0 * std::f64::consts::PI / omega_mod
}
