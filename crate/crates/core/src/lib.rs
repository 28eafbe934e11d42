//! Numerical tests of adiabatic evolution for time-dependent quantum systems.
//!
//! The crate integrates the dimensionless Schrödinger equation
//! `i dpsi/dtau = h(tau) psi`, tracks the instantaneous eigenframes of
//! `h(tau)`, and re-expresses the dynamics in the basis of gauge-invariant
//! adiabatic orbits
//!
//! ```text
//! |Phi_m(tau)> = exp(-i int_0^tau (e_m - gamma_mm)) |phi_m(tau)>,   gamma_nm = i <phi_n|phi_m'>.
//! ```
//!
//! In that basis the expansion coefficients obey `c_m' = i sum_n M_mn c_n`
//! with `M_mn = |gamma_mn| exp(i theta_mn)`, and three adiabaticity tests are
//! compared against the measured survival probability `P_m = |c_m|^2`:
//!
//! * the traditional coupling-over-gap ratio `|gamma_nm| / |e_n - e_m|`,
//! * the pointwise test `|e_n - e_m + Delta_mn| >> |gamma_nm|`, where
//!   `Delta_mn` is the quantum geometric potential,
//! * the integral test `|int (e_n - e_m + Delta_mn)| >> int |gamma_nm|`.
//!
//! Modules, bottom-up:
//!
//! * [`linalg`]: dense complex matrices, Jacobi eigensolver, unitary steps.
//! * [`models`]: schedules, the spin-half rotating-field model, the dual
//!   construction `h^b = i U'^dagger U`, Landau-Zener sweeps.
//! * [`spectral`]: frame tracking, `gamma`, `theta`, `Delta`, adiabatic orbits.
//! * [`dynamics`]: exact propagation, the coefficient equations, survival.
//! * [`conditions`]: the three tests, phase preconditions, dual comparison.
//! * [`oracles`]: closed-form spin-half results.
//! * [`runner`]: JSON-configured experiments writing CSV and JSON reports.
//!
//! See `examples/` for one runnable program per capability.

#![allow(clippy::needless_range_loop)]

pub mod conditions;
pub mod dynamics;
pub mod error;
pub mod grid;
pub mod linalg;
pub mod models;
pub mod oracles;
pub mod quadrature;
pub mod runner;
pub mod spectral;

pub use error::{Error, Result};
pub use grid::TimeGrid;
pub use linalg::{eigh, propagate_step, ComplexMatrix, EigenDecomposition};
pub use models::{
    DualModel, HamiltonianModel, LandauZenerModel, Schedule, SpinHalfModel, SpinHalfParams, StaticModel,
};
pub use spectral::{track_frames, EigenFrameSequence, SpectralConfig, SpectralFlow};
