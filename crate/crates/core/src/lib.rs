//! # delaystab
//!
//! Design and verification of delay-induced stabilization for the 1-D wave
//! equation with an internal delayed potential
//!
//! ```text
//! u_tt - u_xx + alpha * u(x, t - tau) = 0,   u(0, t) = u(ell, t) = 0.
//! ```
//!
//! Each Dirichlet mode `sin(n pi x / ell)` evolves independently and is
//! governed by the quasipolynomial `Q(s) = s^2 + beta + alpha e^{-s tau}` with
//! `beta = n^2 pi^2 / ell^2`. The crate is organised by concern:
//!
//! - [`quasipoly`]: evaluation, argument-principle root counting, certified
//!   root finding and the spectral abscissa.
//! - [`stability`]: the parameter-plane stabilization test, crossing
//!   frequencies and critical delays, and the region chart.
//! - [`modal`]: quasimode initial data and a delay-ODE integrator used as an
//!   independent oracle for the PDE solver.
//! - [`fdtd`]: explicit leapfrog simulation of the delayed wave equation with
//!   a ring buffer of past fields.
//!
//! ## Feature flags
//!
//! - `parallel` (default): batch work (region charts, sweeps, wide FDTD grids)
//!   runs on the rayon thread pool. Without it every [`Execution`] request
//!   falls back to the sequential path.

pub mod exec;
pub mod fdtd;
pub mod modal;
pub mod quasipoly;
pub mod stability;

pub use exec::Execution;
pub use fdtd::{DelayedWaveState, EnergyTrace, SimConfig, SimError, SnapshotSet};
pub use modal::{DecayFit, HistoryFunction, ModalError, ModalTrace, QuasimodeData};
pub use quasipoly::{ComplexValue, ModalQuasipolynomial, QuasiError, Rectangle, Root, RootSet};
pub use stability::{
    ControlParams, CrossingData, ModeSpec, OpenInterval, RegionGrid, StabilityCertificate,
};
