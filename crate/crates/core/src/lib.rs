//! Interventions as measure-then-control maps.
//!
//! An intervention measures a system, then applies a control that depends on
//! the outcome. This crate provides five engines for the same family of
//! protocols, built so that each can check the others:
//!
//! - [`classical`]: closed forms for Gaussian momentum states and the
//!   thermodynamic ledger (work, efficiency, entropy, information).
//! - [`grid`]: the same kernels applied to sampled densities, plus the
//!   two-particle collision map.
//! - [`montecarlo`]: trajectory sampling of the classical protocol.
//! - [`fock`]: a truncated oscillator with a binary position-sign
//!   measurement and parity feedback.
//! - [`collision`]: the three-mode quantum collision in covariance form.
//!
//! Conventions: `ħ = k_B = 1`, entropies in nats, thermal momentum variance
//! `Δ = m·T`, vacuum quadrature variance `1/2`.

// `!(x >= lim)` rejects NaN along with small values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classical;
pub mod collision;
pub mod error;
pub mod fock;
pub mod grid;
pub mod montecarlo;

pub use classical::{
    ControlKind, GaussianMoment, MeasurementModel, Posterior, SystemContext, ThermoLedger,
};
pub use collision::{CovarianceState, SymplecticMap};
pub use error::{Error, Result};
pub use fock::{DensityMatrix, FockSpace, MeasurementPair, QuantumLedger};
pub use grid::{Grid1D, GridDistribution, JointDistribution};
pub use montecarlo::{RunSummary, TrialRecord};

/// Library version, echoed into reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Scientific notation with 17 significant digits, enough to round-trip any
/// `f64`. Non-finite values print as `inf`, `-inf`, `NaN`.
pub fn format_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}
