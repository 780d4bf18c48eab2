//! Truncated Fock-space oscillator: a binary measurement of the sign of the
//! position, parity feedback, and the generic Kraus/channel algebra.
//!
//! Units `ħ = m = ω = 1`, so the ground-state position variance is
//! `Δ₀ = 1/2` and `q = (a + a†)/√2`. Matrix functions of `q` are evaluated
//! through its eigendecomposition.
//!
//! A truncated space is trusted only while the top `⌈N/8⌉` levels hold less
//! than `1e-8` of the population. Operations check this on their inputs.

mod channel;
mod feedback;
mod measurement;
mod space;
mod state;

pub use channel::{cptp_intervention, Channel, Intervention};
pub use feedback::{
    basis_channel, energy_increase, hermiticity_error, parity_feedback, thermalisation_map, uncertainty_report,
    QuantumLedger, Thermalisation, UncertaintyReport,
};
pub use measurement::{measure, unconditional, MeasurementPair, Outcome, MIN_PROBABILITY};
pub use space::{build_operators, CMatrix, FockSpace, OperatorMatrix, Operators, GROUND_VARIANCE};
pub use state::{shannon_entropy, thermal_populations, DensityMatrix, LEAKAGE_LIMIT};
