use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::measurement::{check_dims, measure, unconditional_raw, MeasurementPair, Outcome};
use super::space::{build_operators, max_abs, CMatrix};
use super::state::{shannon_entropy, DensityMatrix, LEAKAGE_LIMIT};
use crate::error::{Error, Result};

/// Energy and entropy record of measure-then-parity-feedback.
///
/// Energies are `ħω Tr[a†a ρ]` (zero-point excluded); entropies in nats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantumLedger {
    pub lambda: f64,
    pub dim: usize,
    pub energy_initial: f64,
    pub energy_after_measurement: f64,
    pub energy_after_feedback: f64,
    /// `ΔĒ`, energy added by the measurement.
    pub energy_increase: f64,
    pub probability_plus: f64,
    pub probability_minus: f64,
    pub entropy_initial: f64,
    pub entropy_conditional_plus: f64,
    pub entropy_conditional_minus: f64,
    /// `S(ρ′)` of the unconditional post-measurement state.
    pub entropy_unconditional: f64,
    pub entropy_final: f64,
    /// Shannon entropy `H(p_n)` of the input populations.
    pub population_entropy: f64,
    /// `S(ρ′) − Σ± P± S(ρ|±)`: information the outcome carries about the state.
    pub holevo_information: f64,
    /// `S(ρ′) − S(ρ_f)`.
    pub feedback_entropy_reduction: f64,
    /// `S(ρ′) − H(p_n)`.
    pub measurement_entropy_excess: f64,
    /// Population of `ρ′` in the guard levels.
    pub post_measurement_leakage: f64,
    /// Whether `ρ′` also respects the leakage limit, i.e. whether the
    /// post-measurement quantities are free of truncation artefacts.
    pub truncation_converged: bool,
}

/// `ρ_f = M₊ρM₊† + Π M₋ρM₋† Π`: keep `+`, flip parity on `−`.
pub fn parity_feedback(rho: &DensityMatrix, pair: &MeasurementPair) -> Result<(DensityMatrix, QuantumLedger)> {
    check_dims(rho, pair)?;
    rho.check_truncation()?;
    let space = pair.space();
    let ops = build_operators(space);
    let w = space.frequency();

    let (plus, pp) = measure(rho, pair, Outcome::Plus)?;
    let (minus, pm) = measure(rho, pair, Outcome::Minus)?;
    let after = DensityMatrix::from_raw(unconditional_raw(rho, pair));
    let pi = ops.parity.entries();
    let m = pair.kraus(Outcome::Minus).entries();
    let p = pair.kraus(Outcome::Plus).entries();
    let fin = p * rho.entries() * p.adjoint() + pi * m * rho.entries() * m.adjoint() * pi;
    let fin = DensityMatrix::from_raw(fin);

    let s_after = after.entropy();
    let s_final = fin.entropy();
    let (s_plus, s_minus) = (plus.entropy(), minus.entropy());
    let h = shannon_entropy(&rho.populations());
    let leakage = after.top_population(space.guard_levels());
    let e0 = w * rho.mean_number();
    let e1 = w * after.mean_number();

    let ledger = QuantumLedger {
        lambda: pair.lambda(),
        dim: space.dim(),
        energy_initial: e0,
        energy_after_measurement: e1,
        energy_after_feedback: w * fin.mean_number(),
        energy_increase: e1 - e0,
        probability_plus: pp,
        probability_minus: pm,
        entropy_initial: rho.entropy(),
        entropy_conditional_plus: s_plus,
        entropy_conditional_minus: s_minus,
        entropy_unconditional: s_after,
        entropy_final: s_final,
        population_entropy: h,
        holevo_information: s_after - pp * s_plus - pm * s_minus,
        feedback_entropy_reduction: s_after - s_final,
        measurement_entropy_excess: s_after - h,
        post_measurement_leakage: leakage,
        truncation_converged: leakage < LEAKAGE_LIMIT,
    };
    Ok((fin, ledger))
}

/// `ΔĒ = ħω (Tr[a†a ρ′] − Tr[a†a ρ])`, weighted by the populations of `ρ`.
pub fn energy_increase(rho: &DensityMatrix, pair: &MeasurementPair) -> Result<f64> {
    check_dims(rho, pair)?;
    rho.check_truncation()?;
    let after = DensityMatrix::from_raw(unconditional_raw(rho, pair));
    Ok(pair.space().frequency() * (after.mean_number() - rho.mean_number()))
}

/// Variance ratios of the canonical variables under the measurement, and
/// the energy bounds built from them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyReport {
    /// `Σ± P± V±(q) / V(q)`.
    pub gamma_q: f64,
    /// `Σ± P± V±(p) / V(p)`.
    pub gamma_p: f64,
    /// Mean energy of `ρ′` including the zero-point term.
    pub energy_after: f64,
    /// `(2n̄+1)(ħω/2)(γ_q + 1/γ_q)`.
    pub energy_bound: f64,
    pub energy_increase: f64,
    /// `(2n̄+1)ħω/4`, the increase bound claimed for `γ_q ≤ ½`.
    pub increase_bound: f64,
}

impl UncertaintyReport {
    pub fn energy_bound_holds(&self) -> bool {
        self.energy_after <= self.energy_bound
    }

    pub fn in_half_regime(&self) -> bool {
        self.gamma_q <= 0.5
    }

    pub fn increase_bound_holds(&self) -> bool {
        self.energy_increase <= self.increase_bound
    }

    /// Whether the momentum variance grew by at least `1/γ_q`.
    pub fn momentum_growth_holds(&self) -> bool {
        self.gamma_p >= 1.0 / self.gamma_q
    }
}

pub fn uncertainty_report(rho: &DensityMatrix, nbar: f64, pair: &MeasurementPair) -> Result<UncertaintyReport> {
    let ops = build_operators(pair.space());
    let variance = |r: &DensityMatrix, op: &CMatrix| {
        let m = super::state::trace_product(op, r.entries()).re;
        super::state::trace_product(&(op * op), r.entries()).re - m * m
    };
    let (q, p) = (ops.q.entries(), ops.p.entries());
    let (mut vq, mut vp) = (0.0, 0.0);
    for o in Outcome::BOTH {
        let (post, prob) = measure(rho, pair, o)?;
        vq += prob * variance(&post, q);
        vp += prob * variance(&post, p);
    }
    let gamma_q = vq / variance(rho, q);
    let gamma_p = vp / variance(rho, p);
    let w = pair.space().frequency();
    let increase = energy_increase(rho, pair)?;
    let after = DensityMatrix::from_raw(unconditional_raw(rho, pair));
    Ok(UncertaintyReport {
        gamma_q,
        gamma_p,
        energy_after: w * (after.mean_number() + 0.5),
        energy_bound: (2.0 * nbar + 1.0) * 0.5 * w * (gamma_q + 1.0 / gamma_q),
        energy_increase: increase,
        increase_bound: (2.0 * nbar + 1.0) * w / 4.0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thermalisation {
    pub state: DensityMatrix,
    pub entropy_change: f64,
    pub energy_change: f64,
    pub trace_error: f64,
}

/// `E(ρ) = Σ_n σ_n† ρ σ_n` with `σ_n = |n⟩⟨ψ_n|`, i.e.
/// `E(ρ) = Σ_n ρ_nn |ψ_n⟩⟨ψ_n|`, over every level of the space.
pub fn thermalisation_map(rho: &DensityMatrix, pair: &MeasurementPair) -> Result<Thermalisation> {
    check_dims(rho, pair)?;
    let u = pair.unitary().entries();
    let vectors: Vec<DVector<Complex64>> = (0..rho.dim()).map(|n| u.column(n).into_owned()).collect();
    basis_channel(rho, &vectors, pair.space().frequency())
}

/// `ρ → Σ_n ρ_nn |v_n⟩⟨v_n|` for unit vectors `v_n`.
pub fn basis_channel(rho: &DensityMatrix, vectors: &[DVector<Complex64>], frequency: f64) -> Result<Thermalisation> {
    if vectors.len() != rho.dim() || vectors.iter().any(|v| v.len() != rho.dim()) {
        return Err(Error::InvalidState(format!("need {} vectors of length {}", rho.dim(), rho.dim())));
    }
    let n = rho.dim();
    let mut out = CMatrix::zeros(n, n);
    for (k, v) in vectors.iter().enumerate() {
        out += v * v.adjoint() * rho.entries()[(k, k)];
    }
    let state = DensityMatrix::from_raw(out);
    Ok(Thermalisation {
        entropy_change: state.entropy() - rho.entropy(),
        energy_change: frequency * (state.mean_number() - rho.mean_number()),
        trace_error: (state.trace().re - 1.0).abs(),
        state,
    })
}

/// Largest entry of `A − A†` for a matrix produced by these maps; a sanity
/// probe for Hermiticity after floating-point products.
pub fn hermiticity_error(rho: &DensityMatrix) -> f64 {
    max_abs(&(rho.entries() - rho.entries().adjoint()))
}
