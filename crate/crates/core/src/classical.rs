//! Closed-form Gaussian engine for a classical intervention on the momentum
//! of a free particle.
//!
//! An intervention is a measurement followed by an outcome-conditioned
//! control. The measurement couples the momentum `p` to an apparatus pointer
//! prepared in a zero-mean Gaussian of variance `σ`; the pointer reads
//! `x = μ p + noise`, so the measurement kernel is
//!
//! ```text
//! M(x | p) = (2πσ)^{-1/2} exp(-(x - μ p)² / 2σ)
//! ```
//!
//! For a Gaussian prior `N(p₀, Δ)` everything stays Gaussian and the whole
//! thermodynamic ledger follows from the sharpness `C = 1 + μ²Δ/σ`.
//!
//! Units: `k_B = 1`. The thermal momentum variance is `Δ = m·T`.
//! Entropies are in nats.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Mean and variance of a one-dimensional Gaussian momentum distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianMoment {
    pub mean: f64,
    pub variance: f64,
}

impl GaussianMoment {
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        if !mean.is_finite() {
            return Err(invalid("mean", format!("must be finite, got {mean}")));
        }
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(invalid("variance", format!("must be positive and finite, got {variance}")));
        }
        Ok(Self { mean, variance })
    }

    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }

    /// Probability density at `p`.
    pub fn density(&self, p: f64) -> f64 {
        let d = p - self.mean;
        (-d * d / (2.0 * self.variance)).exp() / (2.0 * std::f64::consts::PI * self.variance).sqrt()
    }

    /// Mean kinetic energy `⟨p²⟩/2m`.
    pub fn kinetic_energy(&self, mass: f64) -> f64 {
        (self.mean * self.mean + self.variance) / (2.0 * mass)
    }

    /// Differential entropy in nats.
    pub fn entropy(&self) -> f64 {
        0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E * self.variance).ln()
    }
}

/// Gaussian pointer measurement `x = μ p + noise`, noise variance `σ`.
///
/// `σ = 0` is only reachable through [`MeasurementModel::ideal`]; the flag
/// forces callers onto the `C → ∞` limit forms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementModel {
    coupling: f64,
    apparatus_variance: f64,
    ideal: bool,
}

impl MeasurementModel {
    pub fn new(coupling: f64, apparatus_variance: f64) -> Result<Self> {
        check_coupling(coupling)?;
        if apparatus_variance == 0.0 {
            return Err(invalid(
                "apparatus_variance",
                "zero variance is the ideal limit; construct it with MeasurementModel::ideal",
            ));
        }
        if !(apparatus_variance > 0.0 && apparatus_variance.is_finite()) {
            return Err(invalid(
                "apparatus_variance",
                format!("must be positive and finite, got {apparatus_variance}"),
            ));
        }
        Ok(Self { coupling, apparatus_variance, ideal: false })
    }

    /// Noise-free pointer. Physically unreachable (it needs a zero-entropy
    /// apparatus) and therefore explicitly marked.
    pub fn ideal(coupling: f64) -> Result<Self> {
        check_coupling(coupling)?;
        Ok(Self { coupling, apparatus_variance: 0.0, ideal: true })
    }

    /// Unit coupling, under which `C = 1 + Δ/σ`.
    pub fn unit_coupling(apparatus_variance: f64) -> Result<Self> {
        Self::new(1.0, apparatus_variance)
    }

    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    pub fn apparatus_variance(&self) -> f64 {
        self.apparatus_variance
    }

    pub fn is_ideal(&self) -> bool {
        self.ideal
    }

    /// Kernel `M(x | p)`. The ideal model has no density.
    pub fn kernel(&self, x: f64, p: f64) -> Result<f64> {
        if self.ideal {
            return Err(Error::IdealLimit);
        }
        let d = x - self.coupling * p;
        let s = self.apparatus_variance;
        Ok((-d * d / (2.0 * s)).exp() / (2.0 * std::f64::consts::PI * s).sqrt())
    }
}

fn check_coupling(coupling: f64) -> Result<()> {
    if coupling == 0.0 || !coupling.is_finite() {
        return Err(invalid("coupling", format!("must be finite and non-zero, got {coupling}")));
    }
    Ok(())
}

/// Mass and temperature of the measured particle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemContext {
    pub mass: f64,
    pub temperature: f64,
}

impl SystemContext {
    pub fn new(mass: f64, temperature: f64) -> Result<Self> {
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(invalid("mass", format!("must be positive, got {mass}")));
        }
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(invalid("temperature", format!("must be positive, got {temperature}")));
        }
        Ok(Self { mass, temperature })
    }

    /// `Δ = m k_B T`.
    pub fn thermal_variance(&self) -> f64 {
        self.mass * self.temperature
    }

    /// Zero-mean thermal momentum distribution.
    pub fn thermal_prior(&self) -> GaussianMoment {
        GaussianMoment { mean: 0.0, variance: self.thermal_variance() }
    }

    /// `Δ/2m`, the mean thermal kinetic energy (= T/2).
    pub fn thermal_energy(&self) -> f64 {
        self.thermal_variance() / (2.0 * self.mass)
    }
}

impl Default for SystemContext {
    fn default() -> Self {
        Self { mass: 1.0, temperature: 1.0 }
    }
}

/// How the control step moved the momentum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ControlKind {
    /// Impulsive shift, variance unchanged.
    Conservative,
    /// Shift convolved with a zero-mean Gaussian of the given variance.
    Noisy { added_variance: f64 },
}

/// Thermodynamic record of one intervention protocol, averaged over outcomes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermoLedger {
    pub context: SystemContext,
    pub control: ControlKind,
    /// `C`; infinite for the ideal limit.
    pub sharpness: f64,
    pub avg_work: f64,
    pub avg_energy_change: f64,
    /// `|ΔŪ| / W̄` from this ledger's own fields.
    pub efficiency: f64,
    /// Efficiency of the conservative protocol at the same `C`, an upper
    /// bound for any noisy control.
    pub efficiency_bound: f64,
    pub entropy_change: f64,
    pub mutual_information: f64,
    pub free_energy_change: f64,
    pub extractable_work_bound: f64,
    pub ideal_limit: bool,
}

impl ThermoLedger {
    /// Ledger of the shift-to-zero protocol on a thermal prior, as a function
    /// of the sharpness alone.
    pub fn conservative(ctx: SystemContext, sharpness: f64) -> Result<Self> {
        check_sharpness(sharpness)?;
        let c = sharpness;
        let scale = ctx.thermal_energy();
        let kt = ctx.temperature;
        let gain = (c - 1.0) / c;

        let avg_work = scale * c / (c - 1.0);
        let avg_energy_change = -scale * gain;
        let mutual_information = mutual_information(c)?;
        let entropy_change = -0.5 * c.ln();
        let free_energy_change = -scale * gain + 0.5 * kt * c.ln();
        Ok(Self {
            context: ctx,
            control: ControlKind::Conservative,
            sharpness: c,
            avg_work,
            avg_energy_change,
            efficiency: avg_energy_change.abs() / avg_work,
            efficiency_bound: gain * gain,
            entropy_change,
            mutual_information,
            free_energy_change,
            extractable_work_bound: -free_energy_change + kt * mutual_information,
            ideal_limit: false,
        })
    }

    /// `C → ∞` limit of [`ThermoLedger::conservative`].
    pub fn ideal(ctx: SystemContext) -> Self {
        let scale = ctx.thermal_energy();
        Self {
            context: ctx,
            control: ControlKind::Conservative,
            sharpness: f64::INFINITY,
            avg_work: scale,
            avg_energy_change: -scale,
            efficiency: 1.0,
            efficiency_bound: 1.0,
            entropy_change: f64::NEG_INFINITY,
            mutual_information: f64::INFINITY,
            free_energy_change: f64::INFINITY,
            extractable_work_bound: scale,
            ideal_limit: true,
        }
    }

    /// Shift-to-zero followed by Gaussian heating of variance
    /// `added_variance`. Work and energy change each gain the heating term
    /// `added_variance/2m`; entropy change is read off the final variance.
    pub fn noisy(ctx: SystemContext, sharpness: f64, added_variance: f64) -> Result<Self> {
        if !(added_variance >= 0.0 && added_variance.is_finite()) {
            return Err(invalid("added_variance", format!("must be non-negative, got {added_variance}")));
        }
        let base = Self::conservative(ctx, sharpness)?;
        let heating = added_variance / (2.0 * ctx.mass);
        let prior = ctx.thermal_variance();
        let final_variance = prior / sharpness + added_variance;

        let avg_work = base.avg_work + heating;
        let avg_energy_change = base.avg_energy_change + heating;
        let entropy_change = 0.5 * (final_variance / prior).ln();
        let free_energy_change = avg_energy_change - ctx.temperature * entropy_change;
        Ok(Self {
            control: ControlKind::Noisy { added_variance },
            avg_work,
            avg_energy_change,
            efficiency: avg_energy_change.abs() / avg_work,
            entropy_change,
            free_energy_change,
            extractable_work_bound: -free_energy_change + ctx.temperature * base.mutual_information,
            ..base
        })
    }
}

fn check_sharpness(c: f64) -> Result<()> {
    if c.is_nan() || c < 1.0 {
        return Err(invalid("sharpness", format!("must be >= 1, got {c}")));
    }
    if c == 1.0 {
        return Err(Error::DegenerateMeasurement { sharpness: c });
    }
    if c.is_infinite() {
        return Err(Error::IdealLimit);
    }
    Ok(())
}

/// `C = 1 + μ²Δ/σ`.
pub fn sharpness(prior: &GaussianMoment, model: &MeasurementModel) -> Result<f64> {
    if model.is_ideal() {
        return Err(Error::IdealLimit);
    }
    let mu = model.coupling();
    Ok(1.0 + mu * mu * prior.variance / model.apparatus_variance())
}

/// Pointer distribution `N(μ p₀, σ + μ²Δ)`.
pub fn outcome_distribution(prior: &GaussianMoment, model: &MeasurementModel) -> GaussianMoment {
    let mu = model.coupling();
    GaussianMoment {
        mean: mu * prior.mean,
        variance: model.apparatus_variance() + mu * mu * prior.variance,
    }
}

/// Posterior momentum distribution given pointer reading `x`.
pub fn conditional_state(prior: &GaussianMoment, model: &MeasurementModel, x: f64) -> Result<GaussianMoment> {
    let c = sharpness(prior, model)?;
    let gain = (c - 1.0) / c;
    Ok(GaussianMoment {
        mean: prior.mean + gain * (x / model.coupling() - prior.mean),
        variance: prior.variance / c,
    })
}

/// Posterior that also covers the ideal limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Posterior {
    Gaussian(GaussianMoment),
    /// Ideal measurement: the momentum is exactly `x/μ`.
    PointMass { momentum: f64 },
}

impl Posterior {
    pub fn mean(&self) -> f64 {
        match self {
            Posterior::Gaussian(g) => g.mean,
            Posterior::PointMass { momentum } => *momentum,
        }
    }
}

pub fn posterior(prior: &GaussianMoment, model: &MeasurementModel, x: f64) -> Posterior {
    match conditional_state(prior, model, x) {
        Ok(g) => Posterior::Gaussian(g),
        Err(_) => Posterior::PointMass { momentum: x / model.coupling() },
    }
}

/// `Ī = ½ ln C`.
pub fn mutual_information(sharpness: f64) -> Result<f64> {
    if sharpness.is_nan() || sharpness < 1.0 {
        return Err(invalid("sharpness", format!("must be >= 1, got {sharpness}")));
    }
    Ok(0.5 * sharpness.ln())
}

pub fn conservative_shift(state: &GaussianMoment, shift: f64) -> GaussianMoment {
    GaussianMoment { mean: state.mean + shift, variance: state.variance }
}

/// Shift followed by convolution with `N(0, added_variance)`.
pub fn noisy_shift(state: &GaussianMoment, shift: f64, added_variance: f64) -> Result<GaussianMoment> {
    if !(added_variance >= 0.0 && added_variance.is_finite()) {
        return Err(invalid("added_variance", format!("must be non-negative, got {added_variance}")));
    }
    Ok(GaussianMoment { mean: state.mean + shift, variance: state.variance + added_variance })
}

/// Energy delivered by a noisy shift of size `shift`: `shift²/2m + added_variance/2m`.
pub fn noisy_shift_energy(ctx: &SystemContext, shift: f64, added_variance: f64) -> f64 {
    (shift * shift + added_variance) / (2.0 * ctx.mass)
}

/// Measure a thermal particle and shift the posterior mean to zero.
pub fn intervene_to_zero(ctx: &SystemContext, model: &MeasurementModel) -> Result<ThermoLedger> {
    if model.is_ideal() {
        return Ok(ThermoLedger::ideal(*ctx));
    }
    let c = sharpness(&ctx.thermal_prior(), model)?;
    ThermoLedger::conservative(*ctx, c)
}

/// Two protocols that leave a thermal particle in the same final state
/// `N(0, Δ_target)`: a measurement that contracts the variance to the target
/// followed by a conservative shift, and a sharper measurement to
/// `Δ_target − noise` followed by a noisy shift that adds `noise` back.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquivalentPair {
    pub sigma_conservative: f64,
    pub sigma_noisy: f64,
    pub conservative: ThermoLedger,
    pub noisy: ThermoLedger,
    pub final_conservative: GaussianMoment,
    pub final_noisy: GaussianMoment,
}

impl EquivalentPair {
    pub fn model_conservative(&self) -> MeasurementModel {
        MeasurementModel { coupling: 1.0, apparatus_variance: self.sigma_conservative, ideal: false }
    }

    pub fn model_noisy(&self) -> MeasurementModel {
        MeasurementModel { coupling: 1.0, apparatus_variance: self.sigma_noisy, ideal: false }
    }
}

pub fn equivalent_pair(ctx: &SystemContext, target_variance: f64, noise: f64) -> Result<EquivalentPair> {
    let thermal = ctx.thermal_variance();
    if !(noise > 0.0 && noise < target_variance) {
        return Err(invalid("noise", format!("need 0 < noise < target_variance, got {noise}")));
    }
    if target_variance >= thermal {
        return Err(invalid(
            "target_variance",
            format!("must be below the thermal variance m·T = {thermal} (σ would be negative), got {target_variance}"),
        ));
    }
    let sigma_conservative = 1.0 / (1.0 / target_variance - 1.0 / thermal);
    let sigma_noisy = 1.0 / (1.0 / (target_variance - noise) - 1.0 / thermal);

    let prior = ctx.thermal_prior();
    let m1 = MeasurementModel::unit_coupling(sigma_conservative)?;
    let m2 = MeasurementModel::unit_coupling(sigma_noisy)?;
    let c1 = sharpness(&prior, &m1)?;
    let c2 = sharpness(&prior, &m2)?;

    // Every outcome's posterior is shifted to mean zero, so the unconditional
    // final state is the (outcome-independent) posterior variance, recentred.
    let post1 = conditional_state(&prior, &m1, 0.0)?;
    let post2 = conditional_state(&prior, &m2, 0.0)?;
    let final_conservative = conservative_shift(&post1, -post1.mean);
    let final_noisy = noisy_shift(&post2, -post2.mean, noise)?;

    Ok(EquivalentPair {
        sigma_conservative,
        sigma_noisy,
        conservative: ThermoLedger::conservative(*ctx, c1)?,
        noisy: ThermoLedger::noisy(*ctx, c2, noise)?,
        final_conservative,
        final_noisy,
    })
}
