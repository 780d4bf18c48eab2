use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::space::{build_operators, c, max_abs, real_part, real_symmetric_function, CMatrix, FockSpace, OperatorMatrix, GROUND_VARIANCE};
use super::state::{trace_product, DensityMatrix};
use crate::error::{invalid, Error, Result};

/// Outcome probabilities below this are treated as impossible.
pub const MIN_PROBABILITY: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Plus,
    Minus,
}

impl Outcome {
    pub const BOTH: [Outcome; 2] = [Outcome::Plus, Outcome::Minus];

    pub fn sign(self) -> f64 {
        match self {
            Outcome::Plus => 1.0,
            Outcome::Minus => -1.0,
        }
    }
}

/// Binary measurement of the sign of the displacement, smoothed over a
/// length `λ`:
///
/// ```text
/// U  = (q − iλ) / √(λ² + q²)
/// M± = (1 ± U) / 2
/// E± = M±†M± = ½ [1 ± q / √(λ² + q²)]
/// ```
#[derive(Debug, Clone)]
pub struct MeasurementPair {
    space: FockSpace,
    lambda: f64,
    m_plus: OperatorMatrix,
    m_minus: OperatorMatrix,
    unitary: OperatorMatrix,
    e_plus: OperatorMatrix,
    e_minus: OperatorMatrix,
}

impl MeasurementPair {
    pub fn build(space: &FockSpace, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(invalid("lambda", format!("must be positive and finite, got {lambda}")));
        }
        let ops = build_operators(space);
        let q = real_part(ops.q.entries());
        let l2 = lambda * lambda;
        let u = real_symmetric_function(&q, |w| Complex64::new(w, -lambda) / (l2 + w * w).sqrt());
        let ratio = real_symmetric_function(&q, |w| c(w / (l2 + w * w).sqrt()));
        let id = CMatrix::identity(space.dim(), space.dim());
        let half = c(0.5);
        let m_plus = (&id + &u) * half;
        let m_minus = (&id - &u) * half;
        let e_plus = (&id + &ratio) * half;
        let e_minus = (&id - &ratio) * half;
        Ok(Self {
            space: *space,
            lambda,
            m_plus: OperatorMatrix::from_raw(m_plus, false),
            m_minus: OperatorMatrix::from_raw(m_minus, false),
            unitary: OperatorMatrix::from_raw(u, false),
            e_plus: OperatorMatrix::from_raw(e_plus, true),
            e_minus: OperatorMatrix::from_raw(e_minus, true),
        })
    }

    pub fn space(&self) -> &FockSpace {
        &self.space
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `μ = λ/√Δ₀`.
    pub fn mu(&self) -> f64 {
        self.lambda / GROUND_VARIANCE.sqrt()
    }

    pub fn kraus(&self, o: Outcome) -> &OperatorMatrix {
        match o {
            Outcome::Plus => &self.m_plus,
            Outcome::Minus => &self.m_minus,
        }
    }

    pub fn effect(&self, o: Outcome) -> &OperatorMatrix {
        match o {
            Outcome::Plus => &self.e_plus,
            Outcome::Minus => &self.e_minus,
        }
    }

    pub fn unitary(&self) -> &OperatorMatrix {
        &self.unitary
    }

    /// `max |M₊†M₊ + M₋†M₋ − 1|`.
    pub fn completeness_error(&self) -> f64 {
        let (p, m) = (self.m_plus.entries(), self.m_minus.entries());
        let sum = p.adjoint() * p + m.adjoint() * m;
        max_abs(&(sum - CMatrix::identity(self.space.dim(), self.space.dim())))
    }

    /// `max |M±†M± − E±|` over both outcomes.
    pub fn effect_error(&self) -> f64 {
        Outcome::BOTH
            .iter()
            .map(|o| {
                let k = self.kraus(*o).entries();
                max_abs(&(k.adjoint() * k - self.effect(*o).entries()))
            })
            .fold(0.0, f64::max)
    }

    /// `max |U†U − 1|`.
    pub fn unitarity_error(&self) -> f64 {
        let u = self.unitary.entries();
        max_abs(&(u.adjoint() * u - CMatrix::identity(self.space.dim(), self.space.dim())))
    }

    pub fn probability(&self, rho: &DensityMatrix, o: Outcome) -> f64 {
        trace_product(self.effect(o).entries(), rho.entries()).re
    }

    fn check_level(&self, n: usize) -> Result<()> {
        if n >= self.space.interior() {
            return Err(Error::Precondition(format!(
                "level {n} is within the top {} guard levels of a {}-level space",
                self.space.guard_levels(),
                self.space.dim()
            )));
        }
        Ok(())
    }

    /// `|ψ_n⟩ = 2M₊|n⟩ − |n⟩ = U|n⟩`.
    pub fn psi_state(&self, n: usize) -> Result<DVector<Complex64>> {
        self.check_level(n)?;
        Ok(self.unitary.entries().column(n).into_owned())
    }

    /// `|φ_n^±⟩ = √2 M±|n⟩`, unit norm because `⟨n|E±|n⟩ = ½`.
    pub fn phi_state(&self, n: usize, o: Outcome) -> Result<DVector<Complex64>> {
        self.check_level(n)?;
        Ok(self.kraus(o).entries().column(n) * c(std::f64::consts::SQRT_2))
    }

    /// `g_n = ⟨n|[μ² + (a + a†)²]^{-1/2}|n⟩`.
    pub fn overlap_g(&self, n: usize) -> Result<f64> {
        self.check_level(n)?;
        let x = real_part(build_operators(&self.space).q.entries()) / GROUND_VARIANCE.sqrt();
        let mu2 = self.mu() * self.mu();
        let f = real_symmetric_function(&x, |w| c(1.0 / (mu2 + w * w).sqrt()));
        Ok(f[(n, n)].re)
    }

    /// `⟨φ_m^+|φ_n^+⟩` from the state vectors.
    pub fn phi_overlap(&self, m: usize, n: usize) -> Result<Complex64> {
        Ok(self.phi_state(m, Outcome::Plus)?.dotc(&self.phi_state(n, Outcome::Plus)?))
    }

    /// `⟨m|X [μ² + X²]^{-1/2}|n⟩` with `X = a + a†`; equals
    /// `⟨φ_m^+|φ_n^+⟩ − δ_mn`.
    pub fn position_ratio_element(&self, m: usize, n: usize) -> Result<f64> {
        self.check_level(m)?;
        self.check_level(n)?;
        let x = real_part(build_operators(&self.space).q.entries()) / GROUND_VARIANCE.sqrt();
        let mu2 = self.mu() * self.mu();
        let f = real_symmetric_function(&x, |w| c(w / (mu2 + w * w).sqrt()));
        Ok(f[(m, n)].re)
    }
}

/// Conditional state `MρM†/P` and its probability `P = Tr[E ρ]`.
pub fn measure(rho: &DensityMatrix, pair: &MeasurementPair, o: Outcome) -> Result<(DensityMatrix, f64)> {
    check_dims(rho, pair)?;
    rho.check_truncation()?;
    let p = pair.probability(rho, o);
    if p <= MIN_PROBABILITY {
        return Err(Error::NegligibleOutcome { probability: p });
    }
    let k = pair.kraus(o).entries();
    let post = k * rho.entries() * k.adjoint() / c(p);
    Ok((DensityMatrix::from_raw(post), p))
}

/// `M₊ρM₊† + M₋ρM₋†`.
pub fn unconditional(rho: &DensityMatrix, pair: &MeasurementPair) -> Result<DensityMatrix> {
    check_dims(rho, pair)?;
    rho.check_truncation()?;
    Ok(DensityMatrix::from_raw(unconditional_raw(rho, pair)))
}

pub(crate) fn unconditional_raw(rho: &DensityMatrix, pair: &MeasurementPair) -> CMatrix {
    let (p, m) = (pair.m_plus.entries(), pair.m_minus.entries());
    p * rho.entries() * p.adjoint() + m * rho.entries() * m.adjoint()
}

pub(crate) fn check_dims(rho: &DensityMatrix, pair: &MeasurementPair) -> Result<()> {
    if rho.dim() != pair.space.dim() {
        return Err(Error::InvalidState(format!(
            "state has {} levels, measurement has {}",
            rho.dim(),
            pair.space.dim()
        )));
    }
    Ok(())
}
