use serde::{Deserialize, Serialize};

use super::space::{max_abs, CMatrix, OperatorMatrix};
use super::state::DensityMatrix;
use crate::error::{Error, Result};

const COMPLETENESS_TOLERANCE: f64 = 1e-10;

/// Completely positive trace-preserving map in Kraus form.
#[derive(Debug, Clone)]
pub struct Channel {
    kraus: Vec<CMatrix>,
}

impl Channel {
    pub fn new(kraus: Vec<CMatrix>) -> Result<Self> {
        let deviation = completeness_deviation(kraus.iter())?;
        if deviation >= COMPLETENESS_TOLERANCE {
            return Err(Error::NotTracePreserving { deviation });
        }
        Ok(Self { kraus })
    }

    pub fn identity(dim: usize) -> Self {
        Self { kraus: vec![CMatrix::identity(dim, dim)] }
    }

    /// Conjugation by a unitary.
    pub fn unitary(u: &OperatorMatrix) -> Result<Self> {
        Self::new(vec![u.entries().clone()])
    }

    pub fn dim(&self) -> usize {
        self.kraus[0].nrows()
    }

    pub fn apply(&self, rho: &DensityMatrix) -> DensityMatrix {
        let out = self.kraus.iter().map(|k| k * rho.entries() * k.adjoint()).fold(
            CMatrix::zeros(rho.dim(), rho.dim()),
            |acc, m| acc + m,
        );
        DensityMatrix::from_raw(out)
    }
}

fn completeness_deviation<'a>(ops: impl Iterator<Item = &'a CMatrix>) -> Result<f64> {
    let mut sum: Option<CMatrix> = None;
    for k in ops {
        if !k.is_square() {
            return Err(Error::InvalidOperator("Kraus operator is not square".into()));
        }
        let term = k.adjoint() * k;
        sum = Some(match sum {
            None => term,
            Some(s) if s.shape() == term.shape() => s + term,
            Some(_) => return Err(Error::InvalidOperator("Kraus operators differ in dimension".into())),
        });
    }
    let sum = sum.ok_or_else(|| Error::InvalidOperator("empty Kraus set".into()))?;
    let n = sum.nrows();
    Ok(max_abs(&(sum - CMatrix::identity(n, n))))
}

/// Outcome statistics and post-control states of an intervention.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Intervention {
    pub probabilities: Vec<f64>,
    /// `None` where the outcome has negligible probability.
    pub conditional: Vec<Option<DensityMatrix>>,
    pub unconditional: DensityMatrix,
}

/// Measure with Kraus operators `M_x`, then apply `channels[x]`:
/// `P(x) = Tr[M_x†M_x ρ]`, `ρ|x = C_x(M_x ρ M_x†) / P(x)`.
pub fn cptp_intervention(rho: &DensityMatrix, measurement: &[OperatorMatrix], channels: &[Channel]) -> Result<Intervention> {
    if measurement.len() != channels.len() {
        return Err(Error::InvalidOperator(format!(
            "{} measurement operators but {} channels",
            measurement.len(),
            channels.len()
        )));
    }
    let deviation = completeness_deviation(measurement.iter().map(|m| m.entries()))?;
    if deviation >= COMPLETENESS_TOLERANCE {
        return Err(Error::NotTracePreserving { deviation });
    }
    let n = rho.dim();
    if measurement[0].dim() != n || channels.iter().any(|c| c.dim() != n) {
        return Err(Error::InvalidState(format!("operators do not act on a {n}-level space")));
    }
    let mut probabilities = Vec::with_capacity(measurement.len());
    let mut conditional = Vec::with_capacity(measurement.len());
    let mut total = CMatrix::zeros(n, n);
    for (m, ch) in measurement.iter().zip(channels) {
        let k = m.entries();
        let branch = DensityMatrix::from_raw(k * rho.entries() * k.adjoint());
        let after = ch.apply(&branch);
        let p = branch.trace().re;
        total += after.entries();
        probabilities.push(p);
        conditional.push((p > super::measurement::MIN_PROBABILITY).then(|| {
            DensityMatrix::from_raw(after.entries() / super::space::c(p))
        }));
    }
    Ok(Intervention { probabilities, conditional, unconditional: DensityMatrix::from_raw(total) })
}
