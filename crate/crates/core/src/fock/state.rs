use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::space::{c, hermitian_deviation, CMatrix, FockSpace, OperatorMatrix};
use crate::error::{invalid, Error, Result};

const TRACE_TOLERANCE: f64 = 1e-10;
const POSITIVITY_TOLERANCE: f64 = 1e-10;
pub const LEAKAGE_LIMIT: f64 = 1e-8;

/// Trace-one positive operator on a truncated Fock space.
///
/// Serialized as separate real and imaginary component arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DensityRepr", into = "DensityRepr")]
pub struct DensityMatrix {
    entries: CMatrix,
}

#[derive(Serialize, Deserialize)]
struct DensityRepr {
    dim: usize,
    real: Vec<Vec<f64>>,
    imag: Vec<Vec<f64>>,
}

impl From<DensityMatrix> for DensityRepr {
    fn from(d: DensityMatrix) -> Self {
        let n = d.dim();
        let rows = |f: fn(&Complex64) -> f64| (0..n).map(|i| (0..n).map(|j| f(&d.entries[(i, j)])).collect()).collect();
        Self { dim: n, real: rows(|z| z.re), imag: rows(|z| z.im) }
    }
}

impl TryFrom<DensityRepr> for DensityMatrix {
    type Error = Error;

    fn try_from(r: DensityRepr) -> Result<Self> {
        let n = r.dim;
        let ok = r.real.len() == n && r.imag.len() == n && r.real.iter().chain(&r.imag).all(|row| row.len() == n);
        if !ok {
            return Err(Error::InvalidState(format!("component arrays are not {n}x{n}")));
        }
        Self::new(CMatrix::from_fn(n, n, |i, j| Complex64::new(r.real[i][j], r.imag[i][j])))
    }
}

impl DensityMatrix {
    /// Validates trace, hermiticity and positivity.
    pub fn new(entries: CMatrix) -> Result<Self> {
        if !entries.is_square() {
            return Err(Error::InvalidState("matrix is not square".into()));
        }
        let tr = entries.trace();
        if (tr.re - 1.0).abs() > TRACE_TOLERANCE || tr.im.abs() > TRACE_TOLERANCE {
            return Err(Error::InvalidState(format!("trace is {tr}, expected 1")));
        }
        let dev = hermitian_deviation(&entries);
        if dev > TRACE_TOLERANCE {
            return Err(Error::InvalidState(format!("not Hermitian: |ρ − ρ†| = {dev:.3e}")));
        }
        let d = Self { entries };
        let min = d.eigenvalues().min();
        if min < -POSITIVITY_TOLERANCE {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:.3e}")));
        }
        Ok(d)
    }

    pub(crate) fn from_raw(entries: CMatrix) -> Self {
        Self { entries }
    }

    pub fn pure(state: &DVector<Complex64>) -> Result<Self> {
        let norm = state.norm();
        if !(norm > 0.0) {
            return Err(Error::InvalidState("zero state vector".into()));
        }
        let v = state / c(norm);
        Ok(Self { entries: &v * v.adjoint() })
    }

    pub fn number_state(space: &FockSpace, n: usize) -> Result<Self> {
        if n >= space.dim() {
            return Err(invalid("n", format!("level {n} outside a {}-level space", space.dim())));
        }
        Self::from_populations(&basis_populations(space.dim(), n))
    }

    /// Diagonal state with the given populations (renormalized).
    pub fn from_populations(p: &[f64]) -> Result<Self> {
        if p.iter().any(|x| !(*x >= 0.0 && x.is_finite())) {
            return Err(Error::InvalidState("populations must be finite and non-negative".into()));
        }
        let total: f64 = p.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidState("populations sum to zero".into()));
        }
        let d = DVector::from_iterator(p.len(), p.iter().map(|x| c(x / total)));
        Ok(Self { entries: CMatrix::from_diagonal(&d) })
    }

    /// Thermal state with mean occupation `nbar`, truncated to the space and
    /// renormalized. Requires `nbar ≤ N/10`.
    pub fn thermal(space: &FockSpace, nbar: f64) -> Result<Self> {
        Self::from_populations(&thermal_populations(space, nbar)?)
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn trace(&self) -> Complex64 {
        self.entries.trace()
    }

    /// `Tr[Aρ]`, real part.
    pub fn expectation(&self, op: &OperatorMatrix) -> f64 {
        trace_product(op.entries(), &self.entries).re
    }

    pub fn populations(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.entries[(i, i)].re).collect()
    }

    /// Mean occupation `Tr[a†a ρ]`.
    pub fn mean_number(&self) -> f64 {
        self.populations().iter().enumerate().map(|(n, p)| n as f64 * p).sum()
    }

    pub fn eigenvalues(&self) -> DVector<f64> {
        self.entries.clone().symmetric_eigen().eigenvalues
    }

    /// Von Neumann entropy in nats.
    pub fn entropy(&self) -> f64 {
        self.eigenvalues().iter().filter(|x| **x > 1e-300).map(|x| -x * x.ln()).sum()
    }

    /// Population in the top `levels` levels.
    pub fn top_population(&self, levels: usize) -> f64 {
        let p = self.populations();
        p[p.len().saturating_sub(levels)..].iter().sum()
    }

    /// Fails if the guard levels hold more than [`LEAKAGE_LIMIT`].
    pub fn check_truncation(&self) -> Result<()> {
        let levels = super::space::guard_levels(self.dim());
        let population = self.top_population(levels);
        if population >= LEAKAGE_LIMIT {
            return Err(Error::TruncationLeakage { population, levels });
        }
        Ok(())
    }

    /// Embed into a larger space by zero padding.
    pub fn padded(&self, dim: usize) -> Result<Self> {
        if dim < self.dim() {
            return Err(invalid("dim", format!("cannot pad {} levels down to {dim}", self.dim())));
        }
        let mut m = CMatrix::zeros(dim, dim);
        m.view_mut((0, 0), (self.dim(), self.dim())).copy_from(&self.entries);
        Ok(Self { entries: m })
    }

    pub fn max_abs_difference(&self, other: &DensityMatrix) -> f64 {
        super::space::max_abs(&(&self.entries - &other.entries))
    }
}

pub(crate) fn trace_product(a: &CMatrix, b: &CMatrix) -> Complex64 {
    // Tr[AB] = Σ_ij A_ij B_ji
    let n = a.nrows();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

fn basis_populations(dim: usize, n: usize) -> Vec<f64> {
    let mut p = vec![0.0; dim];
    p[n] = 1.0;
    p
}

/// Truncated, renormalized geometric populations.
pub fn thermal_populations(space: &FockSpace, nbar: f64) -> Result<Vec<f64>> {
    if !(nbar >= 0.0 && nbar.is_finite()) {
        return Err(invalid("nbar", format!("must be non-negative, got {nbar}")));
    }
    if nbar > space.dim() as f64 / 10.0 {
        return Err(invalid(
            "nbar",
            format!("{nbar} exceeds N/10 = {} for a {}-level space", space.dim() as f64 / 10.0, space.dim()),
        ));
    }
    let r = nbar / (nbar + 1.0);
    let raw: Vec<f64> = (0..space.dim()).map(|n| r.powi(n as i32)).collect();
    let total: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|x| x / total).collect())
}

/// Shannon entropy in nats.
pub fn shannon_entropy(p: &[f64]) -> f64 {
    p.iter().filter(|x| **x > 0.0).map(|x| -x * x.ln()).sum()
}
