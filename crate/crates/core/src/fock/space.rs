use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub type CMatrix = DMatrix<Complex64>;

pub(crate) fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Ground-state position variance in units `ħ = m = ω = 1`.
pub const GROUND_VARIANCE: f64 = 0.5;

/// Number basis `|0⟩ … |N−1⟩` of a harmonic oscillator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FockSpace {
    dim: usize,
    frequency: f64,
}

impl FockSpace {
    pub fn new(dim: usize) -> Result<Self> {
        Self::with_frequency(dim, 1.0)
    }

    pub fn with_frequency(dim: usize, frequency: f64) -> Result<Self> {
        if dim < 16 {
            return Err(invalid("dim", format!("need at least 16 levels, got {dim}")));
        }
        if !(frequency > 0.0 && frequency.is_finite()) {
            return Err(invalid("frequency", format!("must be positive, got {frequency}")));
        }
        Ok(Self { dim, frequency })
    }

    /// Smallest power of two, at least 64, that admits a thermal state of
    /// mean occupation `nbar` with the top levels below the leakage limit.
    pub fn for_thermal(nbar: f64) -> Result<Self> {
        if !(nbar >= 0.0 && nbar.is_finite()) {
            return Err(invalid("nbar", format!("must be non-negative, got {nbar}")));
        }
        let mut dim = 64;
        loop {
            let r = nbar / (nbar + 1.0);
            let top = r.powi((dim - guard_levels(dim)) as i32);
            if nbar <= dim as f64 / 10.0 && top < super::LEAKAGE_LIMIT {
                return Self::new(dim);
            }
            dim *= 2;
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn frequency(&self) -> f64 {
        self.frequency
    }

    /// Number of top levels whose population must stay negligible.
    pub fn guard_levels(&self) -> usize {
        guard_levels(self.dim)
    }

    /// Highest level index for which claims are made.
    pub fn interior(&self) -> usize {
        self.dim - self.guard_levels()
    }
}

pub(crate) fn guard_levels(dim: usize) -> usize {
    dim.div_ceil(8)
}

/// Complex matrix on a Fock space, optionally tagged Hermitian.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    entries: CMatrix,
    hermitian: bool,
}

const HERMITIAN_TOLERANCE: f64 = 1e-12;

impl OperatorMatrix {
    pub fn new(entries: CMatrix, hermitian: bool) -> Result<Self> {
        if !entries.is_square() {
            return Err(Error::InvalidOperator(format!("{}x{} is not square", entries.nrows(), entries.ncols())));
        }
        if hermitian {
            let dev = hermitian_deviation(&entries);
            if dev >= HERMITIAN_TOLERANCE {
                return Err(Error::InvalidOperator(format!("flagged Hermitian but |A − A†| = {dev:.3e}")));
            }
        }
        Ok(Self { entries, hermitian })
    }

    pub(crate) fn from_raw(entries: CMatrix, hermitian: bool) -> Self {
        Self { entries, hermitian }
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn adjoint(&self) -> OperatorMatrix {
        Self { entries: self.entries.adjoint(), hermitian: self.hermitian }
    }
}

pub(crate) fn hermitian_deviation(m: &CMatrix) -> f64 {
    (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub(crate) fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Ladder, quadrature, number and parity operators.
#[derive(Debug, Clone)]
pub struct Operators {
    pub a: OperatorMatrix,
    pub a_dag: OperatorMatrix,
    /// `q = √Δ₀ (a + a†)`.
    pub q: OperatorMatrix,
    /// `p = i (a† − a) / (2√Δ₀)`.
    pub p: OperatorMatrix,
    pub n: OperatorMatrix,
    /// `exp(−iπ a†a)`, diagonal `(−1)ⁿ`.
    pub parity: OperatorMatrix,
}

pub fn build_operators(space: &FockSpace) -> Operators {
    let n = space.dim;
    let a = CMatrix::from_fn(n, n, |i, j| if j == i + 1 { c((j as f64).sqrt()) } else { c(0.0) });
    let a_dag = a.adjoint();
    let s = GROUND_VARIANCE.sqrt();
    let q = (&a + &a_dag) * c(s);
    let p = (&a_dag - &a) * Complex64::new(0.0, 0.5 / s);
    let num = CMatrix::from_fn(n, n, |i, j| if i == j { c(i as f64) } else { c(0.0) });
    let parity = CMatrix::from_fn(n, n, |i, j| if i != j { c(0.0) } else if i % 2 == 0 { c(1.0) } else { c(-1.0) });
    Operators {
        a: OperatorMatrix::from_raw(a, false),
        a_dag: OperatorMatrix::from_raw(a_dag, false),
        q: OperatorMatrix::from_raw(q, true),
        p: OperatorMatrix::from_raw(p, true),
        n: OperatorMatrix::from_raw(num, true),
        parity: OperatorMatrix::from_raw(parity, true),
    }
}

/// `f(A)` for Hermitian `A` by eigendecomposition.
pub(crate) fn real_symmetric_function(a: &DMatrix<f64>, f: impl Fn(f64) -> Complex64) -> CMatrix {
    let eig = a.clone().symmetric_eigen();
    let v = eig.eigenvectors.map(c);
    let d = CMatrix::from_diagonal(&eig.eigenvalues.map(f));
    &v * d * v.transpose()
}

pub(crate) fn real_part(m: &CMatrix) -> DMatrix<f64> {
    m.map(|z| z.re)
}
