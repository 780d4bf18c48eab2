//! Three-mode Gaussian model of a momentum-exchanging collision.
//!
//! Two particles `a`, `b` interact through an auxiliary mode `c` with
//! quadratures `(Q, P)`:
//!
//! ```text
//! U = exp[ i Q (p_b − p_a) ]      V = exp[ −i P (q_b − q_a) ]
//! ```
//!
//! Both generators are quadratic, so the collision `VU` acts linearly on the
//! quadratures and exactly on first and second moments.
//!
//! Conventions: quadrature order `(q_a, p_a, q_b, p_b, Q, P)`, `ħ = 1`,
//! `[q, p] = i`, vacuum covariance `I/2`, symplectic form
//! `Ω = ⊕ [[0, 1], [−1, 0]]`. A covariance is physical iff every symplectic
//! eigenvalue is at least `1/2`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

const SYMMETRY_TOLERANCE: f64 = 1e-12;
const PHYSICALITY_TOLERANCE: f64 = 1e-10;
const SYMPLECTIC_TOLERANCE: f64 = 1e-12;

pub const MODE_A: usize = 0;
pub const MODE_B: usize = 1;
pub const MODE_AUX: usize = 2;

/// Mean and covariance `σ_ij = ½⟨{ΔX_i, ΔX_j}⟩` of a Gaussian state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StateRepr", into = "StateRepr")]
pub struct CovarianceState {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
}

#[derive(Serialize, Deserialize)]
struct StateRepr {
    mean: Vec<f64>,
    covariance: Vec<Vec<f64>>,
}

impl From<CovarianceState> for StateRepr {
    fn from(s: CovarianceState) -> Self {
        let n = s.mean.len();
        Self {
            mean: s.mean.iter().copied().collect(),
            covariance: (0..n).map(|i| (0..n).map(|j| s.covariance[(i, j)]).collect()).collect(),
        }
    }
}

impl TryFrom<StateRepr> for CovarianceState {
    type Error = Error;

    fn try_from(r: StateRepr) -> Result<Self> {
        let n = r.mean.len();
        if r.covariance.len() != n || r.covariance.iter().any(|row| row.len() != n) {
            return Err(invalid("covariance", format!("must be {n}x{n}")));
        }
        Self::new(DVector::from_vec(r.mean), DMatrix::from_fn(n, n, |i, j| r.covariance[i][j]))
    }
}

impl CovarianceState {
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let n = mean.len();
        if n == 0 || n % 2 != 0 || covariance.shape() != (n, n) {
            return Err(invalid("covariance", format!("need 2k quadratures and a matching square matrix, got {n}")));
        }
        let asym = (&covariance - covariance.transpose()).amax();
        if asym > SYMMETRY_TOLERANCE {
            return Err(invalid("covariance", format!("not symmetric: max |σ − σᵀ| = {asym:.3e}")));
        }
        let s = Self { mean, covariance };
        let min = s.min_symplectic_eigenvalue();
        if !(min >= 0.5 - PHYSICALITY_TOLERANCE) {
            return Err(Error::Unphysical { min_eigenvalue: min });
        }
        Ok(s)
    }

    pub fn vacuum(modes: usize) -> Self {
        Self { mean: DVector::zeros(2 * modes), covariance: DMatrix::identity(2 * modes, 2 * modes) * 0.5 }
    }

    /// Single mode with diagonal covariance; needs `q_var · p_var ≥ 1/4`.
    pub fn single_mode(q_mean: f64, p_mean: f64, q_var: f64, p_var: f64) -> Result<Self> {
        Self::new(DVector::from_vec(vec![q_mean, p_mean]), DMatrix::from_row_slice(2, 2, &[q_var, 0.0, 0.0, p_var]))
    }

    pub fn coherent(q_mean: f64, p_mean: f64) -> Self {
        Self { mean: DVector::from_vec(vec![q_mean, p_mean]), covariance: DMatrix::identity(2, 2) * 0.5 }
    }

    pub fn thermal(nbar: f64) -> Result<Self> {
        if !(nbar >= 0.0 && nbar.is_finite()) {
            return Err(invalid("nbar", format!("must be non-negative, got {nbar}")));
        }
        let v = nbar + 0.5;
        Self::single_mode(0.0, 0.0, v, v)
    }

    /// Minimum-uncertainty state with momentum variance `p_var`, position
    /// variance `1/(4 p_var)`. Small `p_var` approaches a momentum
    /// eigenstate.
    pub fn momentum_squeezed(p_var: f64) -> Result<Self> {
        if !(p_var > 0.0 && p_var.is_finite()) {
            return Err(invalid("p_var", format!("must be positive, got {p_var}")));
        }
        Ok(Self {
            mean: DVector::zeros(2),
            covariance: DMatrix::from_row_slice(2, 2, &[0.25 / p_var, 0.0, 0.0, p_var]),
        })
    }

    /// Tensor product, modes in the given order.
    pub fn product(parts: &[&CovarianceState]) -> Self {
        let n: usize = parts.iter().map(|p| p.mean.len()).sum();
        let mut mean = DVector::zeros(n);
        let mut cov = DMatrix::zeros(n, n);
        let mut at = 0;
        for p in parts {
            let k = p.mean.len();
            mean.rows_mut(at, k).copy_from(&p.mean);
            cov.view_mut((at, at), (k, k)).copy_from(&p.covariance);
            at += k;
        }
        Self { mean, covariance: cov }
    }

    /// Standard collision input: particles `a`, `b` and a momentum-squeezed
    /// auxiliary mode.
    pub fn collision_input(a: &CovarianceState, b: &CovarianceState, aux_p_variance: f64) -> Result<Self> {
        if a.modes() != 1 || b.modes() != 1 {
            return Err(invalid("inputs", "particles must be single-mode states"));
        }
        Ok(Self::product(&[a, b, &Self::momentum_squeezed(aux_p_variance)?]))
    }

    pub fn modes(&self) -> usize {
        self.mean.len() / 2
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    /// Marginal state of the listed modes, in the listed order.
    pub fn reduced(&self, modes: &[usize]) -> Result<Self> {
        let idx = quadrature_indices(modes, self.modes())?;
        let k = idx.len();
        Ok(Self {
            mean: DVector::from_fn(k, |i, _| self.mean[idx[i]]),
            covariance: DMatrix::from_fn(k, k, |i, j| self.covariance[(idx[i], idx[j])]),
        })
    }

    pub fn symplectic_eigenvalues(&self) -> Vec<f64> {
        symplectic_eigenvalues(&self.covariance)
    }

    pub fn min_symplectic_eigenvalue(&self) -> f64 {
        self.symplectic_eigenvalues().into_iter().fold(f64::INFINITY, f64::min)
    }

    /// Momentum sign flip on `modes`: the phase-space form of a partial
    /// transpose. The result need not be a physical state.
    pub fn partial_transpose(&self, modes: &[usize]) -> Result<DMatrix<f64>> {
        let flip = momentum_flip(modes, self.modes())?;
        Ok(&flip * &self.covariance * &flip)
    }
}

fn quadrature_indices(modes: &[usize], total: usize) -> Result<Vec<usize>> {
    let mut idx = Vec::with_capacity(2 * modes.len());
    for &m in modes {
        if m >= total {
            return Err(invalid("modes", format!("mode {m} out of range for {total} modes")));
        }
        idx.extend([2 * m, 2 * m + 1]);
    }
    Ok(idx)
}

fn momentum_flip(modes: &[usize], total: usize) -> Result<DMatrix<f64>> {
    let mut flip = DMatrix::identity(2 * total, 2 * total);
    for i in quadrature_indices(modes, total)?.into_iter().skip(1).step_by(2) {
        flip[(i, i)] = -1.0;
    }
    Ok(flip)
}

pub fn symplectic_form(modes: usize) -> DMatrix<f64> {
    let mut w = DMatrix::zeros(2 * modes, 2 * modes);
    for k in 0..modes {
        w[(2 * k, 2 * k + 1)] = 1.0;
        w[(2 * k + 1, 2 * k)] = -1.0;
    }
    w
}

/// Symplectic eigenvalues of a positive-definite covariance, ascending.
///
/// With `A = σ^{1/2} Ω σ^{1/2}` antisymmetric, `AᵀA` has each `ν_k²` twice.
pub fn symplectic_eigenvalues(cov: &DMatrix<f64>) -> Vec<f64> {
    let n = cov.nrows();
    let eig = cov.clone().symmetric_eigen();
    let root = &eig.eigenvectors
        * DMatrix::from_diagonal(&eig.eigenvalues.map(|x| x.max(0.0).sqrt()))
        * eig.eigenvectors.transpose();
    let a = &root * symplectic_form(n / 2) * &root;
    let mut sq: Vec<f64> = (a.transpose() * &a).symmetric_eigen().eigenvalues.iter().copied().collect();
    sq.sort_by(|x, y| x.total_cmp(y));
    sq.into_iter().step_by(2).map(|x| x.max(0.0).sqrt()).collect()
}

/// Affine symplectic map `x → S x + d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymplecticMap {
    matrix: DMatrix<f64>,
    displacement: DVector<f64>,
}

impl SymplecticMap {
    pub fn new(matrix: DMatrix<f64>, displacement: DVector<f64>) -> Result<Self> {
        let n = matrix.nrows();
        if n % 2 != 0 || !matrix.is_square() || displacement.len() != n {
            return Err(invalid("matrix", "need a 2k×2k matrix and a 2k displacement"));
        }
        let deviation = symplectic_deviation(&matrix);
        if deviation > SYMPLECTIC_TOLERANCE {
            return Err(Error::NotSymplectic { deviation });
        }
        Ok(Self { matrix, displacement })
    }

    pub fn linear(matrix: DMatrix<f64>) -> Result<Self> {
        let n = matrix.nrows();
        Self::new(matrix, DVector::zeros(n))
    }

    pub fn identity(modes: usize) -> Self {
        Self { matrix: DMatrix::identity(2 * modes, 2 * modes), displacement: DVector::zeros(2 * modes) }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn displacement(&self) -> &DVector<f64> {
        &self.displacement
    }

    /// `self ∘ first`: apply `first`, then `self`.
    pub fn compose(&self, first: &SymplecticMap) -> SymplecticMap {
        SymplecticMap {
            matrix: &self.matrix * &first.matrix,
            displacement: &self.matrix * &first.displacement + &self.displacement,
        }
    }

    /// `max |SΩSᵀ − Ω|`.
    pub fn deviation(&self) -> f64 {
        symplectic_deviation(&self.matrix)
    }
}

fn symplectic_deviation(s: &DMatrix<f64>) -> f64 {
    let w = symplectic_form(s.nrows() / 2);
    (s * &w * s.transpose() - w).amax()
}

/// Heisenberg maps of `U`, `V` and the collision `VU`.
///
/// `U` shifts `q_a` by `Q`, `q_b` by `−Q` and `P` by `p_b − p_a`;
/// `V` shifts `p_a` by `P`, `p_b` by `−P` and `Q` by `q_b − q_a`.
/// Output quadratures of `VU` are `S_V S_U` applied to the inputs, so
/// `p_a' = p_b + P`, `p_b' = p_a − P`.
pub fn symplectic_of_generators() -> (SymplecticMap, SymplecticMap, SymplecticMap) {
    let (qa, pa, qb, pb, qq, pp) = (0, 1, 2, 3, 4, 5);
    let mut u = DMatrix::identity(6, 6);
    u[(qa, qq)] = 1.0;
    u[(qb, qq)] = -1.0;
    u[(pp, pb)] = 1.0;
    u[(pp, pa)] = -1.0;
    let mut v = DMatrix::identity(6, 6);
    v[(pa, pp)] = 1.0;
    v[(pb, pp)] = -1.0;
    v[(qq, qb)] = 1.0;
    v[(qq, qa)] = -1.0;
    let su = SymplecticMap { matrix: u, displacement: DVector::zeros(6) };
    let sv = SymplecticMap { matrix: v, displacement: DVector::zeros(6) };
    let svu = sv.compose(&su);
    (su, sv, svu)
}

pub fn evolve(state: &CovarianceState, map: &SymplecticMap) -> Result<CovarianceState> {
    if map.matrix.nrows() != state.mean.len() {
        return Err(invalid("map", format!("acts on {} quadratures, state has {}", map.matrix.nrows(), state.mean.len())));
    }
    let s = &map.matrix;
    let cov = s * &state.covariance * s.transpose();
    // restore exact symmetry lost to rounding
    let cov = (&cov + cov.transpose()) * 0.5;
    Ok(CovarianceState { mean: s * &state.mean + &map.displacement, covariance: cov })
}

/// Fidelity of two single-mode Gaussian states,
///
/// ```text
/// F = 2 / (√(Δ + δ) − √δ) · exp(−½ dᵀ (σ₁ + σ₂)⁻¹ d)
/// Δ = det(2(σ₁ + σ₂)),  δ = (4 det σ₁ − 1)(4 det σ₂ − 1)
/// ```
pub fn gaussian_fidelity(x: &CovarianceState, y: &CovarianceState) -> Result<f64> {
    if x.modes() != 1 || y.modes() != 1 {
        return Err(invalid("states", "fidelity is implemented for single modes"));
    }
    let sum = &x.covariance + &y.covariance;
    let big = (&sum * 2.0).determinant();
    let small = ((4.0 * x.covariance.determinant() - 1.0) * (4.0 * y.covariance.determinant() - 1.0)).max(0.0);
    let d = &x.mean - &y.mean;
    let inv = sum.try_inverse().ok_or_else(|| invalid("covariance", "σ₁ + σ₂ is singular"))?;
    let expo = (-0.5 * (d.transpose() * inv * &d)[(0, 0)]).exp();
    Ok((2.0 / ((big + small).sqrt() - small.sqrt()) * expo).min(1.0))
}

/// Fidelity between the final state of particle `a` and the initial state of
/// particle `b`.
pub fn swap_fidelity(state_f: &CovarianceState, target_b_initial: &CovarianceState) -> Result<f64> {
    gaussian_fidelity(&state_f.reduced(&[MODE_A])?, target_b_initial)
}

/// Classical fidelity `(∫√(f g))²` of the two momentum marginals.
pub fn momentum_swap_fidelity(state_f: &CovarianceState, target_b_initial: &CovarianceState) -> Result<f64> {
    let a = state_f.reduced(&[MODE_A])?;
    if target_b_initial.modes() != 1 {
        return Err(invalid("target", "must be a single mode"));
    }
    let (m1, v1) = (a.mean[1], a.covariance[(1, 1)]);
    let (m2, v2) = (target_b_initial.mean[1], target_b_initial.covariance[(1, 1)]);
    Ok(2.0 * (v1 * v2).sqrt() / (v1 + v2) * (-(m1 - m2).powi(2) / (2.0 * (v1 + v2))).exp())
}

/// `E_N = Σ_k max(0, −ln 2ν̃_k)` over the symplectic eigenvalues of the
/// partially transposed covariance.
///
/// Eigenvalues within the physicality tolerance of ½ count as ½, so
/// `E_N > 0` exactly when [`ppt_physicality`] is false.
pub fn log_negativity(state: &CovarianceState, partition: &[usize]) -> Result<f64> {
    let pt = state.partial_transpose(partition)?;
    Ok(symplectic_eigenvalues(&pt)
        .into_iter()
        .filter(|nu| *nu < 0.5 - PHYSICALITY_TOLERANCE)
        .map(|nu| -(2.0 * nu).ln())
        .fold(0.0, |acc, x| acc + x))
}

/// Whether the partially transposed covariance is itself physical.
pub fn ppt_physicality(state: &CovarianceState, partition: &[usize]) -> Result<bool> {
    let pt = state.partial_transpose(partition)?;
    let min = symplectic_eigenvalues(&pt).into_iter().fold(f64::INFINITY, f64::min);
    Ok(min >= 0.5 - PHYSICALITY_TOLERANCE)
}

/// One row of an auxiliary-squeezing sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub p_variance: f64,
    pub swap_fidelity: f64,
    pub momentum_swap_fidelity: f64,
    pub log_negativity: f64,
    pub ppt_physical: bool,
}

/// Collide `a` and `b` through an auxiliary mode of each momentum variance.
pub fn squeezing_sweep(a: &CovarianceState, b: &CovarianceState, p_variances: &[f64]) -> Result<Vec<SweepPoint>> {
    let (_, _, svu) = symplectic_of_generators();
    p_variances
        .iter()
        .map(|&v| {
            let fin = evolve(&CovarianceState::collision_input(a, b, v)?, &svu)?;
            Ok(SweepPoint {
                p_variance: v,
                swap_fidelity: swap_fidelity(&fin, b)?,
                momentum_swap_fidelity: momentum_swap_fidelity(&fin, b)?,
                log_negativity: log_negativity(&fin, &[MODE_A, MODE_B])?,
                ppt_physical: ppt_physicality(&fin, &[MODE_A, MODE_B])?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn collide(aux: f64) -> (CovarianceState, CovarianceState, CovarianceState) {
        let a = CovarianceState::coherent(0.3, 1.0);
        let b = CovarianceState::coherent(-0.2, -1.0);
        let (_, _, svu) = symplectic_of_generators();
        let fin = evolve(&CovarianceState::collision_input(&a, &b, aux).unwrap(), &svu).unwrap();
        (a, b, fin)
    }

    #[test]
    fn generators_are_symplectic() {
        let (su, sv, svu) = symplectic_of_generators();
        assert_eq!(su.deviation(), 0.0);
        assert_eq!(sv.deviation(), 0.0);
        assert!(svu.deviation() < 1e-12);
        assert!(SymplecticMap::linear(DMatrix::identity(6, 6) * 2.0).is_err());
    }

    #[test]
    fn collision_rows() {
        let (_, _, svu) = symplectic_of_generators();
        let s = svu.matrix();
        // p_a' = p_b + P
        assert_eq!(s.row(1).iter().copied().collect::<Vec<_>>(), vec![0.0, 0.0, 0.0, 1.0, 0.0, 1.0]);
        // p_a' + p_b' = p_a + p_b
        let total: Vec<f64> = (0..6).map(|j| s[(1, j)] + s[(3, j)]).collect();
        assert_eq!(total, vec![0.0, 1.0, 0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn evolution_laws() {
        let a = CovarianceState::single_mode(0.0, 1.5, 0.5, 0.7).unwrap();
        let b = CovarianceState::single_mode(0.0, -0.5, 0.4, 0.9).unwrap();
        let input = CovarianceState::collision_input(&a, &b, 0.05).unwrap();
        let (_, _, svu) = symplectic_of_generators();
        let fin = evolve(&input, &svu).unwrap();
        assert_eq!(fin.covariance()[(1, 1)], 0.9 + 0.05);
        assert_eq!(fin.covariance()[(3, 3)], 0.7 + 0.05);
        assert_eq!(fin.mean()[1], -0.5);
        assert_eq!(fin.mean()[3], 1.5);
        assert!(fin.min_symplectic_eigenvalue() >= 0.5 - 1e-10);
        let same = evolve(&input, &SymplecticMap::identity(3)).unwrap();
        assert_eq!(same, input);
    }

    #[test]
    fn vacuum_collision_stays_physical() {
        let (_, _, svu) = symplectic_of_generators();
        let fin = evolve(&CovarianceState::vacuum(3), &svu).unwrap();
        assert!(fin.symplectic_eigenvalues().iter().all(|nu| (*nu - 0.5).abs() < 1e-10));
    }

    #[test]
    fn fidelity_checks() {
        let v = CovarianceState::vacuum(1);
        assert!((gaussian_fidelity(&v, &v).unwrap() - 1.0).abs() < 1e-14);
        // coherent states: F = exp(−|α−β|²), |α−β|² = |d|²/2
        let c = CovarianceState::coherent(1.0, 0.5);
        assert!((gaussian_fidelity(&v, &c).unwrap() - (-(1.25) / 2.0f64).exp()).abs() < 1e-14);
        // thermal states commute: F = (Σ √(p_n q_n))²
        for (n1, n2) in [(0.3f64, 1.7f64), (2.0, 2.0), (0.0, 4.0)] {
            let (r1, r2) = (n1 / (n1 + 1.0), n2 / (n2 + 1.0));
            let s: f64 = (0..4000)
                .map(|n| ((1.0 - r1) * r1.powi(n) * (1.0 - r2) * r2.powi(n)).sqrt())
                .sum();
            let f = gaussian_fidelity(&CovarianceState::thermal(n1).unwrap(), &CovarianceState::thermal(n2).unwrap()).unwrap();
            assert!((f - s * s).abs() < 1e-12, "{n1} {n2}: {f} vs {}", s * s);
        }
    }

    #[test]
    fn swap_quality_against_auxiliary_squeezing() {
        let (_, b, sharp) = collide(1e-6);
        let (_, _, vac) = collide(0.5);
        assert!(momentum_swap_fidelity(&sharp, &b).unwrap() > 0.999);
        assert!(swap_fidelity(&vac, &b).unwrap() < 1.0);
        // the position of a picks up Q, whose variance is 1/(4·1e-6)
        assert!(swap_fidelity(&sharp, &b).unwrap() < 0.01);
    }

    #[test]
    fn entanglement_witnesses() {
        let product = CovarianceState::product(&[&CovarianceState::thermal(0.4).unwrap(), &CovarianceState::vacuum(2)]);
        assert_eq!(log_negativity(&product, &[0, 1]).unwrap(), 0.0);
        assert!(ppt_physicality(&product, &[0, 1]).unwrap());

        let (_, _, fin) = collide(0.05);
        assert!(log_negativity(&fin, &[0, 1]).unwrap() > 0.0);
        assert!(!ppt_physicality(&fin, &[0, 1]).unwrap());
        // global time reversal
        assert!(ppt_physicality(&fin, &[0, 1, 2]).unwrap());
        // the complementary partition carries the same negativity
        let en = log_negativity(&fin, &[0, 1]).unwrap();
        assert!((log_negativity(&fin, &[2]).unwrap() - en).abs() < 1e-9);
    }

    #[test]
    fn negativity_ignores_local_operations() {
        let (_, _, fin) = collide(0.2);
        // beam splitter between a and b is local to the ab side
        let (c, s) = (0.6f64, 0.8f64);
        let mut m = DMatrix::identity(6, 6);
        for (i, j) in [(0, 2), (1, 3)] {
            m[(i, i)] = c;
            m[(i, j)] = s;
            m[(j, i)] = -s;
            m[(j, j)] = c;
        }
        // squeezer on the auxiliary mode
        m[(4, 4)] = 2.0;
        m[(5, 5)] = 0.5;
        let local = SymplecticMap::linear(m).unwrap();
        let moved = evolve(&fin, &local).unwrap();
        let (e0, e1) = (log_negativity(&fin, &[0, 1]).unwrap(), log_negativity(&moved, &[0, 1]).unwrap());
        assert!((e0 - e1).abs() < 1e-9);
    }

    #[test]
    fn unphysical_states_are_rejected() {
        assert!(matches!(CovarianceState::single_mode(0.0, 0.0, 0.1, 0.1), Err(Error::Unphysical { .. })));
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.1, 1.0]);
        assert!(CovarianceState::new(DVector::zeros(2), bad).is_err());
    }

    #[test]
    fn json_round_trip() {
        let (_, _, fin) = collide(0.3);
        let text = serde_json::to_string(&fin).unwrap();
        let back: CovarianceState = serde_json::from_str(&text).unwrap();
        assert_eq!(back, fin);
    }
}
