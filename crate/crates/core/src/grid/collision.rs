use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{same_grid, trapezoid, Grid1D, GridDistribution, LEAKAGE_LIMIT};

/// Largest joint grid, per axis, that [`collision_map`] will allocate.
pub const MAX_JOINT_POINTS: usize = 1024;
const SYMMETRY_TOLERANCE: f64 = 1e-9;

/// Density over `(p_a, p_b)` on the square product of one grid.
/// Row `i` is `p_a = x_i`, column `j` is `p_b = x_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointDistribution {
    grid: Grid1D,
    values: Vec<f64>,
}

impl JointDistribution {
    pub fn product(a: &GridDistribution, b: &GridDistribution) -> Result<Self> {
        same_grid(&a.grid, &b.grid)?;
        check_cap(a.grid.points)?;
        let values = a.values.iter().flat_map(|va| b.values.iter().map(move |vb| va * vb)).collect();
        Ok(Self { grid: a.grid, values })
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn points(&self) -> usize {
        self.grid.points
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grid.points + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mass(&self) -> f64 {
        let h = self.grid.spacing();
        let rows: Vec<f64> = self.values.chunks(self.grid.points).map(|r| trapezoid(r, h)).collect();
        trapezoid(&rows, h)
    }

    /// Marginal over `p_a`.
    pub fn marginal_a(&self) -> GridDistribution {
        let h = self.grid.spacing();
        let values = self.values.chunks(self.grid.points).map(|r| trapezoid(r, h)).collect();
        GridDistribution { grid: self.grid, values }
    }

    /// Marginal over `p_b`.
    pub fn marginal_b(&self) -> GridDistribution {
        let n = self.grid.points;
        let h = self.grid.spacing();
        let values = (0..n)
            .map(|j| {
                let col: Vec<f64> = (0..n).map(|i| self.values[i * n + j]).collect();
                trapezoid(&col, h)
            })
            .collect();
        GridDistribution { grid: self.grid, values }
    }

    pub fn l1_distance(&self, other: &JointDistribution) -> Result<f64> {
        same_grid(&self.grid, &other.grid)?;
        let h = self.grid.spacing();
        let n = self.grid.points;
        let rows: Vec<f64> = (0..n)
            .map(|i| {
                let r: Vec<f64> = (0..n).map(|j| (self.get(i, j) - other.get(i, j)).abs()).collect();
                trapezoid(&r, h)
            })
            .collect();
        Ok(trapezoid(&rows, h))
    }

    /// Long form, `p_a,p_b,density`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let io = |e: csv::Error| Error::Precondition(format!("csv write failed: {e}"));
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["p_a", "p_b", "density"]).map_err(io)?;
        let coords: Vec<String> = self.grid.coordinates().map(crate::format_f64).collect();
        let n = self.grid.points;
        for i in 0..n {
            for j in 0..n {
                w.write_record([&coords[i], &coords[j], &crate::format_f64(self.get(i, j))]).map_err(io)?;
            }
        }
        w.flush().map_err(|e| Error::Precondition(format!("csv write failed: {e}")))?;
        Ok(())
    }
}

fn check_cap(points: usize) -> Result<()> {
    if points > MAX_JOINT_POINTS {
        return Err(Error::GridTooLarge {
            points,
            cap: MAX_JOINT_POINTS,
            bytes: points * points * std::mem::size_of::<f64>(),
        });
    }
    Ok(())
}

/// Two-particle collision with internal noise.
///
/// The particles exchange momenta, and a random transfer `u` drawn from the
/// symmetric density `eps` is added to one and removed from the other:
/// `p_a' = p_b + u`, `p_b' = p_a − u`. The final joint density is
///
/// ```text
/// P_f(p_a, p_b) = ∫ du eps(u) · P_a(p_b + u) · P_b(p_a − u)
/// ```
///
/// With `eps` a point mass at zero this is the exact swap
/// `P_f(p_a, p_b) = P_a(p_b)·P_b(p_a)`. Since `eps` is symmetric, the sign of
/// `u` in the integrand is immaterial; the form above is the one whose zero-noise
/// limit is the swap.
///
/// All three densities must share a grid that is symmetric about zero and
/// has an odd number of points, so `u` and `−u` are both grid points.
/// Rows are computed in parallel, each with a fixed summation order.
pub fn collision_map(
    pa: &GridDistribution,
    pb: &GridDistribution,
    eps: &GridDistribution,
) -> Result<JointDistribution> {
    same_grid(&pa.grid, &pb.grid)?;
    same_grid(&pa.grid, &eps.grid)?;
    let grid = pa.grid;
    if !grid.is_symmetric() || grid.points % 2 == 0 {
        return Err(Error::GridMismatch(
            "collision grid must be symmetric about zero with an odd number of points".into(),
        ));
    }
    check_cap(grid.points)?;
    let asymmetry = eps.l1_distance(&eps.reflected()?)?;
    if asymmetry >= SYMMETRY_TOLERANCE {
        return Err(Error::Precondition(format!(
            "noise density must be symmetric about zero (L1 asymmetry {asymmetry:.3e})"
        )));
    }

    let n = grid.points as i64;
    let c = (n - 1) / 2;
    let h = grid.spacing();
    let (a, b, e) = (&pa.values, &pb.values, &eps.values);
    let support: Vec<i64> = (0..n).filter(|&k| e[k as usize] != 0.0).collect();

    let values: Vec<f64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let support = &support;
            (0..n).map(move |j| {
                let mut acc = 0.0;
                for &k in support {
                    // u = (k − c)h; P_a at p_b + u, P_b at p_a − u
                    let ia = j + k - c;
                    let ib = i - k + c;
                    if (0..n).contains(&ia) && (0..n).contains(&ib) {
                        acc += e[k as usize] * a[ia as usize] * b[ib as usize];
                    }
                }
                h * acc
            })
        })
        .collect();

    let joint = JointDistribution { grid, values };
    for marginal in [joint.marginal_a(), joint.marginal_b()] {
        let mass = marginal.tail_mass();
        if mass >= LEAKAGE_LIMIT {
            return Err(Error::Leakage { mass });
        }
    }
    Ok(joint)
}
