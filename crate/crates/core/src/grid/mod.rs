//! Sampled momentum densities on uniform grids.
//!
//! Integrals use the trapezoidal rule. Every density carries a leakage guard:
//! the mass sitting in the outermost 5% of points at either end must stay
//! below [`LEAKAGE_LIMIT`], otherwise a result would depend on where the grid
//! was cut off.

mod collision;
mod ops;

use std::io::Write;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::classical::GaussianMoment;
use crate::error::{invalid, Error, Result};

pub use collision::{collision_map, JointDistribution, MAX_JOINT_POINTS};
pub use ops::{apply_control, intervention_probability, measurement_update};

pub const LEAKAGE_LIMIT: f64 = 1e-6;
const TAIL_FRACTION: f64 = 0.05;
/// Half-width, in standard deviations, a grid must cover around a Gaussian.
const MIN_SPAN_SIGMAS: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    lower: f64,
    upper: f64,
    points: usize,
}

impl Grid1D {
    pub fn new(lower: f64, upper: f64, points: usize) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite() && upper > lower) {
            return Err(invalid("grid", format!("need finite lower < upper, got [{lower}, {upper}]")));
        }
        if points < 16 {
            return Err(invalid("points", format!("need at least 16 points, got {points}")));
        }
        Ok(Self { lower, upper, points })
    }

    /// `[-half_width, half_width]`.
    pub fn symmetric(half_width: f64, points: usize) -> Result<Self> {
        Self::new(-half_width, half_width, points)
    }

    /// Grid covering `±sigmas` standard deviations around the mean of `g`.
    pub fn around(g: &GaussianMoment, sigmas: f64, points: usize) -> Result<Self> {
        let w = sigmas * g.std_dev();
        Self::new(g.mean - w, g.mean + w, points)
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn spacing(&self) -> f64 {
        (self.upper - self.lower) / (self.points - 1) as f64
    }

    pub fn coordinate(&self, i: usize) -> f64 {
        self.lower + i as f64 * self.spacing()
    }

    pub fn coordinates(&self) -> impl Iterator<Item = f64> + '_ {
        let h = self.spacing();
        (0..self.points).map(move |i| self.lower + i as f64 * h)
    }

    /// True if the grid is its own mirror image about zero.
    pub fn is_symmetric(&self) -> bool {
        (self.lower + self.upper).abs() <= 1e-12 * self.upper.abs()
    }

    fn tail_points(&self) -> usize {
        (TAIL_FRACTION * self.points as f64).ceil() as usize
    }
}

/// Non-negative density sampled on a [`Grid1D`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDistribution {
    grid: Grid1D,
    values: Vec<f64>,
}

impl GridDistribution {
    pub fn new(grid: Grid1D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.points {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.points
            )));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(invalid("values", format!("densities must be finite and non-negative, found {v}")));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Grid1D, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.coordinates().map(f).collect();
        Self::new(grid, values)
    }

    /// Unit mass concentrated on the grid point nearest `at`.
    ///
    /// A zero-width kernel: convolving with it on the same grid is an exact
    /// index shift.
    pub fn point_mass(grid: Grid1D, at: f64) -> Result<Self> {
        if !(at >= grid.lower && at <= grid.upper) {
            return Err(invalid("at", format!("{at} lies outside the grid")));
        }
        let h = grid.spacing();
        let i = ((at - grid.lower) / h).round() as usize;
        let mut values = vec![0.0; grid.points];
        // trapezoid weight is h/2 at the ends
        values[i] = if i == 0 || i == grid.points - 1 { 2.0 / h } else { 1.0 / h };
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mass(&self) -> f64 {
        trapezoid(&self.values, self.grid.spacing())
    }

    pub fn normalize(&mut self) -> Result<()> {
        let m = self.mass();
        if !(m > 0.0 && m.is_finite()) {
            return Err(invalid("values", format!("cannot normalize a density of mass {m}")));
        }
        self.values.iter_mut().for_each(|v| *v /= m);
        Ok(())
    }

    pub fn normalized(mut self) -> Result<Self> {
        self.normalize()?;
        Ok(self)
    }

    pub fn mean(&self) -> f64 {
        let weighted: Vec<f64> = self.grid.coordinates().zip(&self.values).map(|(p, v)| p * v).collect();
        trapezoid(&weighted, self.grid.spacing()) / self.mass()
    }

    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        let weighted: Vec<f64> = self
            .grid
            .coordinates()
            .zip(&self.values)
            .map(|(p, v)| (p - mean) * (p - mean) * v)
            .collect();
        trapezoid(&weighted, self.grid.spacing()) / self.mass()
    }

    /// `∫|f − g|` over the shared grid.
    pub fn l1_distance(&self, other: &GridDistribution) -> Result<f64> {
        same_grid(&self.grid, &other.grid)?;
        let diff: Vec<f64> = self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).collect();
        Ok(trapezoid(&diff, self.grid.spacing()))
    }

    /// Mirror image `p → −p`; only defined on symmetric grids.
    pub fn reflected(&self) -> Result<GridDistribution> {
        if !self.grid.is_symmetric() {
            return Err(Error::GridMismatch("reflection needs a grid symmetric about zero".into()));
        }
        let mut values = self.values.clone();
        values.reverse();
        Ok(Self { grid: self.grid, values })
    }

    /// Larger of the two tail masses, each taken over the outer 5% of points.
    pub fn tail_mass(&self) -> f64 {
        let k = self.grid.tail_points();
        let h = self.grid.spacing();
        let n = self.values.len();
        let left: f64 = self.values[..k].iter().sum::<f64>() * h;
        let right: f64 = self.values[n - k..].iter().sum::<f64>() * h;
        left.max(right) / self.mass()
    }

    pub fn check_leakage(&self) -> Result<()> {
        let mass = self.tail_mass();
        if mass >= LEAKAGE_LIMIT {
            return Err(Error::Leakage { mass });
        }
        Ok(())
    }

    /// Two columns, `momentum,density`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Precondition(format!("csv write failed: {e}"));
        w.write_record(["momentum", "density"]).map_err(io)?;
        for (p, v) in self.grid.coordinates().zip(&self.values) {
            w.write_record([crate::format_f64(p), crate::format_f64(*v)]).map_err(io)?;
        }
        w.flush().map_err(|e| Error::Precondition(format!("csv write failed: {e}")))?;
        Ok(())
    }
}

/// Sample a Gaussian onto `grid` and normalize it.
///
/// The grid must cover `±6` standard deviations around the mean, and the
/// standard deviation must be at least half a grid spacing.
pub fn discretize(g: &GaussianMoment, grid: Grid1D) -> Result<GridDistribution> {
    let sd = g.std_dev();
    let h = grid.spacing();
    if sd < 0.5 * h {
        return Err(Error::Unresolved { std_dev: sd, spacing: h });
    }
    let lo = g.mean - MIN_SPAN_SIGMAS * sd;
    let hi = g.mean + MIN_SPAN_SIGMAS * sd;
    if lo < grid.lower || hi > grid.upper {
        let outside = 0.5 * erfc((g.mean - grid.lower) / (sd * std::f64::consts::SQRT_2))
            + 0.5 * erfc((grid.upper - g.mean) / (sd * std::f64::consts::SQRT_2));
        return Err(Error::Leakage { mass: outside.max(f64::MIN_POSITIVE) });
    }
    let d = GridDistribution::from_fn(grid, |p| g.density(p))?.normalized()?;
    d.check_leakage()?;
    Ok(d)
}

pub(crate) fn trapezoid(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    h * (values.iter().sum::<f64>() - 0.5 * (values[0] + values[n - 1]))
}

pub(crate) fn same_grid(a: &Grid1D, b: &Grid1D) -> Result<()> {
    if a != b {
        return Err(Error::GridMismatch(format!(
            "[{}, {}]x{} vs [{}, {}]x{}",
            a.lower, a.upper, a.points, b.lower, b.upper, b.points
        )));
    }
    Ok(())
}
