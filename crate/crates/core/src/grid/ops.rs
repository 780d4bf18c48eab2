use crate::classical::MeasurementModel;
use crate::error::{invalid, Error, Result};

use super::{trapezoid, Grid1D, GridDistribution};

/// Outcomes less likely than this cannot be conditioned on.
const MIN_OUTCOME_DENSITY: f64 = 1e-300;

/// Condition `d` on pointer reading `x`.
///
/// Returns the posterior and the outcome density `P(x) = ∫ M(x|p) d(p) dp`.
pub fn measurement_update(
    d: &GridDistribution,
    model: &MeasurementModel,
    x: f64,
) -> Result<(GridDistribution, f64)> {
    let weighted: Vec<f64> = d
        .grid
        .coordinates()
        .zip(&d.values)
        .map(|(p, v)| model.kernel(x, p).map(|k| k * v))
        .collect::<Result<_>>()?;
    let probability = trapezoid(&weighted, d.grid.spacing());
    if !(probability >= MIN_OUTCOME_DENSITY) {
        return Err(Error::IncompatibleOutcome { probability });
    }
    let values = weighted.into_iter().map(|v| v / probability).collect();
    Ok((GridDistribution { grid: d.grid, values }, probability))
}

/// Shift the density by `shift` and, if `added_variance > 0`, smear it with a
/// zero-mean Gaussian of that variance.
///
/// Pure shifts use linear interpolation between neighbouring points, which is
/// itself a Markov map on the grid. Smearing wider than one spacing uses the
/// sampled, shifted Gaussian kernel directly; narrower smearing uses the
/// three-point kernel with the same variance followed by the interpolated
/// shift.
pub fn apply_control(d: &GridDistribution, shift: f64, added_variance: f64) -> Result<GridDistribution> {
    if !shift.is_finite() {
        return Err(invalid("shift", format!("must be finite, got {shift}")));
    }
    if !(added_variance >= 0.0 && added_variance.is_finite()) {
        return Err(invalid("added_variance", format!("must be non-negative, got {added_variance}")));
    }
    let h = d.grid.spacing();
    let values = if added_variance == 0.0 {
        interpolated_shift(&d.values, shift / h)
    } else if added_variance.sqrt() >= h {
        shifted_gaussian(&d.values, h, shift, added_variance)
    } else {
        let a = added_variance / (2.0 * h * h);
        let n = d.values.len();
        let smeared: Vec<f64> = (0..n)
            .map(|i| {
                let left = if i > 0 { d.values[i - 1] } else { 0.0 };
                let right = if i + 1 < n { d.values[i + 1] } else { 0.0 };
                a * left + (1.0 - 2.0 * a) * d.values[i] + a * right
            })
            .collect();
        interpolated_shift(&smeared, shift / h)
    };
    let out = GridDistribution { grid: d.grid, values };
    out.check_leakage()?;
    Ok(out)
}

fn interpolated_shift(values: &[f64], steps: f64) -> Vec<f64> {
    let k = steps.floor();
    let f = steps - k;
    let k = k as i64;
    let n = values.len() as i64;
    let at = |i: i64| if (0..n).contains(&i) { values[i as usize] } else { 0.0 };
    (0..n).map(|i| (1.0 - f) * at(i - k) + f * at(i - k - 1)).collect()
}

fn shifted_gaussian(values: &[f64], h: f64, shift: f64, variance: f64) -> Vec<f64> {
    let n = values.len();
    // w[o + n - 1] is the weight for moving o points to the right
    let weights: Vec<f64> = (0..2 * n - 1)
        .map(|idx| {
            let o = idx as f64 - (n - 1) as f64;
            let d = o * h - shift;
            (-d * d / (2.0 * variance)).exp()
        })
        .collect();
    let z: f64 = weights.iter().sum();
    (0..n)
        .map(|i| {
            let mut acc = 0.0;
            for (j, v) in values.iter().enumerate() {
                if *v != 0.0 {
                    acc += weights[i + n - 1 - j] * v;
                }
            }
            acc / z
        })
        .collect()
}

/// Outcome density `P(x) = ∫ M(x|p) d(p) dp` on `x_grid`, normalized over `x`.
pub fn intervention_probability(
    d: &GridDistribution,
    model: &MeasurementModel,
    x_grid: Grid1D,
) -> Result<GridDistribution> {
    if model.is_ideal() {
        return Err(Error::IdealLimit);
    }
    let h = d.grid.spacing();
    let values: Vec<f64> = x_grid
        .coordinates()
        .map(|x| {
            let integrand: Vec<f64> = d
                .grid
                .coordinates()
                .zip(&d.values)
                .map(|(p, v)| model.kernel(x, p).unwrap_or(0.0) * v)
                .collect();
            trapezoid(&integrand, h)
        })
        .collect();
    let out = GridDistribution::new(x_grid, values)?.normalized()?;
    out.check_leakage()?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::{conditional_state, outcome_distribution, GaussianMoment};
    use crate::grid::discretize;

    fn std_grid() -> Grid1D {
        Grid1D::symmetric(8.0, 4096).unwrap()
    }

    fn normal(mean: f64, var: f64) -> GaussianMoment {
        GaussianMoment::new(mean, var).unwrap()
    }

    #[test]
    fn update_matches_closed_form() {
        let prior = normal(0.2, 1.0);
        let d = discretize(&prior, std_grid()).unwrap();
        for (mu, sigma, x) in [(1.0, 1.0, 1.0), (2.0, 0.5, -0.7), (0.5, 3.0, 2.0)] {
            let m = MeasurementModel::new(mu, sigma).unwrap();
            let (post, px) = measurement_update(&d, &m, x).unwrap();
            let exact = conditional_state(&prior, &m, x).unwrap();
            assert!((post.mean() - exact.mean).abs() < 1e-6);
            assert!((post.variance() - exact.variance).abs() < 1e-6);
            assert!((post.mass() - 1.0).abs() < 1e-9);
            assert!((px - outcome_distribution(&prior, &m).density(x)).abs() < 1e-9);
        }
    }

    #[test]
    fn uninformative_update_is_nearly_identity() {
        let d = discretize(&normal(0.0, 1.0), std_grid()).unwrap();
        let m = MeasurementModel::new(1.0, 1e6).unwrap();
        let (post, _) = measurement_update(&d, &m, 0.5).unwrap();
        assert!(post.l1_distance(&d).unwrap() < 1e-4);
    }

    #[test]
    fn bimodal_prior_reweights_modes() {
        let grid = std_grid();
        let (l, r) = (normal(-3.0, 0.5), normal(3.0, 0.5));
        let d = GridDistribution::from_fn(grid, |p| 0.5 * l.density(p) + 0.5 * r.density(p))
            .unwrap()
            .normalized()
            .unwrap();
        let m = MeasurementModel::new(1.0, 1.0).unwrap();
        let (post, _) = measurement_update(&d, &m, 2.0).unwrap();
        // Each mode updates like a Gaussian; its weight is the mode's marginal
        // outcome density at x.
        let wl = outcome_distribution(&l, &m).density(2.0);
        let wr = outcome_distribution(&r, &m).density(2.0);
        let (pl, pr) = (conditional_state(&l, &m, 2.0).unwrap(), conditional_state(&r, &m, 2.0).unwrap());
        let oracle = GridDistribution::from_fn(grid, |p| (wl * pl.density(p) + wr * pr.density(p)) / (wl + wr)).unwrap();
        assert!(post.l1_distance(&oracle).unwrap() < 1e-8);
        assert!((post.mass() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn incompatible_outcome() {
        let d = discretize(&normal(0.0, 1.0), std_grid()).unwrap();
        let m = MeasurementModel::new(1.0, 1e-4).unwrap();
        assert!(matches!(measurement_update(&d, &m, 7.9e3), Err(Error::IncompatibleOutcome { .. })));
        let ideal = MeasurementModel::ideal(1.0).unwrap();
        assert_eq!(measurement_update(&d, &ideal, 0.0).unwrap_err(), Error::IdealLimit);
    }

    #[test]
    fn control_identity() {
        let d = discretize(&normal(0.3, 1.0), std_grid()).unwrap();
        let same = apply_control(&d, 0.0, 0.0).unwrap();
        assert!(same.l1_distance(&d).unwrap() < 1e-12);
    }

    #[test]
    fn control_matches_closed_form() {
        let grid = Grid1D::symmetric(10.0, 4096).unwrap();
        let d = discretize(&normal(0.5, 1.0), grid).unwrap();
        for (s, v) in [(-0.5, 0.3), (0.731, 1.0), (1.2, 0.0001)] {
            let out = apply_control(&d, s, v).unwrap();
            let exact = GridDistribution::from_fn(grid, |p| normal(0.5 + s, 1.0 + v).density(p)).unwrap();
            let tol = if v == 0.0001 { 1e-4 } else { 1e-6 };
            assert!(out.l1_distance(&exact).unwrap() < tol, "s={s} v={v}");
            assert!((out.mass() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn gaussian_semigroup() {
        let d = discretize(&normal(0.0, 0.5), std_grid()).unwrap();
        let twice = apply_control(&apply_control(&d, 0.0, 0.4).unwrap(), 0.0, 0.4).unwrap();
        let once = apply_control(&d, 0.0, 0.8).unwrap();
        assert!(twice.l1_distance(&once).unwrap() < 1e-6);
    }

    #[test]
    fn shifted_out_of_grid_is_leakage() {
        let d = discretize(&normal(0.0, 1.0), std_grid()).unwrap();
        assert!(matches!(apply_control(&d, 6.0, 0.0), Err(Error::Leakage { .. })));
        assert!(apply_control(&d, 0.0, -1.0).is_err());
    }

    #[test]
    fn outcome_density_matches_closed_form() {
        let prior = normal(0.0, 1.0);
        let d = discretize(&prior, std_grid()).unwrap();
        let m = MeasurementModel::new(1.0, 1.0).unwrap();
        let x_grid = Grid1D::symmetric(12.0, 4096).unwrap();
        let px = intervention_probability(&d, &m, x_grid).unwrap();
        let exact = outcome_distribution(&prior, &m);
        assert!((px.mean() - exact.mean).abs() < 1e-6);
        assert!((px.variance() - exact.variance).abs() < 1e-6);
    }

    #[test]
    fn outcome_density_of_narrow_prior_is_the_kernel() {
        let grid = Grid1D::symmetric(8.0, 4097).unwrap();
        let d = GridDistribution::point_mass(grid, 1.0).unwrap();
        let m = MeasurementModel::new(2.0, 0.5).unwrap();
        let x_grid = Grid1D::symmetric(8.0, 2048).unwrap();
        let px = intervention_probability(&d, &m, x_grid).unwrap();
        let p_star = grid.coordinate(((1.0 - grid.lower()) / grid.spacing()).round() as usize);
        let kernel = GridDistribution::from_fn(x_grid, |x| m.kernel(x, p_star).unwrap()).unwrap();
        assert!(px.l1_distance(&kernel).unwrap() < 1e-9);
    }

    #[test]
    fn outcome_density_of_uniform_prior() {
        // Uniform on [−a, a] convolved with N(0, σ) has density
        // [Φ((x+a)/√σ) − Φ((x−a)/√σ)] / 2a.
        let a = 2.0;
        let sigma: f64 = 0.01;
        let grid = Grid1D::symmetric(4.0, 8001).unwrap();
        let d = GridDistribution::from_fn(grid, |p| if p.abs() <= a { 1.0 } else { 0.0 }).unwrap().normalized().unwrap();
        let m = MeasurementModel::new(1.0, sigma).unwrap();
        let x_grid = Grid1D::symmetric(4.0, 801).unwrap();
        let px = intervention_probability(&d, &m, x_grid).unwrap();
        let phi = |z: f64| 0.5 * statrs::function::erf::erfc(-z / std::f64::consts::SQRT_2);
        let s = sigma.sqrt();
        let exact = GridDistribution::from_fn(x_grid, |x| (phi((x + a) / s) - phi((x - a) / s)) / (2.0 * a)).unwrap();
        assert!((px.mass() - 1.0).abs() < 1e-12);
        assert!(px.l1_distance(&exact).unwrap() < 2e-3);
    }
}
