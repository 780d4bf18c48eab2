use std::fs::File;
use std::io::BufWriter;

use intervene_core::classical::GaussianMoment;
use intervene_core::collision::{
    evolve, log_negativity, ppt_physicality, squeezing_sweep, swap_fidelity, symplectic_of_generators,
    CovarianceState, SymplecticMap, MODE_A, MODE_B,
};
use intervene_core::grid::{collision_map, discretize};
use intervene_core::{Grid1D, GridDistribution};
use nalgebra::DMatrix;

use super::{sci, timed};
use crate::config::RunConfig;
use crate::report::{Outcome, Provenance, Table};
use crate::CliError;

const LAW_TOL: f64 = 1e-4;
const AB: [usize; 2] = [MODE_A, MODE_B];

pub fn grid(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let mut out = Outcome::default();
    let p = &cfg.params;
    let pa = GaussianMoment::new(p.real("a_mean"), p.real("a_variance"))?;
    let pb = GaussianMoment::new(p.real("b_mean"), p.real("b_variance"))?;
    let ve = p.real("eps_variance");
    let grid = Grid1D::symmetric(p.real("half_width"), p.count("points"))?;

    let a = discretize(&pa, grid)?;
    let b = discretize(&pb, grid)?;
    let eps = if ve == 0.0 {
        GridDistribution::point_mass(grid, 0.0)?
    } else {
        discretize(&GaussianMoment::new(0.0, ve)?, grid)?
    };
    let joint = timed(&mut out, "collision_map", || collision_map(&a, &b, &eps))?;
    let (fa, fb) = (joint.marginal_a(), joint.marginal_b());

    out.result("a_final_mean", fa.mean(), Provenance::Grid);
    out.result("a_final_variance", fa.variance(), Provenance::Grid);
    out.result("b_final_mean", fb.mean(), Provenance::Grid);
    out.result("b_final_variance", fb.variance(), Provenance::Grid);
    out.result("joint_mass", joint.mass(), Provenance::Grid);

    let mass_err = [joint.mass(), fa.mass(), fb.mass()].iter().map(|m| (m - 1.0).abs()).fold(0.0, f64::max);
    out.invariant("grid.mass_conservation", mass_err < 1e-9, format!("max |mass − 1| = {}", sci(mass_err)));
    let negative = joint.values().iter().chain(fa.values()).chain(fb.values()).filter(|v| **v < 0.0).count();
    out.invariant("grid.non_negativity", negative == 0, format!("{negative} negative cells"));

    // relative to the mean, or to the spread when the mean is near zero
    let mean_err = |got: f64, want: &GaussianMoment| (got - want.mean).abs() / want.mean.abs().max(want.std_dev());
    let swap = mean_err(fa.mean(), &pb).max(mean_err(fb.mean(), &pa));
    out.invariant(
        "grid.mean_swap",
        swap < LAW_TOL,
        format!("⟨p_a,f⟩ = {:.8}, ⟨p_b,f⟩ = {:.8}; relative error {}", fa.mean(), fb.mean(), sci(swap)),
    );
    let (wa, wb) = (pb.variance + ve, pa.variance + ve);
    let var_err = ((fa.variance() - wa) / wa).abs().max(((fb.variance() - wb) / wb).abs());
    out.invariant(
        "grid.variance_addition",
        var_err < LAW_TOL,
        format!("V(p_a,f) = {:.8} vs {wa}, V(p_b,f) = {:.8} vs {wb}; relative error {}", fa.variance(), fb.variance(), sci(var_err)),
    );

    let mut t = Table::new("collision_marginals.csv", &["p", "a_initial", "b_initial", "noise", "a_final", "b_final"]);
    for (i, x) in grid.coordinates().enumerate() {
        t.push(&[x, a.values()[i], b.values()[i], eps.values()[i], fa.values()[i], fb.values()[i]]);
    }
    out.tables.push(t);

    if p.flag("write_joint") {
        let path = cfg.output_dir.join("collision_joint.csv");
        let file = File::create(&path).map_err(|source| CliError::Write { path: path.clone(), source })?;
        timed(&mut out, "joint_csv", || joint.write_csv(BufWriter::new(file)))?;
        out.extra_files.push("collision_joint.csv".into());
    }
    Ok(out)
}

/// `n` points spaced evenly in log between `lo` and `hi`.
fn log_sweep(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp()).collect()
}

fn condition_number(m: &DMatrix<f64>) -> f64 {
    let eig = m.clone().symmetric_eigen().eigenvalues;
    eig.amax() / eig.iter().fold(f64::INFINITY, |a, b| a.min(b.abs()))
}

/// A beam splitter between `a` and `b` and a squeezer on the auxiliary:
/// local on each side of the ab|c cut.
fn local_map() -> Result<SymplecticMap, CliError> {
    let (c, s) = (0.3f64.cos(), 0.3f64.sin());
    let mut m = DMatrix::identity(6, 6);
    for k in 0..2 {
        let (x, y) = (k, 2 + k);
        m[(x, x)] = c;
        m[(x, y)] = s;
        m[(y, x)] = -s;
        m[(y, y)] = c;
    }
    m[(4, 4)] = 0.4f64.exp();
    m[(5, 5)] = (-0.4f64).exp();
    Ok(SymplecticMap::linear(m)?)
}

pub fn gaussian(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let mut out = Outcome::default();
    let p = &cfg.params;
    let a = CovarianceState::single_mode(p.real("a_q_mean"), p.real("a_p_mean"), p.real("a_q_variance"), p.real("a_p_variance"))?;
    let b = CovarianceState::single_mode(p.real("b_q_mean"), p.real("b_p_mean"), p.real("b_q_variance"), p.real("b_p_variance"))?;
    let (lo, hi) = (p.real("sweep_min"), p.real("sweep_max"));
    let witness = p.real("witness_p_variance");
    let variances = log_sweep(lo, hi, p.count("sweep_points"));

    let (su, sv, svu) = symplectic_of_generators();
    let maps = [su.clone(), sv.clone(), svu.clone(), svu.compose(&svu), su.compose(&sv)];
    let dev = maps.iter().map(SymplecticMap::deviation).fold(0.0, f64::max);
    out.invariant("collision.symplectic", dev < 1e-12, format!("max |SΩSᵀ − Ω| = {}", sci(dev)));

    let sweep = timed(&mut out, "sweep", || squeezing_sweep(&a, &b, &variances))?;
    let collide = |v: f64| -> Result<(CovarianceState, CovarianceState), CliError> {
        let input = CovarianceState::collision_input(&a, &b, v)?;
        let fin = evolve(&input, &svu)?;
        Ok((input, fin))
    };

    // ν is computed from σ^{1/2}Ωσ^{1/2}, so its rounding error grows with the
    // condition number of σ; the exact value is preserved by any symplectic map.
    let (mut min_margin, mut worst_nu, mut worst_tol) = (f64::INFINITY, f64::INFINITY, 0.0f64);
    let (mut swap_exact, mut var_err, mut product_en) = (true, 0.0f64, 0.0f64);
    let mut inconsistent = Vec::new();
    for (v, point) in variances.iter().zip(&sweep) {
        let (input, fin) = collide(*v)?;
        let nu = fin.min_symplectic_eigenvalue();
        let tol = (f64::EPSILON * condition_number(fin.covariance())).max(1e-10);
        if nu - (0.5 - tol) < min_margin {
            (min_margin, worst_nu, worst_tol) = (nu - (0.5 - tol), nu, tol);
        }
        swap_exact &= fin.mean()[1] == b.mean()[1] && fin.mean()[3] == a.mean()[1];
        let want_a = b.covariance()[(1, 1)] + v;
        let want_b = a.covariance()[(1, 1)] + v;
        var_err = var_err
            .max((fin.covariance()[(1, 1)] - want_a).abs() / want_a)
            .max((fin.covariance()[(3, 3)] - want_b).abs() / want_b);
        product_en = product_en.max(log_negativity(&input, &AB)?);
        let en = point.log_negativity;
        if (en > 0.0) == point.ppt_physical {
            inconsistent.push(*v);
        }
    }
    out.invariant(
        "collision.physicality",
        min_margin >= 0.0,
        format!("tightest point: ν_min = {worst_nu:.12} with rounding tolerance {}", sci(worst_tol)),
    );
    out.invariant("collision.mean_swap", swap_exact, "⟨p_a,f⟩ = ⟨p_b,i⟩ and ⟨p_b,f⟩ = ⟨p_a,i⟩ exactly across the sweep");
    out.invariant(
        "collision.variance_addition",
        var_err <= 4.0 * f64::EPSILON,
        format!("V(p_a,f) = V(p_b,i) + V(P) to relative {}", sci(var_err)),
    );
    out.invariant("collision.product_negativity", product_en == 0.0, format!("max E_N over product inputs = {product_en}"));
    out.invariant(
        "collision.ppt_consistency",
        inconsistent.is_empty(),
        if inconsistent.is_empty() {
            "PPT physicality is false exactly where E_N > 0".to_string()
        } else {
            format!("E_N and PPT physicality disagree at V(P) = {inconsistent:?}")
        },
    );

    let (_, fin_w) = collide(witness)?;
    let en_w = log_negativity(&fin_w, &AB)?;
    let ppt_w = ppt_physicality(&fin_w, &AB)?;
    let moved = evolve(&fin_w, &local_map()?)?;
    let en_moved = log_negativity(&moved, &AB)?;
    let local_err = (en_w - en_moved).abs();
    out.invariant(
        "collision.local_invariance",
        local_err < 1e-7 * (1.0 + en_w),
        format!("E_N {en_w:.12} before, {en_moved:.12} after a local map"),
    );

    let f_vac = swap_fidelity(&collide(0.5)?.1, &b)?;
    let (first, last) = (sweep[0], sweep[sweep.len() - 1]);
    out.result("witness.log_negativity", en_w, Provenance::Covariance);
    out.result("vacuum.swap_fidelity", f_vac, Provenance::Covariance);
    out.result("sweep_min.swap_fidelity", first.swap_fidelity, Provenance::Covariance);
    out.result("sweep_min.momentum_swap_fidelity", first.momentum_swap_fidelity, Provenance::Covariance);
    out.result("sweep_min.log_negativity", first.log_negativity, Provenance::Covariance);
    out.result("sweep_max.swap_fidelity", last.swap_fidelity, Provenance::Covariance);
    out.result("sweep_max.log_negativity", last.log_negativity, Provenance::Covariance);

    out.finding(
        "swap_fidelity_sharp",
        first.swap_fidelity > 0.999,
        format!("F = {:.6} at V(P) = {lo:e}", first.swap_fidelity),
    );
    out.finding(
        "momentum_swap_fidelity_sharp",
        first.momentum_swap_fidelity > 0.999,
        format!("momentum-marginal fidelity {:.9} at V(P) = {lo:e}", first.momentum_swap_fidelity),
    );
    out.finding("swap_imperfect_at_vacuum", f_vac < 1.0, format!("F = {f_vac:.6} with a vacuum auxiliary"));
    out.finding(
        "entangled_at_witness",
        en_w > 0.0 && !ppt_w,
        format!("ab|c at V(P) = {witness}: E_N = {en_w:.6}, PPT physical = {ppt_w}"),
    );
    out.finding(
        "negativity_vanishes_for_wide_auxiliary",
        last.log_negativity < 1e-3,
        format!("E_N = {:.6} at V(P) = {hi:e}", last.log_negativity),
    );
    let same = squeezing_sweep(&a, &a, &[witness, 0.5, hi])?;
    let worst_same = same.iter().map(|s| s.swap_fidelity).fold(1.0, f64::min);
    out.finding(
        "identical_inputs_swap_perfectly",
        worst_same > 1.0 - 1e-9,
        format!("b = a: lowest F = {worst_same:.6} over V(P) ∈ {{{witness}, 0.5, {hi:e}}}"),
    );

    let mut t = Table::new(
        "collision_sweep.csv",
        &["p_variance", "swap_fidelity", "momentum_swap_fidelity", "log_negativity", "ppt_physical"],
    );
    for s in &sweep {
        t.push(&[
            s.p_variance,
            s.swap_fidelity,
            s.momentum_swap_fidelity,
            s.log_negativity,
            if s.ppt_physical { 1.0 } else { 0.0 },
        ]);
    }
    out.tables.push(t);
    Ok(out)
}
