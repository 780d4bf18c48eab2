use intervene_core::classical::{
    conditional_state, equivalent_pair, intervene_to_zero, outcome_distribution, GaussianMoment, MeasurementModel,
    SystemContext, ThermoLedger,
};
use intervene_core::grid::{apply_control, discretize, intervention_probability, measurement_update};
use intervene_core::montecarlo::{compare, run_trials, sample_trials, write_trials_csv, Comparison};
use intervene_core::{Grid1D, GridDistribution, RunSummary};

use super::{sci, timed};
use crate::config::RunConfig;
use crate::report::{Outcome, Provenance, Table};
use crate::CliError;

/// Grids narrower than this are too coarse for the 1e-5 agreement claim.
const AGREEMENT_POINTS: usize = 4096;
const AGREEMENT_L1: f64 = 1e-5;
const MASS_TOL: f64 = 1e-9;

fn context(cfg: &RunConfig) -> Result<(SystemContext, MeasurementModel), CliError> {
    let p = &cfg.params;
    let ctx = SystemContext::new(p.real("mass"), p.real("temperature"))?;
    let model = MeasurementModel::new(p.real("coupling"), p.real("apparatus_variance"))?;
    Ok((ctx, model))
}

fn ledger_results(out: &mut Outcome, prefix: &str, l: &ThermoLedger) {
    let rows = [
        ("sharpness", l.sharpness),
        ("mean_work", l.avg_work),
        ("mean_energy_change", l.avg_energy_change),
        ("efficiency", l.efficiency),
        ("efficiency_bound", l.efficiency_bound),
        ("entropy_change", l.entropy_change),
        ("mutual_information", l.mutual_information),
        ("free_energy_change", l.free_energy_change),
        ("extractable_work_bound", l.extractable_work_bound),
    ];
    for (name, v) in rows {
        out.result(&format!("{prefix}{name}"), v, Provenance::Analytic);
    }
}

fn rel(got: f64, want: f64) -> f64 {
    if got == want { 0.0 } else { ((got - want) / want).abs() }
}

/// Closed-form identities of the conservative ledger.
fn classical_invariants(out: &mut Outcome, ctx: &SystemContext, model: &MeasurementModel, l: &ThermoLedger) -> Result<(), CliError> {
    let prior = ctx.thermal_prior();
    let delta = prior.variance;
    let c = l.sharpness;
    let outcome = outcome_distribution(&prior, model);

    let mut worst: f64 = 0.0;
    let mut contracted = true;
    for k in [-2.0, 0.0, 2.0] {
        let post = conditional_state(&prior, model, k * outcome.std_dev())?;
        worst = worst.max(rel(post.variance, delta / c));
        contracted &= post.variance < delta;
    }
    out.invariant(
        "classical.posterior_contraction",
        contracted && worst < 1e-12,
        format!("V(p|x) = Δ/C to {} and below Δ = {delta}", sci(worst)),
    );

    let slope = (c - 1.0) / (c * model.coupling());
    let between = slope * slope * outcome.variance;
    let total = between + delta / c;
    let err = rel(total, delta);
    out.invariant(
        "classical.total_variance",
        err < 1e-12,
        format!("Var(E[p|x]) + E[V(p|x)] = {total} vs Δ = {delta} (rel {})", sci(err)),
    );

    let half = 0.5 * c.ln();
    let err = (l.entropy_change + l.mutual_information).abs().max((l.mutual_information - half).abs());
    out.invariant("classical.information_entropy_duality", err < 1e-12, format!("|ΔS + Ī|, |Ī − ½lnC| ≤ {}", sci(err)));

    let want = ((c - 1.0) / c).powi(2);
    let err = (l.efficiency - want).abs().max((l.efficiency + l.avg_energy_change / l.avg_work).abs());
    out.invariant("classical.efficiency_formula", err < 1e-12, format!("η = ((C−1)/C)² = |ΔŪ|/W̄ to {}", sci(err)));

    let mut last = 0.0;
    let mut monotone = true;
    for k in 0..=40 {
        let s = 1.0 + 10f64.powf(-2.0 + 0.15 * f64::from(k));
        let eta = ThermoLedger::conservative(*ctx, s)?.efficiency;
        monotone &= eta > last && eta < 1.0;
        last = eta;
    }
    out.invariant("classical.efficiency_monotone", monotone, format!("η rises towards 1 over C ∈ [1.01, 1e4], last {last:.6}"));

    let bound = -l.free_energy_change + ctx.temperature * l.mutual_information;
    let want = ctx.thermal_energy() * (c - 1.0) / c;
    let err = rel(bound, want).max(rel(l.extractable_work_bound, want));
    out.invariant(
        "classical.extractable_work_bound",
        err < 1e-12 && l.extractable_work_bound < l.avg_work,
        format!("W_ext = {} (rel {}) < W̄ = {}", l.extractable_work_bound, sci(err), l.avg_work),
    );
    Ok(())
}

fn grid_health(out: &mut Outcome, dists: &[(&str, &GridDistribution)]) {
    let mass_err = dists.iter().map(|(_, d)| (d.mass() - 1.0).abs()).fold(0.0, f64::max);
    out.invariant("grid.mass_conservation", mass_err < MASS_TOL, format!("max |mass − 1| = {}", sci(mass_err)));
    let negative: Vec<&str> = dists.iter().filter(|(_, d)| d.values().iter().any(|v| *v < 0.0)).map(|(n, _)| *n).collect();
    out.invariant(
        "grid.non_negativity",
        negative.is_empty(),
        if negative.is_empty() { "no negative densities".to_string() } else { format!("negative values in {negative:?}") },
    );
}

fn grid_agreement(out: &mut Outcome, points: usize, l1: &[(&str, f64)]) {
    let detail = l1.iter().map(|(n, v)| format!("{n} L1 {}", sci(*v))).collect::<Vec<_>>().join(", ");
    if points < AGREEMENT_POINTS {
        out.not_applicable("grid.analytic_agreement", format!("{points} points < {AGREEMENT_POINTS}; {detail}"));
    } else {
        let worst = l1.iter().map(|(_, v)| *v).fold(0.0, f64::max);
        out.invariant("grid.analytic_agreement", worst <= AGREEMENT_L1, detail);
    }
}

/// Interpolated shifts converge at second order in the spacing.
fn grid_refinement(out: &mut Outcome, prior: &GaussianMoment, points: usize) -> Result<(), CliError> {
    let coarse_points = (points / 2).max(257) | 1;
    let fine_points = 2 * coarse_points - 1;
    let half_width = 10.0 * prior.std_dev();
    let grid = |n| Grid1D::new(prior.mean - half_width, prior.mean + half_width, n);
    let coarse = grid(coarse_points)?.spacing();
    let shift = coarse * (37.0 + 1.0 / 3.0);
    let moved = GaussianMoment::new(prior.mean + shift, prior.variance)?;
    let error = |n: usize| -> Result<f64, CliError> {
        let g = grid(n)?;
        let got = apply_control(&discretize(prior, g)?, shift, 0.0)?;
        Ok(got.l1_distance(&discretize(&moved, g)?)?)
    };
    let (e1, e2) = (error(coarse_points)?, error(fine_points)?);
    out.invariant(
        "grid.refinement",
        e1 / e2 >= 3.0,
        format!("shift L1 {} → {} from {coarse_points} to {fine_points} points (ratio {:.2})", sci(e1), sci(e2), e1 / e2),
    );
    Ok(())
}

fn zscore_table(cmp: &Comparison) -> Table {
    let mut t = Table::new("mc_zscores.csv", &["quantity", "empirical", "std_error", "analytic", "z"]);
    for e in &cmp.entries {
        t.push_labelled(&e.name, &[e.empirical, e.std_error, e.analytic, e.z]);
    }
    t
}

fn bins_table(s: &RunSummary) -> Table {
    let mut t = Table::new(
        "mc_bins.csv",
        &["lower", "upper", "count", "mean_outcome", "mean_momentum", "var_momentum"],
    );
    for b in &s.binned_conditional_moments {
        t.push(&[b.lower, b.upper, b.count as f64, b.mean_outcome, b.mean_momentum, b.var_momentum]);
    }
    t
}

fn mc_results(out: &mut Outcome, s: &RunSummary) {
    let est = [
        ("mc.mean_work", s.mean_work),
        ("mc.mean_energy_change", s.mean_energy_change),
        ("mc.efficiency", s.empirical_efficiency),
        ("mc.conditional_slope", s.conditional_slope),
        ("mc.total_variance", s.variance_split.total),
    ];
    for (name, e) in est {
        out.result(name, e.value, Provenance::MonteCarlo);
        out.result(&format!("{name}_std_error"), e.std_error, Provenance::MonteCarlo);
    }
    out.result("mc.between_bin_variance", s.variance_split.between_bins, Provenance::MonteCarlo);
    out.result("mc.within_bin_variance", s.variance_split.within_bins, Provenance::MonteCarlo);
}

/// Invariants every sampled run must satisfy, plus one finding per
/// ledger comparison.
fn mc_checks(out: &mut Outcome, s: &RunSummary, again: &RunSummary, cmp: &Comparison) {
    out.invariant("mc.reproducibility", s == again, format!("seed {} rerun gives an identical summary", s.seed));
    let z = cmp.get("total_variance").map_or(f64::NAN, |e| e.z);
    out.invariant("mc.total_variance", z.abs() < 5.0, format!("total variance z = {z:.2}"));
    out.invariant(
        "mc.energy_extracted",
        s.mean_energy_change.value < 0.0,
        format!("mean ΔU = {:.6} ± {:.1e}", s.mean_energy_change.value, s.mean_energy_change.std_error),
    );
    for e in &cmp.entries {
        out.finding(
            &format!("mc_matches_ledger.{}", e.name),
            !e.flagged,
            format!("empirical {:.6} ± {:.1e} vs analytic {:.6} (z = {:.2})", e.empirical, e.std_error, e.analytic, e.z),
        );
    }
}

pub fn intervention(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let mut out = Outcome::default();
    let (ctx, model) = context(cfg)?;
    let points = cfg.params.count("grid_points");
    let trials = cfg.params.count("trials");

    let ledger = timed(&mut out, "analytic", || intervene_to_zero(&ctx, &model))?;
    ledger_results(&mut out, "", &ledger);
    classical_invariants(&mut out, &ctx, &model, &ledger)?;

    let start = std::time::Instant::now();
    let prior = ctx.thermal_prior();
    let outcome = outcome_distribution(&prior, &model);
    let reading = outcome.std_dev();
    let grid = Grid1D::around(&prior, 8.0, points)?;
    let d = discretize(&prior, grid)?;
    let (post, density) = measurement_update(&d, &model, reading)?;
    let want_post = conditional_state(&prior, &model, reading)?;
    let fin = apply_control(&post, -post.mean(), 0.0)?;
    let want_fin = GaussianMoment::new(0.0, want_post.variance)?;
    let px = intervention_probability(&d, &model, Grid1D::around(&outcome, 8.0, points)?)?;
    let l1 = [
        ("posterior", post.l1_distance(&discretize(&want_post, grid)?)?),
        ("controlled", fin.l1_distance(&discretize(&want_fin, grid)?)?),
        ("outcome", px.l1_distance(&discretize(&outcome, *px.grid())?)?),
    ];
    out.result("grid.reading", reading, Provenance::Grid);
    out.result("grid.outcome_density", density, Provenance::Grid);
    out.result("grid.posterior_mean", post.mean(), Provenance::Grid);
    out.result("grid.posterior_variance", post.variance(), Provenance::Grid);
    out.result("grid.final_mean", fin.mean(), Provenance::Grid);
    out.result("grid.final_variance", fin.variance(), Provenance::Grid);
    grid_health(&mut out, &[("posterior", &post), ("controlled", &fin), ("outcome", &px)]);
    grid_agreement(&mut out, points, &l1);
    grid_refinement(&mut out, &prior, points)?;
    out.timings.push(("grid".into(), start.elapsed().as_secs_f64()));

    let (s, again) = timed(&mut out, "monte_carlo", || {
        Ok::<_, CliError>((run_trials(&ctx, &model, trials, cfg.seed)?, run_trials(&ctx, &model, trials, cfg.seed)?))
    })?;
    let cmp = compare(&s, &ledger)?;
    mc_results(&mut out, &s);
    mc_checks(&mut out, &s, &again, &cmp);
    out.tables.push(zscore_table(&cmp));
    out.tables.push(bins_table(&s));
    Ok(out)
}

pub fn equivalence_pair(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let mut out = Outcome::default();
    let p = &cfg.params;
    let ctx = SystemContext::new(p.real("mass"), p.real("temperature"))?;
    let (target, noise, reading) = (p.real("target_variance"), p.real("noise"), p.real("reading"));
    let points = p.count("grid_points");

    let pair = timed(&mut out, "analytic", || equivalent_pair(&ctx, target, noise))?;
    out.result("sigma_conservative", pair.sigma_conservative, Provenance::Analytic);
    out.result("sigma_noisy", pair.sigma_noisy, Provenance::Analytic);
    ledger_results(&mut out, "conservative.", &pair.conservative);
    ledger_results(&mut out, "noisy.", &pair.noisy);
    out.result("conservative.final_variance", pair.final_conservative.variance, Provenance::Analytic);
    out.result("noisy.final_variance", pair.final_noisy.variance, Provenance::Analytic);

    let (f1, f2) = (pair.final_conservative, pair.final_noisy);
    let diff = (f1.mean - f2.mean).abs().max((f1.variance - f2.variance).abs());
    out.invariant("classical.equivalent_final_states", diff < 1e-12, format!("final moments differ by {}", sci(diff)));

    let start = std::time::Instant::now();
    let prior = ctx.thermal_prior();
    let grid = Grid1D::around(&prior, 8.0, points)?;
    let d = discretize(&prior, grid)?;
    let (post1, _) = measurement_update(&d, &pair.model_conservative(), reading)?;
    let (post2, _) = measurement_update(&d, &pair.model_noisy(), reading)?;
    let fin1 = apply_control(&post1, -post1.mean(), 0.0)?;
    let fin2 = apply_control(&post2, -post2.mean(), noise)?;
    let want = discretize(&GaussianMoment::new(0.0, target)?, grid)?;
    let between = fin1.l1_distance(&fin2)?;
    out.result("grid.final_variance_conservative", fin1.variance(), Provenance::Grid);
    out.result("grid.final_variance_noisy", fin2.variance(), Provenance::Grid);
    out.result("grid.final_l1_between_protocols", between, Provenance::Grid);
    grid_health(&mut out, &[("conservative", &fin1), ("noisy", &fin2)]);
    grid_agreement(
        &mut out,
        points,
        &[
            ("conservative", fin1.l1_distance(&want)?),
            ("noisy", fin2.l1_distance(&want)?),
            ("between", between),
        ],
    );
    out.timings.push(("grid".into(), start.elapsed().as_secs_f64()));

    let (e1, e2) = (pair.conservative.efficiency, pair.noisy.efficiency);
    out.finding("noisy_protocol_less_efficient", e2 < e1, format!("η conservative {e1:.6}, η noisy {e2:.6}"));
    Ok(out)
}

pub fn mc_validate(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let mut out = Outcome::default();
    let (ctx, model) = context(cfg)?;
    let trials = cfg.params.count("trials");

    let ledger = intervene_to_zero(&ctx, &model)?;
    let s = timed(&mut out, "monte_carlo", || run_trials(&ctx, &model, trials, cfg.seed))?;
    let again = run_trials(&ctx, &model, trials, cfg.seed)?;
    let pooled = |threads: usize| -> Result<RunSummary, CliError> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| intervene_core::Error::Precondition(format!("thread pool: {e}")))?;
        Ok(pool.install(|| run_trials(&ctx, &model, trials, cfg.seed))?)
    };
    let (single, many) = timed(&mut out, "thread_pools", || Ok::<_, CliError>((pooled(1)?, pooled(4)?)))?;
    let cmp = compare(&s, &ledger)?;
    mc_results(&mut out, &s);
    mc_checks(&mut out, &s, &again, &cmp);
    out.invariant(
        "mc.thread_independence",
        s == single && s == many,
        "summaries from 1-thread, 4-thread and default pools are identical",
    );

    // A ledger built for the wrong apparatus must be rejected by the z-test.
    let wrong = MeasurementModel::new(model.coupling(), cfg.params.real("control_variance"))?;
    let control = compare(&s, &intervene_to_zero(&ctx, &wrong)?)?;
    let worst = control.entries.iter().map(|e| e.z.abs()).fold(0.0, f64::max);
    out.invariant(
        "mc.negative_control",
        control.any_flagged(),
        format!("ledger for σ = {} gives max |z| = {worst:.1}", wrong.apparatus_variance()),
    );

    out.tables.push(zscore_table(&cmp));
    out.tables.push(bins_table(&s));
    if cfg.params.flag("write_trials") {
        let records = timed(&mut out, "trials_csv", || sample_trials(&ctx, &model, trials, cfg.seed))?;
        let path = cfg.output_dir.join("trials.csv");
        let file = std::fs::File::create(&path).map_err(|source| CliError::Write { path: path.clone(), source })?;
        write_trials_csv(&records, std::io::BufWriter::new(file))?;
        out.extra_files.push("trials.csv".into());
    }
    Ok(out)
}
