//! Acceptance run: one line per criterion.
//!
//! Each criterion is a list of sub-checks. A handful of sub-checks test
//! statements that the independent oracles in this repository show to be
//! false; they are evaluated and printed like every other check, and listed
//! in [`KNOWN_FALSE`] so that their failure does not fail the run. Any other
//! failing sub-check exits with status 1.

use std::f64::consts::LN_2;
use std::process::ExitCode;
use std::time::Instant;

use intervene_core::classical::{equivalent_pair, mutual_information, SystemContext, ThermoLedger};
use intervene_core::collision::{
    evolve, log_negativity, momentum_swap_fidelity, ppt_physicality, swap_fidelity, symplectic_of_generators,
    CovarianceState, MODE_A, MODE_B,
};
use intervene_core::fock::{
    parity_feedback, uncertainty_report, DensityMatrix, FockSpace, MeasurementPair, QuantumLedger,
};
use intervene_core::grid::{collision_map, discretize, Grid1D, GridDistribution, JointDistribution};
use intervene_core::montecarlo::{compare, run_trials};
use intervene_core::{GaussianMoment, MeasurementModel};

const KNOWN_FALSE: &[&str] = &["4.mean_work", "5.noisy_less_efficient", "8.entropy_excess_ln2", "9.half_regime_sharp", "10.sharp_swap_fidelity"];

const SWEEP: [f64; 4] = [1.5, 2.0, 5.0, 100.0];

struct Check {
    key: String,
    passed: bool,
    detail: String,
}

struct Criterion {
    id: u32,
    title: &'static str,
    checks: Vec<Check>,
}

impl Criterion {
    fn new(id: u32, title: &'static str) -> Self {
        Self { id, title, checks: Vec::new() }
    }

    fn check(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check { key: format!("{}.{name}", self.id), passed, detail: detail.into() });
    }
}

fn normal(mean: f64, var: f64) -> GaussianMoment {
    GaussianMoment::new(mean, var).unwrap()
}

fn efficiency_formula() -> Criterion {
    let mut c = Criterion::new(1, "efficiency formula");
    let ctx = SystemContext::default();
    let mut worst: f64 = 0.0;
    let mut previous = 0.0;
    let mut monotone = true;
    for s in SWEEP {
        let l = ThermoLedger::conservative(ctx, s).unwrap();
        let want = ((s - 1.0) / s).powi(2);
        worst = worst.max((l.efficiency - want).abs());
        monotone &= l.efficiency > previous;
        previous = l.efficiency;
    }
    c.check("closed_form", worst < 1e-12, format!("max |η − ((C−1)/C)²| = {worst:.2e}"));
    let dense: Vec<f64> = (0..200)
        .map(|k| 1.0 + 10f64.powf(-3.0 + 0.05 * k as f64))
        .map(|s| ThermoLedger::conservative(ctx, s).unwrap().efficiency)
        .collect();
    monotone &= dense.windows(2).all(|w| w[1] > w[0]);
    let tail = ThermoLedger::conservative(ctx, 1e8).unwrap().efficiency;
    c.check("monotone_to_one", monotone && 1.0 - tail < 1e-7, format!("η(C=1e8) = 1 − {:.1e}", 1.0 - tail));
    c
}

/// `Ī = ∫∫ P(p) P(x|p) ln[P(x|p)/P(x)]` by two-dimensional trapezoid quadrature.
fn mutual_information_quadrature(delta: f64, coupling: f64, sigma: f64) -> f64 {
    let n = 1601;
    let sp = delta.sqrt();
    let sx = (coupling * coupling * delta + sigma).sqrt();
    let (p0, x0) = (-12.0 * sp, -12.0 * sx);
    let (hp, hx) = (24.0 * sp / (n - 1) as f64, 24.0 * sx / (n - 1) as f64);
    let gauss = |z: f64, var: f64| (-z * z / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt();
    let weight = |i: usize| if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
    let mut total = 0.0;
    for i in 0..n {
        let p = p0 + i as f64 * hp;
        let pp = gauss(p, delta);
        let mut row = 0.0;
        for j in 0..n {
            let x = x0 + j as f64 * hx;
            let k = gauss(x - coupling * p, sigma);
            if k > 0.0 {
                row += weight(j) * k * (k / gauss(x, sx * sx)).ln();
            }
        }
        total += weight(i) * pp * row * hx;
    }
    total * hp
}

fn information_entropy_duality() -> Criterion {
    let mut c = Criterion::new(2, "information-entropy duality");
    let ctx = SystemContext::default();
    let mut worst: f64 = 0.0;
    let mut worst_quad: f64 = 0.0;
    for s in SWEEP {
        let l = ThermoLedger::conservative(ctx, s).unwrap();
        let half = 0.5 * s.ln();
        worst = worst.max((l.entropy_change + half).abs()).max((l.mutual_information - half).abs());
        // Δ = 1, μ = 1, σ = 1/(C − 1)
        let quad = mutual_information_quadrature(1.0, 1.0, 1.0 / (s - 1.0));
        worst_quad = worst_quad.max((quad - mutual_information(s).unwrap()).abs());
    }
    c.check("closed_form", worst < 1e-12, format!("max |ΔS + ½lnC|, |Ī − ½lnC| = {worst:.2e}"));
    c.check("quadrature", worst_quad < 1e-6, format!("max |Ī_quad − ½lnC| = {worst_quad:.2e}"));
    c
}

fn extractable_work_bound() -> Criterion {
    let mut c = Criterion::new(3, "extractable-work bound");
    let mut worst: f64 = 0.0;
    let mut strict = true;
    for ctx in [SystemContext::default(), SystemContext::new(2.0, 0.5).unwrap(), SystemContext::new(0.3, 3.0).unwrap()] {
        for s in SWEEP.iter().copied().chain([1.0001, 1e6]) {
            let l = ThermoLedger::conservative(ctx, s).unwrap();
            let bound = -l.free_energy_change + ctx.temperature * l.mutual_information;
            let want = ctx.thermal_energy() * (s - 1.0) / s;
            worst = worst.max((bound - want).abs()).max((l.extractable_work_bound - want).abs());
            strict &= l.extractable_work_bound < l.avg_work;
        }
    }
    c.check("closed_form", worst < 1e-12, format!("max |W_ext − (Δ/2m)(C−1)/C| = {worst:.2e}"));
    c.check("below_mean_work", strict, "W_ext < W̄ at every finite C");
    c
}

fn monte_carlo() -> Criterion {
    let mut c = Criterion::new(4, "monte carlo validation");
    let ctx = SystemContext::default();
    let model = MeasurementModel::new(1.0, 1.0).unwrap();
    let seed = 20_240_601;
    let summary = run_trials(&ctx, &model, 1_000_000, seed).unwrap();
    let ledger = ThermoLedger::conservative(ctx, summary.sharpness).unwrap();
    let cmp = compare(&summary, &ledger).unwrap();
    for name in ["mean_work", "mean_energy_change", "conditional_slope"] {
        let z = cmp.get(name).unwrap();
        c.check(
            name,
            !z.flagged,
            format!("{name} {:.5} vs {:.5} (z = {:.1})", z.empirical, z.analytic, z.z),
        );
    }
    let again = run_trials(&ctx, &model, 1_000_000, seed).unwrap();
    c.check("reproducible", again == summary, "identical seed, identical summary");
    c
}

fn equivalent_interventions() -> Criterion {
    let mut c = Criterion::new(5, "equivalent interventions");
    let ctx = SystemContext::new(2.0, 1.0).unwrap();
    let pair = equivalent_pair(&ctx, 1.0, 0.5).unwrap();
    let (f1, f2) = (pair.final_conservative, pair.final_noisy);
    let diff = (f1.mean - f2.mean).abs().max((f1.variance - f2.variance).abs());
    c.check("same_final_state", diff < 1e-12, format!("final states differ by {diff:.1e}"));
    let (e1, e2) = (pair.conservative.efficiency, pair.noisy.efficiency);
    c.check("noisy_less_efficient", e2 < e1, format!("η conservative {e1:.4}, η noisy {e2:.4}"));
    c
}

fn grid_collision() -> Criterion {
    let mut c = Criterion::new(6, "grid collision laws");
    let (pa, pb) = (normal(1.0, 0.5), normal(-1.0, 0.5));
    let grid = Grid1D::symmetric(10.0, 1023).unwrap();
    let a = discretize(&pa, grid).unwrap();
    let b = discretize(&pb, grid).unwrap();
    let (mut mean_err, mut var_err): (f64, f64) = (0.0, 0.0);
    for ve in [0.0, 0.1, 1.0] {
        let eps = if ve == 0.0 {
            GridDistribution::point_mass(grid, 0.0).unwrap()
        } else {
            discretize(&normal(0.0, ve), grid).unwrap()
        };
        let joint = collision_map(&a, &b, &eps).unwrap();
        let (fa, fb) = (joint.marginal_a(), joint.marginal_b());
        mean_err = mean_err.max(((fa.mean() - pb.mean) / pb.mean).abs()).max(((fb.mean() - pa.mean) / pa.mean).abs());
        let (wa, wb) = (pb.variance + ve, pa.variance + ve);
        var_err = var_err.max(((fa.variance() - wa) / wa).abs()).max(((fb.variance() - wb) / wb).abs());
    }
    c.check("mean_swap", mean_err < 1e-4, format!("relative mean error {mean_err:.1e}"));
    c.check("variance_addition", var_err < 1e-4, format!("relative variance error {var_err:.1e}"));

    let narrow = Grid1D::symmetric(6.0, 1023).unwrap();
    let a = discretize(&pa, narrow).unwrap();
    let b = discretize(&pb, narrow).unwrap();
    let eps = discretize(&normal(0.0, 1e-4), narrow).unwrap();
    let joint = collision_map(&a, &b, &eps).unwrap();
    let l1 = joint.l1_distance(&JointDistribution::product(&b, &a).unwrap()).unwrap();
    c.check("delta_limit", l1 < 1e-3, format!("L1 to swapped product at V(ε)=1e-4: {l1:.1e}"));
    c
}

fn kraus_algebra() -> Criterion {
    let mut c = Criterion::new(7, "POVM and Kraus algebra");
    let space = FockSpace::new(64).unwrap();
    let worst = [1e-3, 0.1, 1.0, 10.0]
        .into_iter()
        .map(|l| MeasurementPair::build(&space, l).unwrap().completeness_error())
        .fold(0.0, f64::max);
    c.check("completeness", worst < 1e-10, format!("max ‖ΣM†M − 1‖ = {worst:.1e}"));
    c
}

fn feedback_ledger(nbar: f64, lambda: f64, dim: usize) -> QuantumLedger {
    let space = FockSpace::new(dim).unwrap();
    let rho = DensityMatrix::thermal(&space, nbar).unwrap();
    parity_feedback(&rho, &MeasurementPair::build(&space, lambda).unwrap()).unwrap().1
}

fn quantum_entropy() -> Criterion {
    let mut c = Criterion::new(8, "quantum entropy bookkeeping");
    let l = feedback_ledger(1.0, 1e-2, 64);
    let excess = l.measurement_entropy_excess;
    c.check(
        "entropy_excess_ln2",
        (excess - LN_2).abs() <= 0.01,
        format!("S(ρ′) − H(p_n) = {excess:.4} vs ln 2 = {LN_2:.4}"),
    );
    let removed = l.feedback_entropy_reduction;
    c.check("feedback_removes_ln2", (removed - LN_2).abs() <= 0.01, format!("feedback removes {removed:.4}"));
    let drift = (l.energy_after_feedback - l.energy_after_measurement).abs();
    c.check("energy_neutral", drift < 1e-10, format!("feedback energy change {drift:.1e}"));
    c
}

fn uncertainty_energy() -> Criterion {
    let mut c = Criterion::new(9, "uncertainty-energy bound");
    let mut detail = Vec::new();
    let mut all = true;
    for nbar in [1.0, 2.0, 5.0] {
        let space = FockSpace::new(256).unwrap();
        let rho = DensityMatrix::thermal(&space, nbar).unwrap();
        let mut tested = 0;
        for lambda in [0.3, 0.5, 0.7, 1.0] {
            let pair = MeasurementPair::build(&space, lambda).unwrap();
            let r = uncertainty_report(&rho, nbar, &pair).unwrap();
            let guarded = parity_feedback(&rho, &pair).unwrap().1.truncation_converged;
            if r.in_half_regime() && guarded {
                tested += 1;
                all &= r.increase_bound_holds();
                detail.push(format!("{:.3}≤{:.2}", r.energy_increase, r.increase_bound));
            }
        }
        all &= tested > 0;
    }
    c.check("half_regime_guarded", all, format!("guarded points with γ ≤ ½: {}", detail.join(", ")));

    // Sharper measurements cut the wavefunction at q = 0 and ΔĒ grows
    // without bound; the guard trips first, so show convergence in N instead.
    let mut sharp = Vec::new();
    let mut last = (0.0, 0.0, 1.0);
    for dim in [128, 256, 512] {
        let space = FockSpace::new(dim).unwrap();
        let rho = DensityMatrix::thermal(&space, 1.0).unwrap();
        let r = uncertainty_report(&rho, 1.0, &MeasurementPair::build(&space, 0.1).unwrap()).unwrap();
        sharp.push(format!("{:.3}", r.energy_increase));
        last = (r.energy_increase, r.increase_bound, r.gamma_q);
    }
    c.check(
        "half_regime_sharp",
        last.0 <= last.1 && last.2 <= 0.5,
        format!("n̄=1 λ=0.1 γ={:.3}: ΔĒ over N=128,256,512 = {} vs bound {:.2}", last.2, sharp.join(", "), last.1),
    );

    let mut high = Vec::new();
    let mut ok = true;
    for nbar in [5.0, 10.0, 20.0] {
        let space = FockSpace::for_thermal(nbar).unwrap();
        let rho = DensityMatrix::thermal(&space, nbar).unwrap();
        let l = parity_feedback(&rho, &MeasurementPair::build(&space, 1e-2).unwrap()).unwrap().1;
        let kt = 1.0 / (1.0 + 1.0 / nbar).ln();
        let bound = 1.1 * kt * LN_2;
        ok &= l.energy_increase.abs() <= bound;
        high.push(format!("{:.2}≤{:.2}", l.energy_increase, bound));
    }
    c.check("high_temperature", ok, format!("ΔĒ vs 1.1·k_BT ln 2: {}", high.join(", ")));
    c
}

fn quantum_collision() -> Criterion {
    let mut c = Criterion::new(10, "collision quantum backend");
    let (su, sv, svu) = symplectic_of_generators();
    let dev = su.deviation().max(sv.deviation()).max(svu.deviation());
    c.check("symplectic", dev < 1e-12, format!("max |SΩSᵀ − Ω| = {dev:.1e}"));

    let a = CovarianceState::single_mode(0.0, 1.0, 0.5, 0.5).unwrap();
    let b = CovarianceState::single_mode(0.0, -1.0, 0.5, 0.5).unwrap();
    let run = |v: f64| evolve(&CovarianceState::collision_input(&a, &b, v).unwrap(), &svu).unwrap();
    let fin = run(0.3);
    let exact = fin.covariance()[(1, 1)] == 0.5 + 0.3 && fin.covariance()[(3, 3)] == 0.5 + 0.3;
    c.check("variance_addition", exact, "V(p_a,f) = V(p_b,i) + V(P) bit for bit");

    let sharp = run(1e-6);
    let f_sharp = swap_fidelity(&sharp, &b).unwrap();
    let m_sharp = momentum_swap_fidelity(&sharp, &b).unwrap();
    c.check(
        "sharp_swap_fidelity",
        f_sharp > 0.999,
        format!("F = {f_sharp:.4} at V(P)=1e-6 (momentum marginal {m_sharp:.7})"),
    );
    let f_vac = swap_fidelity(&run(0.5), &b).unwrap();
    c.check("vacuum_swap_fidelity", f_vac < 1.0, format!("F = {f_vac:.4} at vacuum"));

    let en = log_negativity(&fin, &[MODE_A, MODE_B]).unwrap();
    let ppt = ppt_physicality(&fin, &[MODE_A, MODE_B]).unwrap();
    c.check("entangled", en > 0.0 && !ppt, format!("ab|c: E_N = {en:.3}, PPT physical = {ppt}"));
    let product = CovarianceState::collision_input(&a, &b, 0.3).unwrap();
    let e0 = log_negativity(&product, &[MODE_A, MODE_B]).unwrap();
    c.check("product_state", e0 == 0.0, format!("E_N(product) = {e0}"));
    c
}

fn truncation_robustness() -> Criterion {
    let mut c = Criterion::new(11, "truncation robustness");
    let mut worst: f64 = 0.0;
    let mut guarded = true;
    for (nbar, lambda) in [(1.0, 1.0), (0.5, 1.0), (1.0, 2.0)] {
        let (s, l) = (feedback_ledger(nbar, lambda, 64), feedback_ledger(nbar, lambda, 128));
        guarded &= s.truncation_converged && l.truncation_converged;
        let pairs = [
            (s.energy_increase, l.energy_increase),
            (s.energy_after_feedback, l.energy_after_feedback),
            (s.probability_plus, l.probability_plus),
            (s.entropy_unconditional, l.entropy_unconditional),
            (s.entropy_final, l.entropy_final),
            (s.population_entropy, l.population_entropy),
            (s.holevo_information, l.holevo_information),
            (s.feedback_entropy_reduction, l.feedback_entropy_reduction),
            (s.measurement_entropy_excess, l.measurement_entropy_excess),
        ];
        worst = pairs.iter().map(|(x, y)| (x - y).abs()).fold(worst, f64::max);
    }
    let leaky = feedback_ledger(1.0, 1e-2, 64);
    c.check(
        "guarded_scalars",
        guarded && worst < 1e-6,
        format!(
            "max change 64→128 = {worst:.1e} on guarded states; λ=1e-2 is unguarded (leakage {:.1e})",
            leaky.post_measurement_leakage
        ),
    );
    c
}

fn main() -> ExitCode {
    let runs: [fn() -> Criterion; 11] = [
        efficiency_formula,
        information_entropy_duality,
        extractable_work_bound,
        monte_carlo,
        equivalent_interventions,
        grid_collision,
        kraus_algebra,
        quantum_entropy,
        uncertainty_energy,
        quantum_collision,
        truncation_robustness,
    ];
    let mut unexpected = Vec::new();
    for run in runs {
        let start = Instant::now();
        let criterion = run();
        let secs = start.elapsed().as_secs_f64();
        let pass = criterion.checks.iter().all(|k| k.passed);
        let parts: Vec<String> = criterion
            .checks
            .iter()
            .map(|k| format!("{} {}: {}", if k.passed { "ok" } else { "FAIL" }, k.key, k.detail))
            .collect();
        println!(
            "criterion {:>2} [{}] {} ({secs:.2}s) | {}",
            criterion.id,
            if pass { "PASS" } else { "FAIL" },
            criterion.title,
            parts.join(" | ")
        );
        unexpected.extend(criterion.checks.iter().filter(|k| !k.passed && !KNOWN_FALSE.contains(&k.key.as_str())).map(|k| k.key.clone()));
    }
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        eprintln!("unexpected failures: {}", unexpected.join(", "));
        ExitCode::FAILURE
    }
}
