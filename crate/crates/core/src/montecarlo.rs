//! Trajectory sampling of the classical shift-to-zero protocol.
//!
//! Each trial draws `p ~ N(0, Δ)`, reads `x ~ N(μp, σ)`, applies the shift
//! `−((C−1)/C)·x/μ` and records the work `shift²/2m` and the kinetic energy
//! change. Trials are generated in fixed-size chunks; chunk `k` draws from
//! ChaCha8 seeded with the run seed on stream `k`, so every trial's random
//! numbers depend only on `(seed, index)`. Chunk accumulators are reduced in
//! chunk order, which makes a summary bitwise reproducible whatever the
//! thread count.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::classical::{outcome_distribution, sharpness, MeasurementModel, SystemContext, ThermoLedger};
use crate::error::{Error, Result};

pub const MIN_TRIALS: usize = 1000;
pub const OUTCOME_BINS: usize = 32;
/// Trials per RNG stream.
const CHUNK: usize = 8192;
/// Comparisons with `|z|` above this are flagged.
pub const Z_THRESHOLD: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub prior_sample: f64,
    pub outcome: f64,
    pub shift_applied: f64,
    pub work: f64,
    pub post_momentum: f64,
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinMoments {
    pub lower: f64,
    pub upper: f64,
    pub count: u64,
    pub mean_outcome: f64,
    pub mean_momentum: f64,
    /// Population variance of the prior momentum within the bin.
    pub var_momentum: f64,
}

/// Decomposition `Var(p) = Var(E[p|bin]) + E[Var(p|bin)]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceSplit {
    pub between_bins: f64,
    pub within_bins: f64,
    /// `between + within`, with the standard error of a sample variance.
    pub total: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub n_trials: usize,
    pub seed: u64,
    pub context: SystemContext,
    pub coupling: f64,
    pub apparatus_variance: f64,
    pub sharpness: f64,
    pub mean_work: Estimate,
    pub mean_energy_change: Estimate,
    /// `(|ΔŪ| / Ū_initial)²`, with a delta-method standard error.
    pub empirical_efficiency: Estimate,
    /// Weighted least-squares slope of bin-mean momentum on bin-mean outcome.
    pub conditional_slope: Estimate,
    pub variance_split: VarianceSplit,
    pub binned_conditional_moments: Vec<BinMoments>,
}

#[derive(Debug, Clone, Default)]
struct Acc {
    n: u64,
    work: [f64; 2],
    du: [f64; 2],
    ui: [f64; 2],
    du_ui: f64,
    // Σp, Σp², Σp³, Σp⁴
    p: [f64; 4],
    bins: Vec<BinAcc>,
}

#[derive(Debug, Clone, Copy, Default)]
struct BinAcc {
    n: u64,
    x: f64,
    p: f64,
    p2: f64,
}

impl Acc {
    fn new() -> Self {
        Self { bins: vec![BinAcc::default(); OUTCOME_BINS], ..Default::default() }
    }

    fn push(&mut self, t: &TrialRecord, mass: f64, bin: usize) {
        let ui = t.prior_sample * t.prior_sample / (2.0 * mass);
        let du = t.post_momentum * t.post_momentum / (2.0 * mass) - ui;
        self.n += 1;
        self.work[0] += t.work;
        self.work[1] += t.work * t.work;
        self.du[0] += du;
        self.du[1] += du * du;
        self.ui[0] += ui;
        self.ui[1] += ui * ui;
        self.du_ui += du * ui;
        let p = t.prior_sample;
        self.p[0] += p;
        self.p[1] += p * p;
        self.p[2] += p * p * p;
        self.p[3] += p * p * p * p;
        let b = &mut self.bins[bin];
        b.n += 1;
        b.x += t.outcome;
        b.p += p;
        b.p2 += p * p;
    }

    fn merge(mut self, o: &Acc) -> Self {
        self.n += o.n;
        for k in 0..2 {
            self.work[k] += o.work[k];
            self.du[k] += o.du[k];
            self.ui[k] += o.ui[k];
        }
        self.du_ui += o.du_ui;
        for k in 0..4 {
            self.p[k] += o.p[k];
        }
        for (b, ob) in self.bins.iter_mut().zip(&o.bins) {
            b.n += ob.n;
            b.x += ob.x;
            b.p += ob.p;
            b.p2 += ob.p2;
        }
        self
    }
}

struct Protocol {
    ctx: SystemContext,
    coupling: f64,
    noise_sd: f64,
    gain: f64,
    edges: Vec<f64>,
}

impl Protocol {
    fn new(ctx: &SystemContext, model: &MeasurementModel) -> Result<(Self, f64)> {
        let prior = ctx.thermal_prior();
        let c = sharpness(&prior, model)?;
        let outcomes = outcome_distribution(&prior, model);
        let normal = Normal::new(outcomes.mean, outcomes.std_dev())
            .map_err(|e| Error::Precondition(format!("outcome distribution: {e}")))?;
        let edges = (1..OUTCOME_BINS).map(|k| normal.inverse_cdf(k as f64 / OUTCOME_BINS as f64)).collect();
        Ok((
            Self {
                ctx: *ctx,
                coupling: model.coupling(),
                noise_sd: model.apparatus_variance().sqrt(),
                gain: (c - 1.0) / c,
                edges,
            },
            c,
        ))
    }

    fn trial(&self, rng: &mut ChaCha8Rng) -> TrialRecord {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        let p = self.ctx.thermal_variance().sqrt() * z1;
        let x = self.coupling * p + self.noise_sd * z2;
        let shift = -self.gain * x / self.coupling;
        TrialRecord {
            prior_sample: p,
            outcome: x,
            shift_applied: shift,
            work: shift * shift / (2.0 * self.ctx.mass),
            post_momentum: p + shift,
        }
    }

    fn bin(&self, x: f64) -> usize {
        self.edges.partition_point(|e| *e <= x)
    }

    fn chunk(&self, seed: u64, k: usize, n: usize, mut visit: impl FnMut(&TrialRecord)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k as u64);
        let len = CHUNK.min(n - k * CHUNK);
        for _ in 0..len {
            visit(&self.trial(&mut rng));
        }
    }
}

fn check_n(n: usize) -> Result<()> {
    if n < MIN_TRIALS {
        return Err(Error::InsufficientTrials { requested: n, minimum: MIN_TRIALS });
    }
    Ok(())
}

/// Run `n` trials of the shift-to-zero protocol on a thermal particle.
pub fn run_trials(ctx: &SystemContext, model: &MeasurementModel, n: usize, seed: u64) -> Result<RunSummary> {
    check_n(n)?;
    let (proto, c) = Protocol::new(ctx, model)?;
    let chunks = n.div_ceil(CHUNK);
    let partial: Vec<Acc> = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut acc = Acc::new();
            proto.chunk(seed, k, n, |t| acc.push(t, ctx.mass, proto.bin(t.outcome)));
            acc
        })
        .collect();
    let acc = partial.iter().fold(Acc::new(), |a, b| a.merge(b));
    Ok(summarize(&proto, &acc, seed, c, model))
}

/// The individual trials of [`run_trials`], in index order.
pub fn sample_trials(ctx: &SystemContext, model: &MeasurementModel, n: usize, seed: u64) -> Result<Vec<TrialRecord>> {
    check_n(n)?;
    let (proto, _) = Protocol::new(ctx, model)?;
    let mut out = Vec::with_capacity(n);
    for k in 0..n.div_ceil(CHUNK) {
        proto.chunk(seed, k, n, |t| out.push(*t));
    }
    Ok(out)
}

pub fn write_trials_csv<W: Write>(trials: &[TrialRecord], out: W) -> Result<()> {
    let io = |e: csv::Error| Error::Precondition(format!("csv write failed: {e}"));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["prior_sample", "outcome", "shift_applied", "work", "post_momentum"]).map_err(io)?;
    for t in trials {
        let row = [t.prior_sample, t.outcome, t.shift_applied, t.work, t.post_momentum].map(crate::format_f64);
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|e| Error::Precondition(format!("csv write failed: {e}")))?;
    Ok(())
}

fn mean_se(sum: f64, sum_sq: f64, n: f64) -> Estimate {
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0) * n / (n - 1.0);
    Estimate { value: mean, std_error: (var / n).sqrt() }
}

fn summarize(proto: &Protocol, acc: &Acc, seed: u64, c: f64, model: &MeasurementModel) -> RunSummary {
    let n = acc.n as f64;
    let mean_work = mean_se(acc.work[0], acc.work[1], n);
    let mean_energy_change = mean_se(acc.du[0], acc.du[1], n);

    let du = acc.du[0] / n;
    let ui = acc.ui[0] / n;
    let var_du = acc.du[1] / n - du * du;
    let var_ui = acc.ui[1] / n - ui * ui;
    let cov = acc.du_ui / n - du * ui;
    let r = du / ui;
    let var_r = (var_du - 2.0 * r * cov + r * r * var_ui) / (ui * ui * n);
    let empirical_efficiency = Estimate { value: r * r, std_error: 2.0 * r.abs() * var_r.max(0.0).sqrt() };

    let mut lower = f64::NEG_INFINITY;
    let bins: Vec<BinMoments> = acc
        .bins
        .iter()
        .enumerate()
        .map(|(k, b)| {
            let upper = proto.edges.get(k).copied().unwrap_or(f64::INFINITY);
            let bn = b.n.max(1) as f64;
            let mean_p = b.p / bn;
            let row = BinMoments {
                lower,
                upper,
                count: b.n,
                mean_outcome: b.x / bn,
                mean_momentum: mean_p,
                var_momentum: (b.p2 / bn - mean_p * mean_p).max(0.0),
            };
            lower = upper;
            row
        })
        .collect();

    let conditional_slope = weighted_slope(&bins);

    let mean_p = acc.p[0] / n;
    let between: f64 = bins.iter().map(|b| b.count as f64 / n * (b.mean_momentum - mean_p).powi(2)).sum();
    let within: f64 = bins.iter().map(|b| b.count as f64 / n * b.var_momentum).sum();
    let (m1, m2, m3, m4) = (mean_p, acc.p[1] / n, acc.p[2] / n, acc.p[3] / n);
    let var = m2 - m1 * m1;
    let central4 = m4 - 4.0 * m1 * m3 + 6.0 * m1 * m1 * m2 - 3.0 * m1.powi(4);
    let variance_split = VarianceSplit {
        between_bins: between,
        within_bins: within,
        total: Estimate { value: between + within, std_error: ((central4 - var * var).max(0.0) / n).sqrt() },
    };

    RunSummary {
        n_trials: acc.n as usize,
        seed,
        context: proto.ctx,
        coupling: model.coupling(),
        apparatus_variance: model.apparatus_variance(),
        sharpness: c,
        mean_work,
        mean_energy_change,
        empirical_efficiency,
        conditional_slope,
        variance_split,
        binned_conditional_moments: bins,
    }
}

fn weighted_slope(bins: &[BinMoments]) -> Estimate {
    let pts: Vec<(f64, f64, f64)> = bins
        .iter()
        .filter(|b| b.count > 1 && b.var_momentum > 0.0)
        .map(|b| (b.mean_outcome, b.mean_momentum, b.count as f64 / b.var_momentum))
        .collect();
    let sw: f64 = pts.iter().map(|p| p.2).sum();
    let xbar = pts.iter().map(|p| p.2 * p.0).sum::<f64>() / sw;
    let ybar = pts.iter().map(|p| p.2 * p.1).sum::<f64>() / sw;
    let sxx: f64 = pts.iter().map(|p| p.2 * (p.0 - xbar).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| p.2 * (p.0 - xbar) * (p.1 - ybar)).sum();
    Estimate { value: sxy / sxx, std_error: (1.0 / sxx).sqrt() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZScore {
    pub name: String,
    pub empirical: f64,
    pub std_error: f64,
    pub analytic: f64,
    pub z: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub entries: Vec<ZScore>,
}

impl Comparison {
    pub fn any_flagged(&self) -> bool {
        self.entries.iter().any(|e| e.flagged)
    }

    pub fn get(&self, name: &str) -> Option<&ZScore> {
        self.entries.iter().find(|e| e.name == name)
    }
}

fn z_score(name: &str, est: Estimate, analytic: f64) -> ZScore {
    let diff = est.value - analytic;
    let z = if diff == 0.0 { 0.0 } else { diff / est.std_error };
    ZScore {
        name: name.to_string(),
        empirical: est.value,
        std_error: est.std_error,
        analytic,
        z,
        flagged: !(z.abs() <= Z_THRESHOLD),
    }
}

/// z-scores of a sampled run against a ledger for the same particle.
pub fn compare(summary: &RunSummary, ledger: &ThermoLedger) -> Result<Comparison> {
    if summary.context != ledger.context {
        return Err(Error::ConfigurationMismatch(format!(
            "run has m = {}, T = {}; ledger has m = {}, T = {}",
            summary.context.mass, summary.context.temperature, ledger.context.mass, ledger.context.temperature
        )));
    }
    if ledger.ideal_limit {
        return Err(Error::ConfigurationMismatch("ledger is for an ideal measurement; runs need σ > 0".into()));
    }
    let c = ledger.sharpness;
    Ok(Comparison {
        entries: vec![
            z_score("mean_work", summary.mean_work, ledger.avg_work),
            z_score("mean_energy_change", summary.mean_energy_change, ledger.avg_energy_change),
            z_score("efficiency", summary.empirical_efficiency, ledger.efficiency_bound),
            z_score("conditional_slope", summary.conditional_slope, (c - 1.0) / (c * summary.coupling)),
            z_score("total_variance", summary.variance_split.total, ledger.context.thermal_variance()),
        ],
    })
}
