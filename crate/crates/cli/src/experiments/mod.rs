//! One function per named experiment. Each returns an [`Outcome`]; nothing
//! here touches the filesystem except optional bulk CSVs.

mod classical;
mod collision;
mod oscillator;

use std::time::Instant;

use crate::config::{Experiment, RunConfig};
use crate::report::Outcome;
use crate::CliError;

pub fn run(cfg: &RunConfig) -> Result<Outcome, CliError> {
    match cfg.experiment {
        Experiment::ClassicalIntervention => classical::intervention(cfg),
        Experiment::EquivalencePair => classical::equivalence_pair(cfg),
        Experiment::McValidate => classical::mc_validate(cfg),
        Experiment::CollisionGrid => collision::grid(cfg),
        Experiment::CollisionGaussian => collision::gaussian(cfg),
        Experiment::OscillatorBinary => oscillator::binary(cfg),
    }
}

/// Run `f` and record its wall-clock time under `stage`.
fn timed<T>(out: &mut Outcome, stage: &str, f: impl FnOnce() -> T) -> T {
    let start = Instant::now();
    let value = f();
    out.timings.push((stage.to_string(), start.elapsed().as_secs_f64()));
    value
}

fn sci(x: f64) -> String {
    format!("{x:.3e}")
}
