use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use intervene_cli::config::{self, Experiment, FileConfig, OUTPUT_DIR_ENV};
use intervene_cli::report::Status;
use intervene_cli::CliError;

/// Run a named intervention experiment and write report.json plus CSV tables.
#[derive(Debug, Parser)]
#[command(name = "intervene", version = intervene_core::VERSION)]
struct Args {
    experiment: Experiment,

    /// TOML file with `seed`, `output_dir` and one section per experiment.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,

    #[arg(long)]
    seed: Option<u64>,

    /// Output directory [env: INTERVENE_OUTPUT_DIR] [default: intervene-out]
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Parameter override, repeatable.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,
}

fn execute(args: Args) -> Result<u8, CliError> {
    let file = args.config.as_deref().map(|p| FileConfig::load(p, args.experiment)).transpose()?;
    let overrides = args.params.iter().map(|s| config::parse_override(s)).collect::<Result<Vec<_>, _>>()?;
    let env_dir = std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from);
    let cfg = config::resolve(args.experiment, file, args.seed, args.out, &overrides, env_dir)?;

    let run = intervene_cli::run(&cfg)?;
    let o = &run.outcome;
    let failed: Vec<&str> = o.invariants.iter().filter(|i| i.status == Status::Fail).map(|i| i.name.as_str()).collect();
    let refuted = o.findings.iter().filter(|f| !f.holds).count();
    println!("{}: {}", cfg.experiment, run.report_path.display());
    println!(
        "invariants: {} checked, {} failed; findings: {} evaluated, {} do not hold",
        o.invariants.len(),
        failed.len(),
        o.findings.len(),
        refuted
    );
    for name in failed {
        eprintln!("invariant failed: {name}");
    }
    Ok(run.exit_code())
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(args) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
