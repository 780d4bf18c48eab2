use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_intervene");

fn intervene(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("INTERVENE_OUTPUT_DIR").output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn report(dir: &Path) -> Value {
    serde_json::from_slice(&fs::read(dir.join("report.json")).unwrap()).unwrap()
}

fn status_of<'a>(r: &'a Value, name: &str) -> &'a str {
    r["invariants"]
        .as_array()
        .unwrap()
        .iter()
        .find(|i| i["name"] == name)
        .unwrap_or_else(|| panic!("no invariant {name}"))["status"]
        .as_str()
        .unwrap()
}

fn holds(r: &Value, name: &str) -> bool {
    r["findings"].as_array().unwrap().iter().find(|f| f["name"] == name).unwrap()["holds"].as_bool().unwrap()
}

fn result(r: &Value, name: &str) -> f64 {
    r["results"].as_array().unwrap().iter().find(|q| q["name"] == name).unwrap()["value"].as_f64().unwrap()
}

const SMALL_MC: [&str; 4] = ["--param", "trials=4000", "--param", "grid_points=1025"];

#[test]
fn reports_are_byte_identical_for_the_same_config() {
    let tmp = tempfile::tempdir().unwrap();
    for exp in ["classical-intervention", "collision-gaussian"] {
        let (a, b) = (tmp.path().join(format!("{exp}-a")), tmp.path().join(format!("{exp}-b")));
        for dir in [&a, &b] {
            let mut args = vec![exp, "--seed", "7", "--out", dir.to_str().unwrap()];
            if exp == "classical-intervention" {
                args.extend(SMALL_MC);
            }
            let o = intervene(&args);
            assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        }
        let files: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
        for f in files.iter().filter(|f| *f != "timings.json") {
            assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f:?} differs");
        }
    }
}

#[test]
fn classical_defaults_report_the_c2_ledger() {
    let tmp = tempfile::tempdir().unwrap();
    let o = intervene(&["classical-intervention", "--out", tmp.path().to_str().unwrap(), "--param", "trials=20000"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = report(tmp.path());
    assert_eq!(r["experiment"], "classical-intervention");
    assert_eq!(r["seed"], 1);
    assert_eq!(r["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(r["status"], "pass");
    let ln2 = std::f64::consts::LN_2;
    assert_eq!(result(&r, "efficiency"), 0.25);
    assert!((result(&r, "mutual_information") - 0.5 * ln2).abs() < 1e-15);
    assert!((result(&r, "entropy_change") + 0.5 * ln2).abs() < 1e-15);
    for q in r["results"].as_array().unwrap() {
        assert!(["analytic", "grid", "monte-carlo"].contains(&q["provenance"].as_str().unwrap()));
    }
    // the work conflict is surfaced as a finding, not an invariant failure
    assert!(!holds(&r, "mc_matches_ledger.mean_work"));
    assert!(holds(&r, "mc_matches_ledger.mean_energy_change"));

    let z = fs::read_to_string(tmp.path().join("mc_zscores.csv")).unwrap();
    assert!(z.starts_with("quantity,empirical,std_error,analytic,z\n"));
    assert_eq!(z.lines().count(), 6);
    assert_eq!(fs::read_to_string(tmp.path().join("mc_bins.csv")).unwrap().lines().count(), 33);
    let timings: Value = serde_json::from_slice(&fs::read(tmp.path().join("timings.json")).unwrap()).unwrap();
    assert!(timings["total"].as_f64().unwrap() > 0.0);
}

#[test]
fn floats_are_written_with_seventeen_digits() {
    let tmp = tempfile::tempdir().unwrap();
    let o = intervene(&["collision-gaussian", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(tmp.path().join("report.json")).unwrap();
    assert!(text.contains("\"value\": 6.6666666666666663e-1"), "vacuum fidelity 2/3 at full precision");
    let csv = fs::read_to_string(tmp.path().join("collision_sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("p_variance,swap_fidelity,momentum_swap_fidelity,log_negativity,ppt_physical"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|c| c.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 25);
    for row in &rows {
        assert!(row[3] > 0.0 && row[4] == 0.0, "every sweep point is entangled: {row:?}");
    }
}

#[test]
fn oscillator_reports_entropy_bookkeeping() {
    let tmp = tempfile::tempdir().unwrap();
    let o = intervene(&["oscillator-binary", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = report(tmp.path());
    let excess = result(&r, "measurement_entropy_excess");
    assert!(excess > 0.0 && excess < std::f64::consts::LN_2);
    assert_eq!(status_of(&r, "fock.kraus_completeness"), "pass");
    assert_eq!(status_of(&r, "fock.feedback_energy_neutral"), "pass");
    assert_eq!(status_of(&r, "fock.erasure_bound"), "not_applicable");
    assert!(holds(&r, "feedback_removes_ln2_entropy"));
    assert_eq!(fs::read_to_string(tmp.path().join("fock_levels.csv")).unwrap().lines().count(), 65);
}

#[test]
fn invariant_failure_exits_two_and_still_writes_the_report() {
    let tmp = tempfile::tempdir().unwrap();
    // 31 points cannot hold variance addition to 1e-4
    let o = intervene(&["collision-grid", "--out", tmp.path().to_str().unwrap(), "--param", "points=31"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("grid.variance_addition"));
    let r = report(tmp.path());
    assert_eq!(r["status"], "invariant_failure");
    assert_eq!(status_of(&r, "grid.variance_addition"), "fail");
    assert_eq!(status_of(&r, "grid.mass_conservation"), "pass");
}

#[test]
fn usage_and_config_errors_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let out = out.to_str().unwrap();

    assert_eq!(intervene(&["--help"]).status.code(), Some(0));
    assert_eq!(intervene(&["--version"]).status.code(), Some(0));
    assert_eq!(intervene(&[]).status.code(), Some(1));
    assert_eq!(intervene(&["no-such-experiment"]).status.code(), Some(1));
    assert_eq!(intervene(&["collision-grid", "--seed", "x"]).status.code(), Some(1));

    let o = intervene(&["collision-grid", "--out", out, "--param", "pionts=31"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("pionts"), "{}", stderr(&o));
    let o = intervene(&["collision-grid", "--out", out, "--param", "points"]);
    assert_eq!(o.status.code(), Some(1));

    let cfg = tmp.path().join("bad.toml");
    fs::write(&cfg, "seed = 3\n[collision-grid]\npoints = 255\na_varaince = 1.0\n").unwrap();
    let o = intervene(&["collision-grid", "--out", out, "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let msg = stderr(&o);
    assert!(msg.contains("bad.toml:4:") && msg.contains("a_varaince"), "{msg}");

    fs::write(&cfg, "[collision-grid]\npoints = \"many\"\n").unwrap();
    let o = intervene(&["collision-grid", "--out", out, "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("bad.toml:2:"), "{}", stderr(&o));

    // even points are rejected by the grid kernel, not silently adjusted
    let o = intervene(&["collision-grid", "--out", out, "--param", "points=256"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("odd"), "{}", stderr(&o));
    assert!(!Path::new(out).join("report.json").exists());
}

#[test]
fn flags_override_file_and_environment_sets_default_dir() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    let file_out = tmp.path().join("from-file");
    fs::write(
        &cfg,
        format!(
            "seed = 11\noutput_dir = {:?}\n[collision-grid]\npoints = 255\neps_variance = 0.5\n[oscillator-binary]\nnbar = 2.0\n",
            file_out.to_str().unwrap()
        ),
    )
    .unwrap();
    let cfg = cfg.to_str().unwrap();

    let o = intervene(&["collision-grid", "--config", cfg, "--seed", "12", "--param", "eps_variance=0.1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = report(&file_out);
    assert_eq!(r["seed"], 12);
    assert_eq!(r["parameters"]["points"], 255);
    assert_eq!(r["parameters"]["eps_variance"], 0.1);
    assert_eq!(r["parameters"]["write_joint"], false);

    let env_out = tmp.path().join("from-env");
    let o = Command::new(BIN)
        .args(["collision-grid", "--param", "points=255", "--param", "write_joint=true"])
        .env("INTERVENE_OUTPUT_DIR", &env_out)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let joint = fs::read_to_string(env_out.join("collision_joint.csv")).unwrap();
    assert!(joint.lines().count() > 255);
    assert!(report(&env_out)["tables"].as_array().unwrap().iter().any(|t| t == "collision_joint.csv"));

    // the file's output_dir beats the environment
    let o = Command::new(BIN).args(["collision-grid", "--config", cfg]).env("INTERVENE_OUTPUT_DIR", &env_out).output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(report(&file_out)["seed"], 11);
}

#[test]
fn mc_validate_writes_trials_on_request() {
    let tmp = tempfile::tempdir().unwrap();
    let o = intervene(&[
        "mc-validate",
        "--out",
        tmp.path().to_str().unwrap(),
        "--param",
        "trials=3000",
        "--param",
        "write_trials=true",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = report(tmp.path());
    for name in ["mc.reproducibility", "mc.thread_independence", "mc.negative_control", "mc.energy_extracted"] {
        assert_eq!(status_of(&r, name), "pass", "{name}");
    }
    let trials = fs::read_to_string(tmp.path().join("trials.csv")).unwrap();
    assert_eq!(trials.lines().count(), 3001);
}
