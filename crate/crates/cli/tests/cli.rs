use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn kite(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kite"))
        .args(args)
        .arg("--out-dir")
        .arg(dir)
        .env_remove("KITE_THREADS")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn check_names(report: &Value) -> Vec<String> {
    report["checks"].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap().to_string()).collect()
}

#[test]
fn solve_thousand_sites_records_a_short_trace() {
    let dir = tempfile::tempdir().unwrap();
    let o = kite(&["solve", "--n-sites", "1000", "--tol-mass", "1e-7"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = read_json(&dir.path().join("solve.json"));
    let iters = report["checks"][0]["details"]["iterations"].as_u64().unwrap();
    assert!(iters <= 30, "{iters}");
    assert_eq!(report["results"]["trace"].as_array().unwrap().len() as u64, iters + 1);
    assert_eq!(report["config_hash"].as_str().unwrap().len(), 64);
    let plan = read_json(&dir.path().join("plan.json"));
    assert_eq!(plan["sites"].as_array().unwrap().len(), 1000);
    assert!(dir.path().join("cells.svg").exists());
}

#[test]
fn four_sites_give_four_cells() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&kite(&["solve", "--n-sites", "4"], dir.path())), 0);
    let plan = read_json(&dir.path().join("plan.json"));
    assert_eq!(plan["sites"].as_array().unwrap().len(), 4);
    let svg = std::fs::read_to_string(dir.path().join("cells.svg")).unwrap();
    assert!(svg.matches("<polygon").count() >= 4);
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert_eq!(code(&kite(&["solve", "--n-sites", "400", "--threads", "1"], a.path())), 0);
    let o = Command::new(env!("CARGO_BIN_EXE_kite"))
        .args(["solve", "--n-sites", "400", "--threads", "1", "--out-dir"])
        .arg(b.path())
        .env("KITE_THREADS", "3")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    for f in ["plan.json", "solve.json"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    for d in [&a, &b] {
        assert_eq!(code(&kite(&["verify", "--checks", "symmetry,ma-residual"], d.path())), 0);
    }
    assert_eq!(
        std::fs::read(a.path().join("verify.json")).unwrap(),
        std::fs::read(b.path().join("verify.json")).unwrap()
    );
}

#[test]
fn missing_output_directory_is_an_io_failure() {
    let dir = tempfile::tempdir().unwrap();
    let o = kite(&["solve", "--n-sites", "4"], &dir.path().join("absent"));
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("does not exist"));
}

#[test]
fn commands_needing_a_plan_report_it_missing() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&kite(&["verify"], dir.path())), 4);
    assert_eq!(code(&kite(&["conformal"], dir.path())), 4);
    let ghost = dir.path().join("ghost.json");
    assert_eq!(code(&kite(&["simplex", "--plan", ghost.to_str().unwrap()], dir.path())), 4);
    assert_eq!(code(&kite(&["export", "--plan", ghost.to_str().unwrap()], dir.path())), 4);
}

#[test]
fn non_convergence_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&kite(&["solve", "--n-sites", "400", "--max-iters", "1"], dir.path())), 2);
}

#[test]
fn verify_passes_on_a_symmetrized_plan_and_selects_checks() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&kite(&["solve", "--n-sites", "1000"], dir.path())), 0);
    let o = kite(&["verify"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = read_json(&dir.path().join("verify.json"));
    assert_eq!(check_names(&report), ["symmetry", "quadrants", "monotonicity", "ma-residual", "reduction"]);
    assert_eq!(report["passed"], Value::Bool(true));

    assert_eq!(code(&kite(&["verify", "--checks", "ma-residual"], dir.path())), 0);
    assert_eq!(check_names(&read_json(&dir.path().join("verify.json"))), ["ma-residual"]);
    assert_eq!(code(&kite(&["verify", "--checks", "nonsense"], dir.path())), 64);
}

#[test]
fn unsymmetrized_sites_fail_the_symmetry_check() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&kite(&["solve", "--n-sites", "1000", "--symmetry", "unsymmetrized"], dir.path())), 0);
    assert_eq!(code(&kite(&["verify", "--checks", "symmetry"], dir.path())), 1);
    let report = read_json(&dir.path().join("verify.json"));
    assert_eq!(report["checks"][0]["passed"], Value::Bool(false));
}

#[test]
fn log3_fixture_recovers_its_coefficient() {
    let dir = tempfile::tempdir().unwrap();
    let o = kite(&["conformal", "--fixture", "log3"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let fit = read_json(&dir.path().join("logfit.json"));
    assert!((fit["fit"]["c"].as_f64().unwrap() - 3.0).abs() <= 1e-10);
    let report = read_json(&dir.path().join("conformal.json"));
    assert_eq!(check_names(&report), ["harmonicity", "log-fit", "normalized"]);
    let profile = std::fs::read_to_string(dir.path().join("profile.csv")).unwrap();
    assert_eq!(profile.lines().count(), 13);
}

#[test]
fn inverted_radius_range_exits_five() {
    let dir = tempfile::tempdir().unwrap();
    let o = kite(&["conformal", "--fixture", "log3", "--r-min", "0.5", "--r-max", "0.1"], dir.path());
    assert_eq!(code(&o), 5);
    let o = kite(&["conformal", "--fixture", "log3", "--n-radii", "3"], dir.path());
    assert_eq!(code(&o), 5);
}

#[test]
fn config_file_sits_under_explicit_flags() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = a.path().join("run.json");
    std::fs::write(&cfg, r#"{"n_sites": 40, "seed": 3}"#).unwrap();
    assert_eq!(code(&kite(&["solve", "--config", cfg.to_str().unwrap(), "--n-sites", "80"], a.path())), 0);
    assert_eq!(code(&kite(&["solve", "--n-sites", "80", "--seed", "3"], b.path())), 0);
    let (ra, rb) = (read_json(&a.path().join("solve.json")), read_json(&b.path().join("solve.json")));
    assert_eq!(ra["results"]["n_sites"], Value::from(80));
    assert_eq!(ra["config_hash"], rb["config_hash"]);
    assert_eq!(std::fs::read(a.path().join("plan.json")).unwrap(), std::fs::read(b.path().join("plan.json")).unwrap());

    std::fs::write(&cfg, r#"{"n_sites": 0}"#).unwrap();
    assert_eq!(code(&kite(&["solve", "--config", cfg.to_str().unwrap()], a.path())), 64);
}

#[test]
fn simplex_checks_need_no_plan() {
    let dir = tempfile::tempdir().unwrap();
    let o = kite(&["simplex"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = read_json(&dir.path().join("simplex.json"));
    assert_eq!(check_names(&report), ["transition", "singular-point", "round-trips"]);
    assert_eq!(report["checks"][0]["details"]["matrix"], serde_json::json!([["-1", "0"], ["-1", "1"]]));
    assert_eq!(report["checks"][1]["details"], serde_json::json!(["1/2", "1/2"]));
}

#[test]
fn export_writes_domain_and_plan_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&kite(&["export"], dir.path())), 0);
    assert!(dir.path().join("domain.json").exists());
    assert!(!dir.path().join("conformal_points.csv").exists());
    assert_eq!(code(&kite(&["solve", "--n-sites", "200"], dir.path())), 0);
    assert_eq!(code(&kite(&["export", "--grid-n", "60"], dir.path())), 0);
    let pts = std::fs::read_to_string(dir.path().join("conformal_points.csv")).unwrap();
    assert!(pts.starts_with("u,v,rho_inv\n") && pts.lines().count() > 10);
    assert!(dir.path().join("rho_inv.svg").exists());
}

#[test]
fn bad_arguments_exit_64() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&kite(&["solve", "--n-sites", "many"], dir.path())), 64);
    assert_eq!(code(&kite(&["solve", "--tol-mass", "2"], dir.path())), 64);
    assert_eq!(code(&kite(&["solve", "--n-sites", "6"], dir.path())), 64);
}
