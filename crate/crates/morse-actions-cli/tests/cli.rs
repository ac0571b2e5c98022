use std::path::PathBuf;
use std::process::{Command, Output};

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_morse-actions"))
        .args(args)
        .env("MORSE_ACTIONS_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is a JSON report")
}

#[test]
fn usage_errors_exit_64() {
    assert_eq!(run(&[]).status.code(), Some(64));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(64));
    assert_eq!(run(&["actions", "--region", "1"]).status.code(), Some(64));
    let bad_range = run(&["oracle", "--energies", "1:2"]);
    assert_eq!(bad_range.status.code(), Some(64));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn bad_thread_setting_is_a_usage_error() {
    let out = Command::new(env!("CARGO_BIN_EXE_morse-actions"))
        .args(["verify", "--suite", "quick"])
        .env("MORSE_ACTIONS_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(64));
    assert!(String::from_utf8_lossy(&out.stderr).contains("MORSE_ACTIONS_THREADS"));
}

#[test]
fn analyze_pendulum() {
    let out = run(&["analyze", "--potential", data("pendulum.json").to_str().unwrap(), "--params", "0"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["schema"], "morse-actions/1");
    assert_eq!(v["constants"]["beta"].as_f64(), Some(1.0));
    assert!((v["constants"]["m"].as_f64().unwrap() - 1f64.cosh()).abs() < 1e-12);
}

#[test]
fn actions_csv_has_64_rows() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("well.csv");
    let out = run(&[
        "actions",
        "--potential",
        data("pendulum.json").to_str().unwrap(),
        "--region",
        "1",
        "--energies",
        "-0.999:0.999:64",
        "--output",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = morse_actions::io::read_csv(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(header, ["E", "I", "dI_dE", "d2I_dE2", "route_residual"]);
    assert_eq!(rows.len(), 64);
    for w in rows.windows(2) {
        assert!(w[1][1] > w[0][1]);
    }
    assert!(rows.iter().all(|r| r[4] < 1e-10));
}

#[test]
fn parameter_outside_the_box_is_a_domain_error() {
    let out = run(&["analyze", "--potential", data("pendulum.json").to_str().unwrap(), "--params", "3"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn energy_outside_window_is_a_domain_error() {
    let out = run(&[
        "actions",
        "--potential",
        data("pendulum.json").to_str().unwrap(),
        "--region",
        "1",
        "--energies",
        "2:3:2",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn invert_is_monotone_in_rotation() {
    let out = run(&[
        "invert",
        "--potential",
        data("pendulum.json").to_str().unwrap(),
        "--region",
        "2",
        "--actions",
        "1:4:7",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let (_, rows) = morse_actions::io::read_csv(std::str::from_utf8(&out.stdout).unwrap()).unwrap();
    assert!(rows.iter().all(|r| r[1] > 1.0 && r[2] > 0.0));
}

#[test]
fn normalize_reports_bounds() {
    let out = run(&["normalize", "--hamiltonian", data("eps_linear.json").to_str().unwrap(), "--seed", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["seed"], 3);
    assert!(v["body"]["composition_residual"].as_f64().unwrap() < 1e-10);
}

#[test]
fn oracle_matches_library_action() {
    let out = run(&["oracle", "--region", "1", "--energies=0:0:1"]);
    assert_eq!(out.status.code(), Some(0));
    let (_, rows) = morse_actions::io::read_csv(std::str::from_utf8(&out.stdout).unwrap()).unwrap();
    let expected = morse_actions::cosine::CosineRef::new(1.0).unwrap().golden_row(1, 0.0).unwrap();
    assert_eq!(rows[0][1], expected.action);
}

#[test]
fn singular_two_well_flags_the_two_sided_floor() {
    let out = run(&["singular", "--potential", data("two_well.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let v = json(&out);
    let fits = v["body"]["fits"].as_array().unwrap();
    for fit in fits.iter().filter(|f| f["passed"] == false) {
        let failing: Vec<_> = fit["checks"]
            .as_array()
            .unwrap()
            .iter()
            .filter(|c| c["holds"] == false)
            .map(|c| c["name"].as_str().unwrap().to_owned())
            .collect();
        assert_eq!(failing, ["|psi0| two-sided floor"]);
    }
    assert!(v["body"]["bottoms"].as_array().unwrap().iter().all(|b| b["passed"] == true));
}

#[test]
fn verify_quick_suite_passes() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("verify.json");
    let out = run(&["verify", "--suite", "quick", "--output", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.lines().all(|l| l.starts_with("[PASS]")), "{stdout}");
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    assert_eq!(v["passed"], true);
}
