use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn aggoc(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aggoc"))
        .args(args)
        .current_dir(cwd)
        .env_remove("AGGOC_OUT_DIR")
        .output()
        .unwrap()
}

const SMALL: &[&str] = &[
    "--agents", "3", "--horizon", "3", "--u-max", "1", "--s-in-min", "0", "--s-in-max", "1", "--s-max-min", "2",
    "--s-max-max", "2",
];

fn with(base: &[&str], extra: &[&str]) -> Vec<String> {
    base.iter().chain(extra).map(|s| s.to_string()).collect()
}

fn run(args: &[String], cwd: &Path) -> Output {
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    aggoc(&refs, cwd)
}

#[test]
fn generate_validate_and_solve_from_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&with(&["generate", "-o", "inst.json"], SMALL), dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = aggoc(&["validate", "--instance", "inst.json"], dir.path());
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("valid"));

    let out = aggoc(&["exact", "--instance", "inst.json", "--out-dir", "ex"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("ex/exact_solution.csv").exists());

    let out = aggoc(&["experiment", "--algorithm", "export-micp", "--instance", "inst.json", "--out-dir", "lp"], dir.path());
    assert!(out.status.success());
    let lp = fs::read_to_string(dir.path().join("lp/model.lp")).unwrap();
    assert!(lp.contains("N = 3, T = 3"));
}

#[test]
fn output_directory_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_aggoc"))
        .args(with(&["fw", "-k", "5"], SMALL))
        .current_dir(dir.path())
        .env("AGGOC_OUT_DIR", "from_env")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("from_env/fw.csv").exists());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    // Missing file: I/O.
    assert_eq!(aggoc(&["validate", "--instance", "nope.json"], dir.path()).status.code(), Some(5));
    // Structurally broken file: validation.
    fs::write(dir.path().join("bad.json"), "{\"N\": 1, \"T\": 1, \"social\": [], \"agents\": []}").unwrap();
    assert_eq!(aggoc(&["validate", "--instance", "bad.json"], dir.path()).status.code(), Some(3));
    // Parses but violates the model (no initial state).
    let inst = aggoc_core::battery::generate(&aggoc_core::battery::BatteryParams {
        agents: 1,
        horizon: 2,
        ..Default::default()
    })
    .unwrap();
    let mut file = aggoc::format::InstanceFile::from_instance(&inst);
    file.agents[0].initial_states.clear();
    fs::write(dir.path().join("empty.json"), serde_json::to_string(&file).unwrap()).unwrap();
    let out = aggoc(&["validate", "--instance", "empty.json"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(!out.stdout.is_empty());
    // Cap exceeded.
    let out = run(&with(&["exact", "--cap", "2"], SMALL), dir.path());
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
    // Coarse bounds need generator parameters.
    let out = aggoc(&["bounds", "--coarse", "--instance", "empty.json"], dir.path());
    assert_ne!(out.status.code(), Some(0));
}

#[test]
fn bounds_report_prints_coarse_gap() {
    let dir = tempfile::tempdir().unwrap();
    let out = aggoc(&["bounds", "--coarse"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().any(|l| l == "gap_bound: 7.68"), "{text}");
}
