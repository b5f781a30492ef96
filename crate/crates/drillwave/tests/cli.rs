use drillwave::cli;
use serde_json::Value;

fn run(args: &[&str]) -> (i32, String) {
    let mut out = Vec::new();
    let argv = std::iter::once("drillwave").chain(args.iter().copied());
    let code = cli::run(argv, &mut out);
    (code, String::from_utf8(out).unwrap())
}

fn json(text: &str) -> Value {
    serde_json::from_str(text).unwrap()
}

#[test]
fn derive_prints_the_blue_row() {
    let (code, out) = run(&["derive", "--scenario", "blue"]);
    assert_eq!(code, 0);
    let v = json(&out);
    assert!((v["lambda"].as_f64().unwrap() - 0.5477).abs() < 5e-3);
    assert_eq!(v["n_p"], 2);
}

#[test]
fn np_counts_the_delay_limit_pole() {
    let (code, out) = run(&["np", "--q", "2", "--alpha", "1", "--lambda", "0"]);
    assert_eq!(code, 0);
    let v = json(&out);
    assert_eq!(v["n_p"], 1);
    assert!(v["winding"]["samples_used"].as_u64().unwrap() > 0);
}

#[test]
fn invalid_flags_exit_1() {
    assert_eq!(run(&["np", "--q", "two", "--alpha", "1", "--lambda", "0"]).0, 1);
    assert_eq!(run(&["np", "--alpha", "1", "--lambda", "0"]).0, 1);
    assert_eq!(run(&["frobnicate"]).0, 1);
    assert_eq!(run(&["--tol", "-1", "np", "--q", "2", "--alpha", "1", "--lambda", "0"]).0, 1);
    assert_eq!(run(&["np", "--q", "2", "--alpha", "-1", "--lambda", "0"]).0, 1);
    assert_eq!(run(&["derive", "--scenario", "purple"]).0, 1);
    assert_eq!(run(&["simulate", "--scenario", "blue", "--disturb", "wobble:1,2", "--out", "x.csv"]).0, 1);
}

#[test]
fn help_exits_0() {
    let (code, out) = run(&["--help"]);
    assert_eq!(code, 0);
    for cmd in ["derive", "classify", "np", "certify", "simulate", "norms", "synth"] {
        assert!(out.contains(cmd), "{cmd} missing from help");
    }
}

#[test]
fn certify_gray_passes() {
    let (code, out) = run(&["certify", "--scenario", "gray", "--controller", "gray"]);
    assert_eq!(code, 0, "{out}");
    let v = json(&out);
    assert_eq!(v["pass"], true);
    let kinds: Vec<&str> = v["certificates"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["kind"].as_str().unwrap())
        .collect();
    assert!(kinds.contains(&"nyquist_closed_loop") && kinds.contains(&"sector_hinf"), "{kinds:?}");
}

#[test]
fn certify_exit_code_follows_the_bundle() {
    let (code, out) = run(&["--n", "60", "certify", "--scenario", "blue", "--controller", "blue"]);
    let v = json(&out);
    let nyquist = &v["certificates"][0];
    assert_eq!(nyquist["computed"].as_f64(), Some(2.0));
    assert_eq!(nyquist["pass"], true);
    assert_eq!(code, if v["pass"] == true { 0 } else { 2 });
}

#[test]
fn destabilizing_controller_fails_the_certificate() {
    let (code, out) = run(&["certify", "--scenario", "blue", "--controller", "zero"]);
    assert_eq!(code, 2);
    assert_eq!(json(&out)["pass"], false);
}

#[test]
fn simulate_writes_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("run.csv");
    let (code, out) = run(&[
        "--n", "60", "simulate", "--scenario", "blue", "--controller", "blue", "--on-at", "1",
        "--disturb", "square:2,1,0.6", "--t-final", "4", "--out", csv.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{out}");
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("t,y1,y2,u,theta_dot_bit,omega_cmd"));
    let side = json(&std::fs::read_to_string(csv.with_extension("json")).unwrap());
    assert_eq!(side["config"]["controller_on_at"], 1.0);
    assert!(std::fs::read_to_string(csv.with_extension("svg")).unwrap().contains("<svg"));
}

#[test]
fn norms_reports_the_gray_sector_gain() {
    let (code, out) = run(&[
        "norms", "--scenario", "gray", "--controller", "gray", "--channel", "tze", "--norm", "hinf", "--irrational",
    ]);
    assert_eq!(code, 0, "{out}");
    let v = json(&out);
    assert!((v["value"].as_f64().unwrap() - 0.2822).abs() < 1e-3);
    assert_eq!(v["method"], "grid_refine");
}

#[test]
fn synth_writes_controller_and_history() {
    let dir = tempfile::tempdir().unwrap();
    let problem = dir.path().join("prob.json");
    std::fs::write(
        &problem,
        r#"{"scenario": "gray", "program": "sector_program", "sector": {"q_l": -4.8, "q_u": 0.48}, "n_design": 20}"#,
    )
    .unwrap();
    let (code, out) = run(&[
        "--seed", "3", "synth", "--problem", problem.to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap(),
        "--max-evals", "40",
    ]);
    assert!(code == 0 || code == 2, "{out}");
    let k = drillwave::ssmodel::Controller::load(&dir.path().join("controller.json")).unwrap();
    assert_eq!(k.order(), 5);
    let history = std::fs::read_to_string(dir.path().join("history.csv")).unwrap();
    assert!(history.lines().count() >= 2);
}
