use std::path::Path;
use std::process::{Command, Output};

fn treefork(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_treefork")).args(args).current_dir(dir).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

#[test]
fn simulate_writes_trajectory_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let o = treefork(
        &[
            "simulate", "--tree", "balanced:4", "--values", "5,5,5,5", "--ic", "0.2,0.1,0.3,0.2,0.4,0.2", "--method", "rk4",
            "--h", "0.01", "--t-final", "50", "--out", "traj.csv", "--summary", "summary.json",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("traj.csv")).unwrap();
    assert!(csv.starts_with("t,m_o_1,m_o_2,m_o_3,m_o_4,m_o_U\n"));
    assert_eq!(csv.lines().count(), 502);
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["argmax"], 0);
    assert!(summary["nearest_equilibrium"]["distance"].as_f64().unwrap() < 1e-3);

    // Fixed-step output is byte-identical across runs.
    let again = treefork(
        &[
            "simulate", "--tree", "balanced:4", "--values", "5,5,5,5", "--ic", "0.2,0.1,0.3,0.2,0.4,0.2", "--method", "rk4",
            "--h", "0.01", "--t-final", "50", "--out", "traj2.csv", "--summary", "summary2.json",
        ],
        dir.path(),
    );
    assert_eq!(code(&again), 0);
    assert_eq!(std::fs::read(dir.path().join("traj.csv")).unwrap(), std::fs::read(dir.path().join("traj2.csv")).unwrap());
}

#[test]
fn config_file_replaces_flags() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("tree.json"),
        r#"{"left": {"option": 1}, "right": {"option": 2}}"#,
    )
    .unwrap();
    std::fs::write(
        dir.path().join("run.json"),
        r#"{"tree": "tree.json", "values": [1.25, 1.25], "seed": 4, "t-final": 20, "out": "t.csv", "summary": "s.json"}"#,
    )
    .unwrap();
    let o = treefork(&["simulate", "--config", "run.json"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let s: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("s.json")).unwrap()).unwrap();
    assert_eq!(s["seed"], 4);

    std::fs::write(dir.path().join("bad.json"), "{\"tree\": \"tree.json\",\n  \"valus\": [1, 1]}").unwrap();
    let o = treefork(&["simulate", "--config", "bad.json"], dir.path());
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
}

#[test]
fn validation_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("t.json"), r#"{"left": {"option": 1}}"#).unwrap();
    for args in [
        vec!["simulate", "--tree", "t.json", "--values", "1,1"],
        vec!["simulate", "--tree", "balanced:2", "--values", "1,-1"],
        vec!["equilibria", "--tree", "balanced:3", "--values", "1,2"],
        vec!["sweep", "--tree", "balanced:2", "--start", "1", "--end", "2", "--points", "1"],
        vec!["audit", "--tree", "missing.json", "--values", "1,1"],
        vec!["nonsense"],
    ] {
        let o = treefork(&args, dir.path());
        assert_eq!(code(&o), 1, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn numerical_failure_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    // A huge fixed step blows up the integration.
    let o = treefork(
        &["simulate", "--tree", "balanced:2", "--values", "50,50", "--method", "rk4", "--h", "1", "--t-final", "10"],
        dir.path(),
    );
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn sweep_reports_crossing() {
    let dir = tempfile::tempdir().unwrap();
    let o = treefork(
        &["sweep", "--tree", "balanced:2", "--sigma", "4", "--start", "1.2", "--end", "3", "--points", "200", "--out", "s.csv", "--summary", "r.json"],
        dir.path(),
    );
    assert_eq!(code(&o), 0);
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    let v = r["crossings"][0]["value"].as_f64().unwrap();
    assert!((v - 1.9058).abs() < 1e-3);
    let csv = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
    assert!(csv.starts_with("v,branch,m_1,m_2,stability,leading_real\n"));
    assert_eq!(csv.lines().count(), 201);
}

#[test]
fn equilibria_and_isomorphisms() {
    let dir = tempfile::tempdir().unwrap();
    let o = treefork(&["equilibria", "--tree", "balanced:4", "--values", "5,5,5,5"], dir.path());
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().count(), 28);
    assert_eq!(text.lines().filter(|l| l.contains(",stable,")).count(), 8);

    let o = treefork(&["isomorphisms", "--tree", "balanced:4"], dir.path());
    let listing: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(listing["order"], 8);
    assert_eq!(listing["canonical_form"], "((()())(()()))");
}

#[test]
fn audit_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let ok = treefork(&["audit", "--tree", "balanced:4", "--values", "1,2,3,4"], dir.path());
    assert_eq!(code(&ok), 0);
    let broken = treefork(&["audit", "--tree", "balanced:4", "--values", "1,2,3,4", "--audit-mode", "fixed"], dir.path());
    assert_eq!(code(&broken), 0);
    assert!(String::from_utf8_lossy(&broken.stdout).contains("broken symmetry"));
}
