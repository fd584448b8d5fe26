mod common;

use std::path::Path;
use std::process::{Command, Output};

use microgrid_dp::grid::build_grid;
use microgrid_dp::io;
use microgrid_dp::kernel::Kernel;
use microgrid_dp::solver::{solve, MicrogridMdp};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_microgrid-dp")).args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn validate_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = common::write_config(dir.path(), &microgrid_dp::ModelConfig::default());
    assert_eq!(run(&["validate", s(&good)]).status.code(), Some(0));

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[demand]\nbeta_R = -1.0\nsigma_R = 0.0\n").unwrap();
    let out = run(&["validate", s(&bad)]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("beta_R") && err.contains("sigma_R"), "{err}");

    let unknown = dir.path().join("unknown.toml");
    std::fs::write(&unknown, "[weather]\nsunny = true\n").unwrap();
    assert_eq!(run(&["validate", s(&unknown)]).status.code(), Some(1));

    assert_eq!(run(&["validate", s(&dir.path().join("missing.toml"))]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn moments_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::write_config(dir.path(), &microgrid_dp::ModelConfig::default());
    let out = run(&["moments", s(&cfg), "--n", "0", "--z", "-0.5", "--q", "0.5", "--g", "0.5", "--action", "wait"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["moments"]["var_q"], 0.0);
    assert_eq!(v["moments"]["var_g"], 0.0);
    assert!(v["feasible"].as_array().unwrap().iter().any(|a| a == "wait"));

    let bad = run(&["moments", s(&cfg), "--n", "0", "--z", "0", "--q", "0.5", "--g", "0.5", "--action", "sell"]);
    assert_eq!(bad.status.code(), Some(1));
    let late = run(&["moments", s(&cfg), "--n", "168", "--z", "0", "--q", "0.5", "--g", "0.5", "--action", "wait"]);
    assert_eq!(late.status.code(), Some(1));
}

#[test]
fn calibrate_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::write_config(dir.path(), &microgrid_dp::ModelConfig::default());
    let out = run(&["calibrate", s(&cfg)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["eta0"].as_f64().unwrap() - 2.1044e-4).abs() < 5e-9);
    assert!((v["gamma_deg"].as_f64().unwrap() - 0.05).abs() < 1e-12);
    assert!((v["capacity_kwh"].as_f64().unwrap() - 18.0).abs() < 0.5);
    assert_eq!(run(&["calibrate", s(&cfg), "--q-star", "1.5"]).status.code(), Some(1));
}

#[test]
fn solve_exports_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    // medium grid: q_ref = 0.8 is a grid point
    let cfg = common::medium_config();
    let path = common::write_config(dir.path(), &cfg);
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        let r = run(&["solve", s(&path), "--out", s(out)]);
        assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    }

    let grid = build_grid(&cfg);
    let sol = solve(&MicrogridMdp::new(&Kernel::new(&cfg, &grid))).unwrap();
    let n = cfg.steps();

    // slices for 0, N-12 (clamped to 0), N-1, N
    assert!(!out_a.join(io::value_policy_file(1)).exists());
    for step in [0, n - 1, n] {
        let file = io::value_policy_file(step);
        let a = std::fs::read(out_a.join(&file)).unwrap();
        assert_eq!(a, std::fs::read(out_b.join(&file)).unwrap());
        let rows = io::read_value_policy(&out_a.join(&file)).unwrap();
        assert_eq!(rows.len(), grid.num_states());
        for row in &rows {
            let id = grid.index(row.i, row.j, row.k);
            assert_eq!(row.value_eur, sol.values.get(step, id));
            assert_eq!(row.action, (step < n).then(|| sol.policy.get(step, id)));
        }
    }
    let terminal = io::read_value_policy(&out_a.join(io::value_policy_file(n))).unwrap();
    let q_ref = grid.q.cell_of(cfg.costs.q_ref).unwrap();
    assert_eq!(grid.q.points[q_ref], cfg.costs.q_ref);
    for row in terminal.iter().filter(|r| r.j == q_ref && r.k == 0) {
        assert!(row.value_eur.abs() < 1e-9);
        assert!(row.action.is_none());
    }

    let policy = io::read_policy_table(&out_a.join(io::POLICY_FILE), &grid, n).unwrap();
    assert_eq!(policy, sol.policy);
    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out_a.join("metadata.json")).unwrap()).unwrap();
    assert_eq!(meta["config_hash"], io::config_hash(&cfg));
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out_a.join("manifest.json")).unwrap()).unwrap();
    assert!(manifest["outputs"].as_array().unwrap().iter().any(|f| f == io::POLICY_FILE));
}

#[test]
fn simulate_from_exported_policy() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::small_config();
    let path = common::write_config(dir.path(), &cfg);
    let policy = dir.path().join("policy");
    assert!(run(&["solve", s(&path), "--out", s(&policy)]).status.success());
    let out = dir.path().join("paths");
    let r = run(&[
        "simulate", s(&path), "--policy", s(&policy), "--scenario", "favorable-start", "--seeds", "3", "--out", s(&out),
    ]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let records = io::read_path(&out.join("path_002.csv")).unwrap();
    assert_eq!(records.len(), cfg.steps() + 1);
    assert!(out.join("manifest.json").exists());

    // a policy solved for another configuration is refused
    let mut other = cfg.clone();
    other.costs.discomfort = 1.0;
    let other_dir = tempfile::tempdir().unwrap();
    let other_path = common::write_config(other_dir.path(), &other);
    let r = run(&[
        "simulate", s(&other_path), "--policy", s(&policy), "--scenario", "neutral", "--seeds", "1", "--out", s(&out),
    ]);
    assert_eq!(r.status.code(), Some(1));
    let r = run(&[
        "simulate", s(&path), "--policy", s(&policy), "--scenario", "monsoon", "--seeds", "1", "--out", s(&out),
    ]);
    assert_eq!(r.status.code(), Some(1));
}

#[test]
fn thread_variable_is_checked() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::write_config(dir.path(), &common::small_config());
    let out = Command::new(env!("CARGO_BIN_EXE_microgrid-dp"))
        .env("MICROGRID_DP_THREADS", "0")
        .args(["validate", s(&cfg)])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = Command::new(env!("CARGO_BIN_EXE_microgrid-dp"))
        .env("MICROGRID_DP_THREADS", "2")
        .args(["validate", s(&cfg)])
        .output()
        .unwrap();
    assert!(out.status.success());
}

#[test]
fn config_files_round_trip() {
    let cfg = common::medium_config();
    let text = io::config_to_toml(&cfg);
    let back = io::parse_config(&text).unwrap();
    assert_eq!(back, cfg);
    assert_eq!(io::config_to_toml(&back), text);
    let reference = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/reference.toml");
    assert_eq!(io::load_config(&reference).unwrap(), microgrid_dp::ModelConfig::default());
}
