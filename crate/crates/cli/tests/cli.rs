use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::tempdir;

fn ecp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ecp-sim")).args(args).env("ECP_SIM_THREADS", "2").output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn ok(args: &[&str]) -> String {
    let o = ecp(args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    stdout(&o)
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn enumerate_balanced() {
    let v: Value = serde_json::from_str(&ok(&["enumerate", "--coeffs", "0.57735,0.57735,0.57735"])).unwrap();
    let rows = v.as_array().unwrap();
    assert_eq!(rows.len(), 10);
    let max = rows.iter().find(|r| r["class"] == "MAXIMAL").unwrap();
    assert_eq!(max["branch"], serde_json::json!([1, 3]));
    assert!((max["probability"].as_f64().unwrap() - 2.0 / 9.0).abs() < 1e-12);
    let total: f64 = rows.iter().map(|r| r["probability"].as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-12);
}

#[test]
fn enumerate_product_input() {
    let v: Value = serde_json::from_str(&ok(&["enumerate", "--coeffs", "1,0,0"])).unwrap();
    for r in v.as_array().unwrap() {
        let want = if r["class"] == "PRODUCT_0" { 1.0 } else { 0.0 };
        assert_eq!(r["probability"].as_f64().unwrap(), want);
    }
}

#[test]
fn enumerate_complex_coefficients() {
    let v: Value =
        serde_json::from_str(&ok(&["enumerate", "--coeffs", "0.6,0.5+0.3i,-0.4-0.37416573867739417i"])).unwrap();
    let total: f64 = v.as_array().unwrap().iter().map(|r| r["probability"].as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-12);
}

#[test]
fn validation_errors_exit_2() {
    for args in [
        vec!["enumerate", "--coeffs", "1,1,1"],
        vec!["enumerate", "--coeffs", "1,0"],
        vec!["enumerate", "--coeffs", "a,b,c"],
        vec!["enumerate"],
        vec!["known", "--coeffs", "0.3,0.8,0.52"],
        vec!["known", "--coeffs", "0.8,0.6,0"],
        vec!["tables", "--which", "5"],
        vec!["homodyne", "--alpha", "1:2"],
        vec!["run", "--coeffs", "1,0,0", "--probe-amp", "-1"],
        vec!["run", "--coeffs", "1,0,0", "--convention", "NOPE"],
    ] {
        assert_eq!(ecp(&args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn invalid_input_writes_nothing() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("e.json");
    let o = ecp(&["enumerate", "--coeffs", "2,0,0", "-o", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn bad_thread_count_is_rejected() {
    let o = Command::new(env!("CARGO_BIN_EXE_ecp-sim"))
        .args(["run", "--coeffs", "1,0,0", "--trials", "1"])
        .env("ECP_SIM_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn run_is_deterministic() {
    let dir = tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let base = ["run", "--coeffs", "0.57735,0.57735,0.57735", "--trials", "3000", "--seed", "9"];
    ok(&[&base[..], &["-o", a.to_str().unwrap(), "--summary", dir.path().join("s.json").to_str().unwrap()]].concat());
    let o = Command::new(env!("CARGO_BIN_EXE_ecp-sim"))
        .args(base)
        .args(["-o", b.to_str().unwrap()])
        .env("ECP_SIM_THREADS", "1")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert_eq!(read(&a), read(&b));
    let csv = read(&a);
    assert!(csv.starts_with("trial,branch_p,branch_q,k,l,m,n,misread,class,fidelity\n"));
    assert_eq!(csv.lines().count(), 3001);
    let s: Value = serde_json::from_str(&read(&dir.path().join("s.json"))).unwrap();
    assert_eq!(s["trials"], 3000);
}

#[test]
fn zero_trials_gives_header_only() {
    let out = ok(&["run", "--coeffs", "1,0,0", "--trials", "0"]);
    assert_eq!(out, "trial,branch_p,branch_q,k,l,m,n,misread,class,fidelity\n");
}

#[test]
fn run_maximal_frequency() {
    let out = ok(&[
        "run",
        "--coeffs",
        "0.57735,0.57735,0.57735",
        "--trials",
        "100000",
        "--ideal-detection",
        "--format",
        "json",
    ]);
    let s: Value = serde_json::from_str(&out).unwrap();
    let f = s["class_counts"]["MAXIMAL"].as_f64().unwrap() / 1e5;
    let p = 2.0 / 9.0;
    assert!((f - p).abs() <= 3.0 * (p * (1.0 - p) / 1e5).sqrt(), "{f}");
    assert_eq!(s["misreads"], 0);
}

#[test]
fn run_through_composed_network() {
    let out = ok(&[
        "run",
        "--coeffs",
        "0.57735,0.57735,0.57735",
        "--trials",
        "2000",
        "--ideal-detection",
        "--network",
        "composed",
        "--format",
        "json",
    ]);
    let s: Value = serde_json::from_str(&out).unwrap();
    assert!((s["mean_fidelity"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert_eq!(s["class_counts"]["UNCLASSIFIABLE"], 0);
    let noisy = ok(&[
        "run",
        "--coeffs",
        "0.57735,0.57735,0.57735",
        "--trials",
        "2000",
        "--ideal-detection",
        "--network",
        "composed",
        "--eps",
        "0.05",
        "--format",
        "json",
    ]);
    let s: Value = serde_json::from_str(&noisy).unwrap();
    assert!(s["mean_fidelity"].as_f64().unwrap() < 1.0);
    let o = ecp(&["run", "--coeffs", "1,0,0", "--eps", "0.05"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_file_with_override() {
    let dir = tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "coeffs = [0.6, 0.8, 0]\ntrials = 50\nseed = 3\nformat = \"json\"\n[homodyne]\nideal_detection = true\n",
    )
    .unwrap();
    let c = cfg.to_str().unwrap();
    let s: Value = serde_json::from_str(&ok(&["--config", c, "run"])).unwrap();
    assert_eq!(s["trials"], 50);
    let s: Value = serde_json::from_str(&ok(&["--config", c, "run", "--trials", "7"])).unwrap();
    assert_eq!(s["trials"], 7);
    std::fs::write(&cfg, "unknown_key = 1\n").unwrap();
    assert_eq!(ecp(&["--config", c, "run"]).status.code(), Some(2));
}

#[test]
fn tables_with_diff() {
    let dir = tempdir().unwrap();
    let diff = dir.path().join("d.csv");
    let t1 = ok(&["tables", "--which", "1", "--diff", diff.to_str().unwrap()]);
    assert_eq!(t1.lines().count(), 11);
    assert!(read(&diff).lines().skip(1).all(|l| l.ends_with(",agree")));

    let t2 = ok(&["tables", "--which", "2"]);
    assert!(t2.lines().nth(1).unwrap().starts_with("1,3,0,0,0,0,U0,MAXIMAL,"));

    ok(&["tables", "--which", "4", "--diff", diff.to_str().unwrap()]);
    let d = read(&diff);
    let mismatched: Vec<&str> = d.lines().filter(|l| l.ends_with(",subspace_mismatch")).collect();
    assert_eq!(mismatched.len(), 18);
    assert!(mismatched.iter().all(|l| l.contains("\"b2c") || l.contains("\"bc2")));
}

#[test]
fn optics_commands() {
    let v: Value = serde_json::from_str(&ok(&["optics", "compose"])).unwrap();
    assert!(v["residual"].as_f64().unwrap() < 1e-10);
    assert_eq!(v["equivalent"], true);
    let csv = ok(&["optics", "fidelity", "--eps", "0:0.1:3", "--delta", "0:0.1:3"]);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("eps,delta,avg_fidelity"));
    assert!(lines.next().unwrap().starts_with("0,0,1"));
    assert_eq!(csv.lines().count(), 10);
}

#[test]
fn homodyne_sweep() {
    let csv = ok(&["homodyne", "--alpha", "50:60:2", "--gamma-t", "0:1:3"]);
    let rows: Vec<Vec<f64>> = csv.lines().skip(1).map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 6);
    let at = |a: f64, g: f64| rows.iter().find(|r| r[0] == a && r[1] == g).unwrap()[5];
    assert!((at(60.0, 0.0) - 0.9997).abs() < 5e-4);
    assert!((at(50.0, 0.0) - 0.9976).abs() < 5e-4);
    for w in rows.windows(2) {
        if w[0][0] == w[1][0] {
            assert!(w[1][5] <= w[0][5]);
        }
    }
}

#[test]
fn known_scheme() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("k.json");
    let o = ecp(&["known", "--coeffs", "0.8,0.5196152422706632,0.3", "-o", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("differs"));
    let v: Value = serde_json::from_str(&read(&out)).unwrap();
    assert!((v["success_prob"].as_f64().unwrap() - 0.27).abs() < 1e-12);
    assert!((v["paper_claimed"].as_f64().unwrap() - 0.03).abs() < 1e-12);
    assert!((v["fidelity"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    let v: Value = serde_json::from_str(&ok(&["known", "--coeffs", "0.57735,0.57735,0.57735"])).unwrap();
    assert!((v["success_prob"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}
