use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use hangsim::output::{MONITORS_HEADER, TRAJECTORY_HEADER};

fn hangsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hangsim"))
        .args(args)
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const PENDULUM: &str = "N=60\ngamma=2\norder=2\ng=0,0,-1\ndt=auto\nT_end=0.2\nsample_every=0.1\ninitial=pendulum(0.01,1)\n";

#[test]
fn simulate_writes_outputs_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.cfg", PENDULUM);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = hangsim(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let traj = fs::read_to_string(a.join("trajectory.csv")).unwrap();
    assert_eq!(traj.lines().next(), Some(TRAJECTORY_HEADER));
    assert_eq!(traj.lines().count(), 1 + 3 * 61);
    let mon = fs::read_to_string(a.join("monitors.csv")).unwrap();
    assert_eq!(mon.lines().next(), Some(MONITORS_HEADER));
    assert_eq!(mon.lines().count(), 4);
    for f in ["trajectory.csv", "monitors.csv", "summary.json"] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f} differs"
        );
    }
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["status"], "completed");
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["mesh"]["intervals"], 60);
    assert_eq!(manifest["initial"]["kind"], "builtin");
}

#[test]
fn csv_initial_data_is_hashed() {
    let dir = tempfile::tempdir().unwrap();
    let mut rows = String::from("s,x1,x2,x3,v1,v2,v3\n");
    for i in 0..=40 {
        let s = (i as f64 / 40.0).powi(2);
        rows.push_str(&format!("{s},0,0,{},0,0,0\n", s - 1.0));
    }
    write(dir.path(), "init.csv", &rows);
    let cfg = write(
        dir.path(),
        "run.cfg",
        "N=40\nT_end=0.05\ninitial=csv:init.csv\n",
    );
    let out = dir.path().join("out");
    let o = hangsim(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["initial"]["kind"], "file");
    assert_eq!(manifest["initial"]["sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();
    assert_eq!(code(&hangsim(&["simulate", "--bogus"])), 2);
    assert_eq!(
        code(&hangsim(&[
            "simulate",
            "--config",
            "/no/such/file",
            "--out",
            out
        ])),
        4
    );
    let bad = write(dir.path(), "bad.cfg", "N=ten\n");
    assert_eq!(
        code(&hangsim(&["simulate", "--config", &bad, "--out", out])),
        3
    );
    let unknown = write(dir.path(), "unknown.cfg", "colour=red\n");
    assert_eq!(
        code(&hangsim(&["simulate", "--config", &unknown, "--out", out])),
        3
    );
    let cfl = write(dir.path(), "cfl.cfg", "N=400\ndt=0.1\nT_end=0.2\n");
    assert_eq!(
        code(&hangsim(&["simulate", "--config", &cfl, "--out", out])),
        3
    );
    let norms_in = write(dir.path(), "u.csv", "s,u\n0,0\n0.5,nope\n1,1\n");
    assert_eq!(code(&hangsim(&["norms", "--in", &norms_in, "--m", "1"])), 5);
    assert_eq!(code(&hangsim(&["verify-lemmas", "--trials", "0"])), 2);
}

#[test]
fn norms_of_identity() {
    let dir = tempfile::tempdir().unwrap();
    let mut rows = String::from("s,u\n");
    for i in 0..=200 {
        let s = (i as f64 / 200.0).powi(2);
        rows.push_str(&format!("{s},{s}\n"));
    }
    let input = write(dir.path(), "u.csv", &rows);
    let o = hangsim(&["norms", "--in", &input, "--m", "1"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    // X^1 of u = s: sqrt(∫ s² + ∫ s·1) = sqrt(1/3 + 1/2).
    let x1 = v["X1"].as_f64().unwrap();
    assert!((x1 - (1.0f64 / 3.0 + 0.5).sqrt()).abs() < 1e-3, "{x1}");
}

#[test]
fn bvp_solve_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut rows = String::from("s,q,h\n");
    for i in 0..=100 {
        let s = (i as f64 / 100.0).powi(2);
        rows.push_str(&format!("{s},0,1\n"));
    }
    let input = write(dir.path(), "bvp.csv", &rows);
    let out = dir.path().join("bvp");
    let o = hangsim(&[
        "bvp-solve",
        "--in",
        &input,
        "--a",
        "-0.5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).lines().all(|l| l.starts_with("PASS")));
    let sol = fs::read_to_string(out.join("solution.csv")).unwrap();
    assert_eq!(sol.lines().next(), Some("s,tau,tau_prime,phi,psi"));
    let last: Vec<f64> = sol
        .lines()
        .last()
        .unwrap()
        .split(',')
        .map(|x| x.parse().unwrap())
        .collect();
    // tau = (a + 1)s - s²/2 with a = -0.5.
    assert!((last[1] - 0.0).abs() < 1e-10);
    assert!((last[2] + 0.5).abs() < 1e-8);
    assert!(out.join("certificates.json").exists());
}

#[test]
fn jets_of_rotating_string() {
    let dir = tempfile::tempdir().unwrap();
    let mut rows = String::from("s,x1,x2,x3,v1,v2,v3\n");
    for i in 0..=100 {
        let s = (i as f64 / 100.0).powi(2);
        rows.push_str(&format!("{s},{},0,0,0,{},0\n", s - 1.0, s - 1.0));
    }
    let data = write(dir.path(), "rot.csv", &rows);
    let o = hangsim(&["jets", "--data", &data, "--g", "0,0,0"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert_eq!(
        text.lines().next(),
        Some("s,xtt1,xtt2,xtt3,xttt1,xttt2,xttt3")
    );
    for line in text.lines().skip(1) {
        let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        assert!((v[1] - (1.0 - v[0])).abs() < 1e-8, "{line}");
        assert!((v[5] - (1.0 - v[0])).abs() < 1e-8, "{line}");
    }
}

#[test]
fn verify_lemmas_reports_every_lemma() {
    let o = hangsim(&["verify-lemmas", "--seed", "3", "--trials", "4"]);
    let text = stdout(&o);
    for lemma in hangsim::corpus::LEMMAS {
        assert!(
            text.lines()
                .any(|l| l.split_whitespace().nth(1) == Some(lemma)),
            "{lemma} missing"
        );
    }
    let failed = text.lines().any(|l| l.starts_with("FAIL"));
    assert_eq!(code(&o), if failed { 1 } else { 0 });
}
