use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use motion_retouch::engine::{LogTable, Scenario};
use motion_retouch::tape::Tape;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_motion-retouch"));
    cmd.env_remove("RETOUCH_SCENARIO_DIR");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn repo_file(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

/// Short scenario so that every CLI test stays quick.
fn short_scenario(dir: &Path) -> PathBuf {
    let mut sc = Scenario::default();
    sc.duration = 2.0;
    sc.settle_time = 0.1;
    let path = dir.join("short.scn");
    fs::write(&path, sc.to_toml()).unwrap();
    path
}

fn teach(dir: &Path, name: &str, extra: &[&str]) -> PathBuf {
    let sc = short_scenario(dir);
    let out = dir.join(name);
    let mut args = vec!["teach", "--scenario", sc.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = run(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

#[test]
fn teach_writes_tape_log_and_config_echo() {
    let dir = tempfile::tempdir().unwrap();
    let sc = short_scenario(dir.path());
    let out = dir.path().join("tape.csv");
    let o = run(&["teach", "--scenario", sc.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("1001 rows"), "{text}");
    assert!(text.contains("hash="), "{text}");
    assert_eq!(Tape::load(&out).unwrap().len(), 1001);
    assert!(dir.path().join("tape.log.csv").is_file());
    let echoed = Scenario::load(dir.path().join("tape.config.toml")).unwrap();
    assert_eq!(echoed, Scenario::load(&sc).unwrap());
}

#[test]
fn same_seed_gives_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let a = teach(dir.path(), "a.csv", &["--seed", "7"]);
    let b = teach(dir.path(), "b.csv", &["--seed", "7"]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(fs::read(dir.path().join("a.log.csv")).unwrap(), fs::read(dir.path().join("b.log.csv")).unwrap());
}

#[test]
fn missing_scenario_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.csv");
    let o = run(&["teach", "--scenario", "no-such.scn", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no-such.scn"));
    assert!(!out.exists());
}

#[test]
fn scenario_names_resolve_through_env_dir() {
    let o = bin()
        .env("RETOUCH_SCENARIO_DIR", repo_file("scenarios"))
        .args(["scenario", "--scenario", "tube"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let dumped = Scenario::from_toml(&stdout(&o)).unwrap();
    assert_eq!(dumped, Scenario::default());
}

#[test]
fn speedup_lengths_and_factor_checks() {
    let dir = tempfile::tempdir().unwrap();
    let tape = teach(dir.path(), "tape.csv", &[]);
    let fast = dir.path().join("fast.csv");
    let o = run(&["speedup", "--in", tape.to_str().unwrap(), "--factor", "3", "--out", fast.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(Tape::load(&fast).unwrap().len(), 334);

    let same = dir.path().join("same.csv");
    let o = run(&["speedup", "--in", tape.to_str().unwrap(), "--factor", "1", "--out", same.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(fs::read(&same).unwrap(), fs::read(&tape).unwrap());

    let o = run(&["speedup", "--in", tape.to_str().unwrap(), "--factor", "0", "--out", same.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn copy_prints_tally_and_reasons() {
    let dir = tempfile::tempdir().unwrap();
    let tape = teach(dir.path(), "tape.csv", &[]);
    let sc = dir.path().join("short.scn");
    let logs = dir.path().join("logs");
    let o = run(&[
        "copy",
        "--scenario",
        sc.to_str().unwrap(),
        "--tape",
        tape.to_str().unwrap(),
        "--trials",
        "3",
        "--log-dir",
        logs.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    // Two seconds of teaching never reach the grasp.
    assert!(text.contains("success: 0/3"), "{text}");
    assert_eq!(text.matches("missed_grasp").count(), 3, "{text}");
    for i in 1..=3 {
        assert!(logs.join(format!("trial-0{i}.csv")).is_file());
    }
    let a = fs::read(logs.join("trial-01.csv")).unwrap();
    let b = fs::read(logs.join("trial-02.csv")).unwrap();
    // Noise off: only the seed recorded in the header differs.
    let body = |v: &[u8]| String::from_utf8_lossy(v).lines().skip(1).collect::<Vec<_>>().join("\n");
    assert_eq!(body(&a), body(&b));
}

#[test]
fn copy_of_missing_tape_is_a_usage_error() {
    let o = run(&["copy", "--tape", "/nonexistent/tape.csv"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn retouch_needs_exactly_one_source() {
    let dir = tempfile::tempdir().unwrap();
    let tape = teach(dir.path(), "tape.csv", &[]);
    let sc = dir.path().join("short.scn");
    let out = dir.path().join("r.csv");
    let base = [
        "retouch",
        "--scenario",
        sc.to_str().unwrap(),
        "--tape",
        tape.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];

    let o = run(&base);
    assert_eq!(o.status.code(), Some(2));

    let profile = dir.path().join("push.toml");
    fs::write(
        &profile,
        "[[window]]\nt_start = 0.5\nt_end = 1.0\n[window.action]\nkind = \"torque\"\ntorque = [0, 0, 0, 0.2, 0, 0, 0, 0]\n",
    )
    .unwrap();
    let mut both = base.to_vec();
    both.extend(["--intervention", profile.to_str().unwrap(), "--live"]);
    assert_eq!(run(&both).status.code(), Some(2));

    let mut scripted = base.to_vec();
    scripted.extend(["--intervention", profile.to_str().unwrap()]);
    let o = run(&scripted);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(Tape::load(&out).unwrap().len(), 1001);
    assert!(dir.path().join("r.log.csv").is_file());
}

#[test]
fn export_single_and_mean() {
    let dir = tempfile::tempdir().unwrap();
    teach(dir.path(), "a.csv", &[]);
    let mut sc = Scenario::load(dir.path().join("short.scn")).unwrap();
    sc.hand.stiffness *= 1.5;
    let other = dir.path().join("other.scn");
    fs::write(&other, sc.to_toml()).unwrap();
    let b = dir.path().join("b.csv");
    assert!(run(&["teach", "--scenario", other.to_str().unwrap(), "--out", b.to_str().unwrap()]).status.success());
    let (log_a, log_b) = (dir.path().join("a.log.csv"), dir.path().join("b.log.csv"));

    let plot = dir.path().join("plot.csv");
    let o = run(&[
        "export",
        "--log",
        log_a.to_str().unwrap(),
        log_b.to_str().unwrap(),
        "--what",
        "torque",
        "--joint",
        "4",
        "--out",
        plot.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&plot).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,follower_tau4"));
    let rows: Vec<(f64, f64)> = lines
        .map(|l| {
            let (t, v) = l.split_once(',').unwrap();
            (t.parse().unwrap(), v.parse().unwrap())
        })
        .collect();
    let a = LogTable::load(&log_a).unwrap().column("follower_tau4").unwrap();
    let b = LogTable::load(&log_b).unwrap().column("follower_tau4").unwrap();
    assert_eq!(rows.len(), a.len());
    for (i, (_, v)) in rows.iter().enumerate() {
        assert!((v - (a[i] + b[i]) / 2.0).abs() < 1e-12);
    }
    assert!(a.iter().zip(&b).any(|(x, y)| x != y), "logs should differ");

    let o = run(&[
        "export",
        "--log",
        log_a.to_str().unwrap(),
        "--what",
        "angle",
        "--joint",
        "9",
        "--out",
        plot.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}
