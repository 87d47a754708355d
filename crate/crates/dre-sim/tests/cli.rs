//! End-to-end checks of the installed binary: exit codes, error reporting,
//! file output, and byte-level determinism across separate processes.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dre-sim"))
}

fn run(args: &[&str]) -> Output {
    binary().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Unique scratch path; tests clean up behind themselves.
fn scratch(name: &str) -> PathBuf {
    let mut p = std::env::temp_dir();
    p.push(format!("dre-sim-test-{}-{name}", std::process::id()));
    p
}

#[test]
fn help_and_version_exit_zero() {
    let help = run(&["--help"]);
    assert_eq!(help.status.code(), Some(0));
    assert!(stdout(&help).contains("Usage"));
    let version = run(&["--version"]);
    assert_eq!(version.status.code(), Some(0));
    assert!(stdout(&version).contains("dre-sim"));
}

#[test]
fn bad_invocations_exit_one() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["simulate"]).status.code(), Some(1));
    assert_eq!(run(&["sweep", "--preset", "scenario1"]).status.code(), Some(1));
}

#[test]
fn missing_config_file_exits_two() {
    let out = run(&["simulate", "--config", "/no/such/scenario.conf"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("/no/such/scenario.conf"));
}

#[test]
fn config_errors_name_the_offending_line() {
    let path = scratch("bad-key.conf");
    fs::write(&path, "protocol = ierap\nreaders = 20\nvelocity = 3\n").unwrap();
    let out = binary().args(["simulate", "--config"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("line 3"), "stderr was: {err}");
    assert!(err.contains("velocity"), "stderr was: {err}");
    fs::remove_file(&path).ok();
}

#[test]
fn unusable_distribution_parameters_exit_two() {
    assert_eq!(run(&["dist", "--k", "0", "--m", "4"]).status.code(), Some(2));
}

#[test]
fn dist_prints_one_probability_per_slot() {
    let out = run(&["dist", "--k", "4", "--m", "16"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("slot,probability"));
    let probs: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(probs.len(), 4);
    assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-5);
    assert!(probs.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn simulate_writes_identical_bytes_across_processes() {
    let config = scratch("det.conf");
    fs::write(
        &config,
        "protocol = ierap\nreaders = 30\ntags = 200\nrounds = 12\nseed = 42\n\
         mobility = waypoint\nspeed_min = 1\nspeed_max = 3\npause = 0\n",
    )
    .unwrap();
    let mut artifacts = Vec::new();
    for pass in ["a", "b"] {
        let csv = scratch(&format!("det-{pass}.csv"));
        let log = scratch(&format!("det-{pass}.log"));
        let out = binary()
            .args(["simulate", "--config"])
            .arg(&config)
            .arg("--output")
            .arg(&csv)
            .arg("--events")
            .arg(&log)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
        artifacts.push((fs::read(&csv).unwrap(), fs::read(&log).unwrap()));
        fs::remove_file(&csv).ok();
        fs::remove_file(&log).ok();
    }
    assert_eq!(artifacts[0].0, artifacts[1].0, "metrics CSV differs between runs");
    assert_eq!(artifacts[0].1, artifacts[1].1, "event log differs between runs");
    assert!(!artifacts[0].1.is_empty());
    fs::remove_file(&config).ok();
}

#[test]
fn seed_flag_overrides_the_scenario_seed() {
    let config = scratch("seed.conf");
    fs::write(&config, "protocol = gdra\nreaders = 40\nrounds = 8\nseed = 1\n").unwrap();
    let base = binary().args(["simulate", "--config"]).arg(&config).output().unwrap();
    let overridden = binary()
        .args(["simulate", "--config"])
        .arg(&config)
        .args(["--seed", "2"])
        .output()
        .unwrap();
    assert_eq!(base.status.code(), Some(0));
    assert_eq!(overridden.status.code(), Some(0));
    let (a, b) = (stdout(&base), stdout(&overridden));
    assert_ne!(a, b);
    assert!(a.lines().nth(1).unwrap().contains(",1,"));
    assert!(b.lines().nth(1).unwrap().contains(",2,"));
    fs::remove_file(&config).ok();
}

#[test]
fn sweep_emits_a_sorted_multi_protocol_table() {
    let out = run(&["sweep", "--preset", "scenario1", "--readers", "100", "--seeds", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "protocol,readers,channels,seed,rounds,successful_reads,throughput_rps,unique_tags_known,avg_waiting_time_s,network_energy_j"
    );
    // Four protocols, two seeds each, sorted by protocol then seed.
    assert_eq!(lines.len(), 9);
    let keys: Vec<(String, u64)> = lines[1..]
        .iter()
        .map(|l| {
            let mut f = l.split(',');
            let protocol = f.next().unwrap().to_string();
            let seed: u64 = f.nth(2).unwrap().parse().unwrap();
            (protocol, seed)
        })
        .collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
    assert_eq!(keys.iter().filter(|(p, _)| p == "ierap").count(), 2);
}

#[test]
fn unknown_preset_exits_two() {
    let out = run(&["sweep", "--preset", "scenario9", "--readers", "100"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("scenario9"));
}

#[test]
fn replay_verifies_the_event_log_reproduces_the_energy() {
    let config = scratch("replay.conf");
    fs::write(&config, "protocol = frca1\nreaders = 25\ntags = 120\nrounds = 10\nseed = 6\n").unwrap();
    let log = scratch("replay.log");
    let out = binary()
        .args(["replay", "--config"])
        .arg(&config)
        .arg("--events")
        .arg(&log)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    assert!(stdout(&out).starts_with("replay ok:"), "stdout: {}", stdout(&out));
    assert!(fs::read_to_string(&log).unwrap().lines().count() > 0);
    fs::remove_file(&config).ok();
    fs::remove_file(&log).ok();
}
