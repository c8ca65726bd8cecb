use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ecfmon::bootstrap::{calibrate, BlockParam, BootstrapConfig};
use ecfmon::detector::MonitorConfig;
use ecfmon::{KernelSpec, StatVariant};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde_json::Value;

fn ecfmon(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ecfmon")).args(args).output().unwrap()
}

fn write_csv(dir: &Path, name: &str, header: &str, rows: impl IntoIterator<Item = String>) -> PathBuf {
    let mut text = format!("{header}\n");
    for r in rows {
        text.push_str(&r);
        text.push('\n');
    }
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn normals(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

fn lines(out: &Output) -> Vec<Value> {
    String::from_utf8(out.stdout.clone())
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn constant_input_never_alarms() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_csv(dir.path(), "c.csv", "value", (0..60).map(|_| "2.5".to_string()));
    let out = ecfmon(&["monitor", f.to_str().unwrap(), "--train-len", "30", "--format", "jsonl", "--B", "100"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let records = lines(&out);
    assert_eq!(records.len(), 31);
    let summary = records.last().unwrap();
    assert!(summary["tau"].is_null());
    assert_eq!(summary["p_value"], 1.0);
    assert!(records[..30].iter().all(|r| r["delta"] == 0.0));
}

#[test]
fn mean_shift_is_detected_in_most_runs() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let runs = 20;
    let mut alarms = 0;
    for r in 0..runs {
        let v = 100.0 * (1.0 + rng.random_range(0.0..0.8));
        let x = normals(200, 1000 + r);
        let f = write_csv(
            dir.path(),
            &format!("p1_{r}.csv"),
            "value",
            x.iter().enumerate().map(|(i, e)| format!("{}", e + if (i + 1) as f64 > v { 1.0 } else { 0.0 })),
        );
        let out = ecfmon(&["monitor", f.to_str().unwrap(), "--train-len", "100", "--B", "200", "--seed", &r.to_string()]);
        match out.status.code() {
            Some(2) => alarms += 1,
            Some(0) => {}
            other => panic!("unexpected exit {other:?}: {}", String::from_utf8_lossy(&out.stderr)),
        }
    }
    assert!(alarms * 4 >= runs * 3, "{alarms}/{runs} runs raised an alarm");
}

#[test]
fn reported_critical_value_is_the_950th_replicate_maximum() {
    let dir = tempfile::tempdir().unwrap();
    let x = normals(60, 5);
    let f = write_csv(dir.path(), "x.csv", "value", x.iter().map(|v| v.to_string()));
    let out = ecfmon(&["calibrate", f.to_str().unwrap(), "--train-len", "60", "--alpha", "0.05", "--B", "1000", "--seed", "8", "--format", "jsonl"]);
    assert_eq!(out.status.code(), Some(0));
    let summary = &lines(&out)[0];

    let cfg = MonitorConfig::new(KernelSpec::gaussian(1.0, 1).unwrap(), 0.0, 1, 0.05, StatVariant::Cumulative).unwrap();
    let cal = calibrate(&x, &cfg, &BootstrapConfig::new(1000, BlockParam::Auto, 8).unwrap()).unwrap();
    assert_eq!(summary["c_alpha"].as_f64().unwrap().to_bits(), cal.maxima[949].to_bits());
    assert_eq!(summary["p_B"].as_f64().unwrap(), cal.p_b_used);
}

#[test]
fn jsonl_report_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_csv(
        dir.path(),
        "d.csv",
        "date,value",
        normals(80, 6).iter().enumerate().map(|(i, v)| format!("2021-01-{:02},{v}", i % 28 + 1)),
    );
    let out = ecfmon(&["monitor", f.to_str().unwrap(), "--train-len", "40", "--B", "100", "--gamma", "0.3", "--format", "jsonl"]);
    assert_ne!(out.status.code(), Some(1));
    let text = String::from_utf8(out.stdout).unwrap();
    for line in text.lines() {
        let v: Value = serde_json::from_str(line).unwrap();
        let again: Value = serde_json::from_str(&serde_json::to_string(&v).unwrap()).unwrap();
        assert_eq!(v, again);
    }
    let summary: Value = serde_json::from_str(text.lines().last().unwrap()).unwrap();
    for key in ["tau", "p_value", "c_alpha", "p_B", "seed", "config"] {
        assert!(summary.get(key).is_some(), "missing {key}");
    }
    assert_eq!(summary["config"]["gamma"][0], 0.3);
    let first: Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(first["t"], 1);
    assert!(first["date"].is_string());
}

#[test]
fn input_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let empty = write_csv(dir.path(), "empty.csv", "", []);
    let out = ecfmon(&["monitor", empty.to_str().unwrap(), "--train-len", "2"]);
    assert_eq!(out.status.code(), Some(1));

    let nan = write_csv(dir.path(), "nan.csv", "value", ["0.1", "0.2", "NaN", "0.4"].map(String::from));
    let out = ecfmon(&["monitor", nan.to_str().unwrap(), "--train-len", "2"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 4"));

    let ok = write_csv(dir.path(), "ok.csv", "value", ["0", "1", "1"].map(String::from));
    assert_eq!(ecfmon(&["monitor", ok.to_str().unwrap(), "--train-len", "9"]).status.code(), Some(1));
    assert_eq!(ecfmon(&["monitor", ok.to_str().unwrap(), "--train-len", "2", "--gamma", "0.7"]).status.code(), Some(1));
    assert_eq!(ecfmon(&["monitor", ok.to_str().unwrap(), "--train-len", "2", "--m", "1,2"]).status.code(), Some(1));
    assert_eq!(ecfmon(&["monitor", "/nonexistent.csv", "--train-len", "2"]).status.code(), Some(1));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_csv(dir.path(), "x.csv", "value", normals(50, 7).iter().map(|v| v.to_string()));
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "train_len = 25\nB = 150\nalpha = 0.1\nseed = 4\nformat = \"jsonl\"\np_B = 0.5\n").unwrap();
    let out = ecfmon(&["calibrate", f.to_str().unwrap(), "--config", cfg.to_str().unwrap(), "--alpha", "0.2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let s = &lines(&out)[0];
    assert_eq!(s["config"]["alpha"], 0.2);
    assert_eq!(s["config"]["B"], 150);
    assert_eq!(s["config"]["seed"], 4);
    assert_eq!(s["p_B"], 0.5);
    assert_eq!(s["train_len"], 25);
}

#[test]
fn simulate_emits_one_row_per_cell() {
    let out = ecfmon(&["simulate", "--dgp", "S1", "--train-len", "40", "--a", "0.5,2", "--reps", "50", "--format", "jsonl", "--seed", "3"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let records = lines(&out);
    assert_eq!(records.len(), 3);
    assert_eq!(records[0]["a"], 0.5);
    assert_eq!(records[1]["a"], 2.0);
    assert_eq!(records[0]["dgp"], "S1");
    assert!(records[2]["config"]["simulation"]["reps"] == 50);
    assert_eq!(ecfmon(&["simulate", "--dgp", "S9", "--train-len", "40"]).status.code(), Some(1));

    let table = ecfmon(&["simulate", "--dgp", "S1,P1", "--train-len", "40", "--reps", "50"]);
    let text = String::from_utf8(table.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("S1") || l.starts_with("P1")).count(), 2);
}

#[test]
fn retro_locates_a_level_shift() {
    let dir = tempfile::tempdir().unwrap();
    let x = normals(120, 9);
    let f = write_csv(
        dir.path(),
        "r.csv",
        "value",
        x.iter().enumerate().map(|(i, e)| format!("{}", e + if i >= 60 { 2.0 } else { 0.0 })),
    );
    let out = ecfmon(&["retro", f.to_str().unwrap(), "--B", "200", "--format", "jsonl"]);
    assert_eq!(out.status.code(), Some(2));
    let split = lines(&out).last().unwrap()["split"].as_u64().unwrap();
    assert!((55..=65).contains(&split), "split {split}");
}

#[test]
fn follow_on_stream_file_extends_monitoring() {
    let dir = tempfile::tempdir().unwrap();
    let x = normals(60, 10);
    let head = write_csv(dir.path(), "a.csv", "value", x[..40].iter().map(|v| v.to_string()));
    let tail = write_csv(dir.path(), "b.csv", "value", x[40..].iter().map(|v| v.to_string()));
    let whole = write_csv(dir.path(), "w.csv", "value", x.iter().map(|v| v.to_string()));
    let split = ecfmon(&["pvalue", head.to_str().unwrap(), "--stream", tail.to_str().unwrap(), "--train-len", "30", "--format", "jsonl", "--B", "100"]);
    let joined = ecfmon(&["pvalue", whole.to_str().unwrap(), "--train-len", "30", "--format", "jsonl", "--B", "100"]);
    let (a, b) = (&lines(&split)[0], &lines(&joined)[0]);
    assert_eq!(a["max_delta"], b["max_delta"]);
    assert_eq!(a["p_value"], b["p_value"]);
    assert_eq!(a["monitored"], 30);
}
