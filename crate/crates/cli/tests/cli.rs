use std::path::Path;
use std::process::{Command, Output};

fn mmpl(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mmpl"))
        .args(args)
        .current_dir(dir)
        .env_remove("MMPL_OUT")
        .output()
        .expect("binary runs")
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path).unwrap().lines().map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn schedule_unit_costs_two_segments() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("unit.toml"), "[cost]\npreset = \"unit\"\n").unwrap();
    let out =
        mmpl(&["schedule", "--config", "unit.toml", "--segments", "2", "--workers", "1,2", "--out", "run"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(&dir.path().join("run/schedule.csv"));
    assert_eq!(rows[0], ["workers", "makespan", "speedup", "peak_memory", "critical_path", "total_work"]);
    assert_eq!((rows[1][0].as_str(), rows[1][1].as_str()), ("1", "6.000000"));
    assert_eq!((rows[2][0].as_str(), rows[2][1].as_str()), ("2", "4.000000"));
    for name in ["graph.txt", "gantt_w1.csv", "gantt_w2.svg", "latency.csv", "speedup.svg", "manifest.json"] {
        assert!(dir.path().join("run").join(name).is_file(), "{name}");
    }
    let gantt = csv_rows(&dir.path().join("run/gantt_w2.csv"));
    assert_eq!(gantt[0], ["task_id", "kind", "segment", "worker", "start", "finish", "memory"]);
    assert_eq!(gantt.len(), 8);
}

#[test]
fn reruns_are_identical_apart_from_manifest() {
    let dir = tempfile::tempdir().unwrap();
    for sub in ["drift", "schedule", "generate", "compare"] {
        let common = ["--segments", "3", "--seed", "11", "--mode", "minmem"];
        let a = mmpl(&[&[sub, "--out", "a"][..], &common].concat(), dir.path());
        let b = mmpl(&[&[sub, "--out", "b"][..], &common].concat(), dir.path());
        assert!(a.status.success() && b.status.success(), "{sub}: {}", String::from_utf8_lossy(&a.stderr));
        let mut names: Vec<_> =
            std::fs::read_dir(dir.path().join("a")).unwrap().map(|e| e.unwrap().file_name()).collect();
        names.sort();
        assert!(names.len() > 2);
        for name in names.iter().filter(|n| *n != "manifest.json") {
            let x = std::fs::read(dir.path().join("a").join(name)).unwrap();
            let y = std::fs::read(dir.path().join("b").join(name)).unwrap();
            assert_eq!(x, y, "{sub}/{name:?}");
        }
        std::fs::remove_dir_all(dir.path().join("a")).unwrap();
        std::fs::remove_dir_all(dir.path().join("b")).unwrap();
    }
}

#[test]
fn compare_default_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let out = mmpl(&["compare", "--out", "c"], dir.path());
    assert!(out.status.success());
    let rows = csv_rows(&dir.path().join("c/summary.csv"));
    assert_eq!(rows[0].last().unwrap(), "ratio");
    let ratio: f64 = rows[1].last().unwrap().parse().unwrap();
    assert!(ratio >= 8.0 && (ratio - 9.5).abs() < 1e-6, "{ratio}");
}

#[test]
fn zero_noise_drift_csv_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("z.toml"), "trials = 10\n[noise]\neps = 0.0\n").unwrap();
    let out = mmpl(&["drift", "--config", "z.toml", "--out", "z"], dir.path());
    assert!(out.status.success());
    let rows = csv_rows(&dir.path().join("z/drift.csv"));
    assert_eq!(rows.len(), 1 + 191);
    assert!(rows[1..].iter().all(|r| r[1..].iter().all(|v| v == "0.000000")));
}

#[test]
fn config_errors_exit_two_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "[layout]\nt_b = 25\nt_c = 20\n").unwrap();
    std::fs::write(dir.path().join("typo.toml"), "[noise]\nepsilon = 0.1\n").unwrap();
    std::fs::write(dir.path().join("other.toml"), "experiment = \"drift\"\n").unwrap();
    for args in [
        vec!["schedule", "--config", "bad.toml", "--out", "o"],
        vec!["drift", "--config", "typo.toml", "--out", "o"],
        vec!["schedule", "--config", "other.toml", "--out", "o"],
        vec!["compare", "--config", "missing.toml", "--out", "o"],
        vec!["generate", "--mode", "sideways", "--out", "o"],
        vec!["schedule", "--workers", "0", "--out", "o"],
        vec!["validate-config", "--config", "bad.toml"],
    ] {
        let out = mmpl(&args, dir.path());
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"), "{args:?}");
        assert!(!dir.path().join("o").exists(), "{args:?}");
    }
    let typo = mmpl(&["validate-config", "--config", "typo.toml"], dir.path());
    let msg = String::from_utf8_lossy(&typo.stderr);
    assert!(msg.contains("epsilon") && msg.contains("line 2"), "{msg}");
}

#[test]
fn validate_config_prints_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let out = mmpl(&["validate-config", "--segments", "4"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("segments = 4"));
    assert!(text.contains("workers = [1, 2, 4]"));
    assert!(text.contains("trials = 1000"));
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_mmpl"))
        .args(["generate", "--segments", "2"])
        .current_dir(dir.path())
        .env("MMPL_OUT", "from-env")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("from-env/frames.csv").is_file());
    assert!(!dir.path().join("from-env/.mmpl-staging").exists());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("from-env/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 0);
    assert!(manifest["created_unix_seconds"].as_u64().unwrap() > 0);
}
