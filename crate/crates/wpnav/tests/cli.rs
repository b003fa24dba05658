//! End-to-end behaviour of the `wpnav` binary: exit codes, messages and
//! run-directory determinism.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;
use wpnav::config::RunConfig;
use wpnav::rundir::{self, content_hash};

const SMALL: &str = r#"
[world]
block_count = 60
area_extent = 60.0

[camera]
width = 32
height = 18

[path]
kind = "l"

[envelope]
auxiliary_path_count = 2

[train]
epochs = 3

[eval]
trials = 2

[compare]
variants = ["FCNN", "GRU-2"]
"#;

fn wpnav(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wpnav"))
        .current_dir(dir)
        .env_remove("WPNAV_SEED")
        .env_remove("WPNAV_OUT")
        .args(args)
        .output()
        .expect("spawn wpnav")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn small_config(dir: &Path) -> String {
    let p = dir.join("small.toml");
    fs::write(&p, SMALL).unwrap();
    p.display().to_string()
}

#[test]
fn path_stats_reports_distance_and_turning() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("demo.json"), r#"{"id": "demo", "waypoints": [[0,0],[0,10],[10,10]]}"#).unwrap();
    let o = wpnav(tmp.path(), &["--json", "path", "stats", "demo.json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["distance"].as_f64().unwrap(), 20.0);
    assert!((v["sum_angle_change"].as_f64().unwrap() - std::f64::consts::FRAC_PI_2).abs() < 1e-12);

    let human = wpnav(tmp.path(), &["path", "stats", "demo.json"]);
    let text = String::from_utf8_lossy(&human.stdout);
    assert!(text.contains("distance: 20"), "{text}");
}

#[test]
fn train_without_dataset_names_the_missing_file() {
    let tmp = TempDir::new().unwrap();
    let cfg = small_config(tmp.path());
    let o = wpnav(tmp.path(), &["--config", &cfg, "train"]);
    assert_eq!(o.status.code(), Some(3));
    let err = stderr(&o);
    assert!(err.contains("error[validation]"), "{err}");
    assert!(err.contains("manifest.json"), "{err}");

    let j = wpnav(tmp.path(), &["--config", &cfg, "--json", "train"]);
    let v: Value = serde_json::from_slice(&j.stdout).unwrap();
    assert_eq!(v["error"]["exit_code"], 3);
    assert_eq!(v["error"]["kind"], "validation");
}

#[test]
fn usage_errors_exit_2() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(wpnav(tmp.path(), &["fly"]).status.code(), Some(2));
    assert_eq!(wpnav(tmp.path(), &["train", "--variant", "LSTM"]).status.code(), Some(2));
    assert_eq!(wpnav(tmp.path(), &["--seed", "minus-one", "world", "gen"]).status.code(), Some(2));
    assert_eq!(wpnav(tmp.path(), &["path", "make", "spiral"]).status.code(), Some(2));
}

#[test]
fn bad_configs_exit_3() {
    let tmp = TempDir::new().unwrap();
    let write = |name: &str, body: &str| {
        let p = tmp.path().join(name);
        fs::write(&p, body).unwrap();
        p.display().to_string()
    };
    let unknown = write("unknown.toml", "[sim]\nspeeed = 2.0\n");
    let invalid = write("invalid.toml", "[sim]\nspeed = -1.0\n");
    for cfg in [unknown.as_str(), invalid.as_str(), "absent.toml"] {
        let o = wpnav(tmp.path(), &["--config", cfg, "world", "gen"]);
        assert_eq!(o.status.code(), Some(3), "{cfg}: {}", stderr(&o));
    }
}

#[test]
fn held_lock_is_a_runtime_error() {
    let tmp = TempDir::new().unwrap();
    let name = RunConfig::default().resolve(None).unwrap().run_name();
    let run = tmp.path().join("runs").join(name);
    fs::create_dir_all(&run).unwrap();
    fs::write(run.join(rundir::LOCK_FILE), "").unwrap();
    let o = wpnav(tmp.path(), &["world", "gen"]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(run.join(rundir::LOCK_FILE).exists());
}

#[test]
fn steps_chain_through_the_run_directory() {
    let tmp = TempDir::new().unwrap();
    let cfg = small_config(tmp.path());
    for step in [&["world", "gen"][..], &["path", "make"], &["dataset", "build"], &["train", "--variant", "FCNN"]] {
        let mut args = vec!["--config", cfg.as_str(), "--quiet"];
        args.extend_from_slice(step);
        let o = wpnav(tmp.path(), &args);
        assert_eq!(o.status.code(), Some(0), "{step:?}: {}", stderr(&o));
        assert!(o.stdout.is_empty());
    }
    // GRU-2 was never trained
    let o = wpnav(tmp.path(), &["--config", &cfg, "compare"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("gru2.ckpt"), "{}", stderr(&o));

    let o = wpnav(tmp.path(), &["--config", &cfg, "--json", "eval", "--variant", "FCNN", "--random-start", "true"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["trials"], 2);
    assert_eq!(v["random_start"], true);
    let run = tmp.path().join(v["run_dir"].as_str().unwrap());
    assert!(run.join("eval/fcnn-random-start/trial-1.csv").exists());

    let o = wpnav(tmp.path(), &["--config", &cfg, "plot", "--variant", "FCNN", "--random-start", "true"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(fs::read_to_string(run.join(rundir::PLOT)).unwrap().starts_with("<svg"));
}

#[test]
fn pipeline_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    let cfg = small_config(tmp.path());
    let mut hashes = Vec::new();
    for out in ["a", "b"] {
        let o = wpnav(tmp.path(), &["--config", &cfg, "--seed", "1", "--out", out, "--quiet", "--json", "pipeline"]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let v: Value = serde_json::from_slice(&o.stdout).unwrap();
        let run = tmp.path().join(v["run_dir"].as_str().unwrap());
        for artifact in [rundir::WORLD, rundir::PATH, rundir::CONFIG_FILE, rundir::REPORT_CSV, rundir::PLOT] {
            assert!(run.join(artifact).exists(), "{artifact}");
        }
        assert!(run.join("dataset/manifest.json").exists());
        assert!(run.join("models/fcnn.ckpt").exists() && run.join("models/gru2.ckpt").exists());
        assert!(!run.join(rundir::LOCK_FILE).exists());
        hashes.push(content_hash(&run).unwrap());
    }
    assert_eq!(hashes[0], hashes[1]);
}
