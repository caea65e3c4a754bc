use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn falltime(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_falltime"))
        .current_dir(dir)
        .env_remove("FALLTIME_SEED")
        .args(["--log-level", "warn"])
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn files(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap().flatten() {
            let p = e.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn generate_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    for name in ["a", "b"] {
        ok(&falltime(tmp.path(), &["generate", "--seed", "9", "--count", "6", "--dataset-dir", name]));
    }
    let (a, b) = (files(&tmp.path().join("a")), files(&tmp.path().join("b")));
    assert_eq!(a.len(), 1 + 2 * 12);
    assert!(a == b, "datasets differ");
    assert_eq!(manifest(&tmp.path().join("a"))["seed"], 9);
}

#[test]
fn seed_precedence_is_env_then_flag_then_config() {
    let tmp = TempDir::new().unwrap();
    let run = |dir: &str, extra: &[&str], env: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_falltime"));
        cmd.current_dir(tmp.path()).env_remove("FALLTIME_SEED");
        if let Some(v) = env {
            cmd.env("FALLTIME_SEED", v);
        }
        cmd.args(["--log-level", "warn", "generate", "--count", "1", "--dataset-dir", dir]).args(extra);
        ok(&cmd.output().unwrap());
        manifest(&tmp.path().join(dir))["seed"].as_u64().unwrap()
    };
    fs::write(tmp.path().join("run.toml"), "seed = 33\n").unwrap();
    assert_eq!(run("env", &[], Some("11")), 11);
    assert_eq!(run("flag", &["--seed", "22"], Some("11")), 22);
    assert_eq!(run("file", &["--seed", "22", "--config", "run.toml"], Some("11")), 33);
}

#[test]
fn error_kinds_map_to_exit_codes() {
    let tmp = TempDir::new().unwrap();
    let code = |args: &[&str]| falltime(tmp.path(), args).status.code();
    assert_eq!(code(&["generate", "--count", "1", "--robot-params", "missing.toml"]), Some(2));
    assert_eq!(code(&["features", "--dataset-dir", "nowhere"]), Some(2));
    assert_eq!(code(&["generate", "--count", "1", "--feature-set", "nope"]), Some(9));
    assert_eq!(code(&["generate", "--count", "1", "--fold", "0"]), Some(5));
    assert_eq!(code(&["frobnicate"]), Some(64));
    fs::write(tmp.path().join("bad.toml"), "[robot]\nmass = -1\n").unwrap();
    let bad = code(&["generate", "--count", "1", "--robot-params", "bad.toml"]);
    assert!(matches!(bad, Some(3) | Some(4)), "{bad:?}");
}

/// Trains a fixed-lead NN, evaluates it, re-scores its plot series and
/// checks that everything agrees; then checks the hash guard.
#[test]
fn train_eval_and_plot_data_agree() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    ok(&falltime(dir, &["generate", "--seed", "4", "--count", "25"]));
    let common = ["--detector", "nn", "--fold", "1"];
    let out = ok(&falltime(dir, &[&common[..], &["train", "--regime", "both", "--lead-time", "0.5"]].concat()));
    let model = PathBuf::from(out.trim());
    assert!(dir.join(&model).exists(), "{out}");
    let again = dir.join("again.json");
    fs::copy(dir.join(&model), &again).unwrap();
    ok(&falltime(dir, &[&common[..], &["train", "--regime", "both", "--lead-time", "0.5", "--model-dir", "m2"]].concat()));
    assert_eq!(fs::read(dir.join(&model)).unwrap(), fs::read(dir.join("m2").join(model.file_name().unwrap())).unwrap());

    ok(&falltime(dir, &[&common[..], &["eval"]].concat()));
    let stem = model.file_stem().unwrap().to_str().unwrap();
    let eval: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("reports").join(format!("eval_{stem}.json"))).unwrap()).unwrap();
    let results = eval["trajectories"].as_array().unwrap();
    assert!(!results.is_empty());

    let model_arg = model.to_str().unwrap();
    ok(&falltime(dir, &[&common[..], &["plot-data", "--model", model_arg, "--out", "plot"]].concat()));
    for r in results {
        let id = r["id"].as_u64().unwrap();
        let csv = fs::read_to_string(dir.join("plot").join(format!("traj_{id:06}.csv"))).unwrap();
        let rows: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
        assert!(!rows.is_empty());
        let first_faulty = rows.iter().find(|l| l.ends_with(",faulty")).map(|l| {
            let t: f64 = l.split(',').next().unwrap().parse().unwrap();
            t
        });
        let declared = r["declared"].as_f64();
        assert_eq!(first_faulty, declared, "trajectory {id}");
        for l in rows {
            let cols: Vec<&str> = l.split(',').collect();
            let (value, threshold): (f64, f64) = (cols[1].parse().unwrap(), cols[2].parse().unwrap());
            assert_eq!(value > threshold, cols[3] == "faulty");
        }
    }

    // a different window length changes the config hash
    let mismatch = falltime(dir, &[&common[..], &["--n-window", "8", "eval"]].concat());
    assert_eq!(mismatch.status.code(), Some(17));
    ok(&falltime(dir, &[&common[..], &["--n-window", "8", "plot-data", "--model", model_arg, "--out", "p2", "--force"]].concat()));
}
