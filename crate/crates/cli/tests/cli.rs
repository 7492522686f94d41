use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn dope(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dope")).args(args).env_remove("DOPE_THREADS").output().expect("spawn dope")
}

fn write_config(dir: &Path) -> String {
    let path = dir.join("exp.toml");
    let text = format!(
        r#"seeds = [1, 2]
output = "{out}"

[environment]
horizon = 3
reward = "scalar-gaussian"

[data]
per_cell = 100
seed = 5
path = "{out}/data.csv"

[algorithm]
name = "fle-gmm"
components = 2
optimizer = {{ rule = "adam", learning_rate = 0.01, iterations = 100 }}

[eval]
samples = 2000
"#,
        out = dir.display()
    );
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn gen_data_run_eval_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());

    let out = dope(&["gen-data", "--config", &cfg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("data.csv").exists());
    assert!(dir.path().join("data.csv.manifest.json").exists());

    let out = dope(&["run", "--config", &cfg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let runs: Vec<_> = ["seed-1", "seed-2"].iter().map(|s| dir.path().join("fle-gmm").join(s)).collect();
    for r in &runs {
        assert!(r.join("run_manifest.json").exists());
        assert!(r.join("model_h3.json").exists());
    }

    let r1 = runs[0].to_str().unwrap();
    let r2 = runs[1].to_str().unwrap();
    let out = dope(&["eval", "--runs", r1, r2, "--metric", "tv", "--steps", "1,3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "h,algorithm,metric,mean,stderr");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("1,fle-gmm,tv,"));
    assert!(!csv.contains("n/a"));

    let out = dope(&["eval", "--runs", r1, "--metric", "w1", "--steps", "2"]);
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().contains("n/a"));
}

#[test]
fn single_seed_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out = dope(&["run", "--config", &cfg, "--seed", "7"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("fle-gmm/seed-7/run_manifest.json").exists());
    assert!(!dir.path().join("fle-gmm/seed-1").exists());
}

#[test]
fn errors_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope");
    let out = dope(&["eval", "--runs", missing.to_str().unwrap(), "--metric", "tv", "--steps", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[environment]\nhorizon = 3\nreward = \"scalar-gaussian\"\nunknown = 1\n").unwrap();
    assert_eq!(dope(&["gen-data", "--config", bad.to_str().unwrap()]).status.code(), Some(2));

    assert_eq!(dope(&["reproduce", "--table", "table9", "--out", "x"]).status.code(), Some(2));
}

#[test]
fn invalid_thread_count_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out = Command::new(env!("CARGO_BIN_EXE_dope"))
        .args(["gen-data", "--config", &cfg])
        .env("DOPE_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("DOPE_THREADS"));
}

#[test]
fn help_lists_every_command() {
    let out = dope(&["--help"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for cmd in ["gen-data", "run", "eval", "reproduce"] {
        assert!(text.contains(cmd), "missing {cmd}");
    }
}
