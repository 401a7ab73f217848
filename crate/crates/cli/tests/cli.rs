use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const TWO_BY_THREE: &str = r#"
name = "cli-small"
epochs = 5
seeds = [3, 4, 5]
instances = 1

[problem]
kind = "matrix_game"
p1 = 5
samples = 20

[[methods]]
solver = "vfosa_plus"
estimator = "lsarah"

[[methods]]
solver = "og"
"#;

fn vfosa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vfosa"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("exp.toml");
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn csv_files(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".csv") && n != "summary.csv")
        .collect();
    v.sort();
    v
}

/// Drops the trailing `wall_ms` column.
fn without_wall(text: &str) -> Vec<String> {
    text.lines()
        .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head).to_string())
        .collect()
}

#[test]
fn run_writes_six_traces_and_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TWO_BY_THREE);
    let out = dir.path().join("out");
    let o = vfosa(&[
        "run",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--threads",
        "2",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(csv_files(&out).len(), 6);
    let manifest = fs::read_to_string(out.join("manifest.toml")).unwrap();
    assert!(manifest.contains("config_digest"));
    assert_eq!(manifest.matches("[[runs]]").count(), 6);
}

#[test]
fn rerun_gives_identical_numeric_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TWO_BY_THREE);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(vfosa(&[
        "run",
        "--config",
        &cfg,
        "--out",
        a.to_str().unwrap(),
        "--threads",
        "1"
    ])
    .status
    .success());
    assert!(vfosa(&[
        "run",
        "--config",
        &cfg,
        "--out",
        b.to_str().unwrap(),
        "--threads",
        "3"
    ])
    .status
    .success());
    for f in csv_files(&a) {
        let ta = fs::read_to_string(a.join(&f)).unwrap();
        let tb = fs::read_to_string(b.join(&f)).unwrap();
        assert_eq!(without_wall(&ta), without_wall(&tb), "{f}");
    }
    assert_eq!(
        fs::read(a.join("manifest.toml")).unwrap(),
        fs::read(b.join("manifest.toml")).unwrap()
    );
}

#[test]
fn thread_count_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TWO_BY_THREE);
    let out = dir.path().join("out");
    let o = Command::new(env!("CARGO_BIN_EXE_vfosa"))
        .args(["run", "--config", &cfg, "--out", out.to_str().unwrap()])
        .env("VFOSA_THREADS", "2")
        .output()
        .unwrap();
    assert!(o.status.success());
    let o = Command::new(env!("CARGO_BIN_EXE_vfosa"))
        .args(["run", "--config", &cfg, "--out", out.to_str().unwrap()])
        .env("VFOSA_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn invalid_config_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &TWO_BY_THREE.replace("samples = 20", "samples = 20\nwealth = 3"),
    );
    let o = vfosa(&[
        "run",
        "--config",
        &cfg,
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("wealth"));

    let cfg = write_config(
        dir.path(),
        &TWO_BY_THREE.replace("[problem]", "[params]\nlambda = 1e6\n\n[problem]"),
    );
    let o = vfosa(&[
        "run",
        "--config",
        &cfg,
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("params") && err.contains("lambda"), "{err}");
    assert!(!dir.path().join("o").exists());
}

#[test]
fn missing_output_dir_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TWO_BY_THREE);
    let o = vfosa(&["run", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("output_dir"));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(vfosa(&[]).status.code(), Some(2));
    assert_eq!(vfosa(&["run"]).status.code(), Some(2));
    assert_eq!(vfosa(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn validate_passes_and_catches_a_wrong_constant() {
    let o = vfosa(&["validate"]);
    let text = String::from_utf8_lossy(&o.stdout).to_string();
    assert!(o.status.success(), "{text}");
    assert!(!text.contains("FAIL"));
    assert!(text.lines().filter(|l| l.starts_with("PASS")).count() >= 12);

    let o = vfosa(&["validate", "--fault-beta-bar"]);
    assert_eq!(o.status.code(), Some(1));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(
        text.lines()
            .any(|l| l.starts_with("FAIL residual inequality")),
        "{text}"
    );
}

#[test]
fn validate_pass_set_across_seeds() {
    let pass_set = |seed: &str| -> Vec<String> {
        let o = vfosa(&["validate", "--seed", seed]);
        String::from_utf8_lossy(&o.stdout)
            .lines()
            .filter(|l| l.starts_with("PASS") || l.starts_with("FAIL"))
            .map(|l| l.split(':').next().unwrap().to_string())
            .collect()
    };
    let base = pass_set("0");
    for seed in ["1", "2", "3", "4"] {
        assert_eq!(pass_set(seed), base, "seed {seed}");
    }
}

#[test]
fn compare_writes_fixed_summary() {
    let dir = tempfile::tempdir().unwrap();
    let text = TWO_BY_THREE.replace("seeds = [3, 4, 5]", "seeds = [3]");
    let text = format!("{text}\n[[methods]]\nsolver = \"og\"\nlabel = \"og-copy\"\n");
    let cfg = write_config(dir.path(), &text);
    let out = dir.path().join("out");
    assert!(
        vfosa(&["run", "--config", &cfg, "--out", out.to_str().unwrap()])
            .status
            .success()
    );
    let o = vfosa(&[
        "compare",
        "--manifest",
        out.join("manifest.toml").to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    let mut lines = summary.lines();
    assert_eq!(
        lines.next().unwrap(),
        "method,estimator,final_mean,final_std,auc_log,epochs_to_1e-2"
    );
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r[3] == "0"));
    let og = rows.iter().find(|r| r[0] == "og").unwrap();
    let copy = rows.iter().find(|r| r[0] == "og-copy").unwrap();
    assert_eq!(og[1..], copy[1..]);
}

#[test]
fn compare_missing_manifest_fails() {
    let o = vfosa(&["compare", "--manifest", "/nonexistent/manifest.toml"]);
    assert_ne!(o.status.code(), Some(0));
}
