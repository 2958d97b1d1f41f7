use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use lab_imprecision::data::{generate_synthetic, write_visits_csv, GeneratorConfig, VISIT_HEADER};
use lab_imprecision::lstm::load;

const SMALL: &str = r#"
runs = 1
train_n = 30
sweep_deltas = [0.0, 0.05]
targets = ["tsh"]
[generator]
n_patients = 40
[model]
hidden_layers = 1
hidden_units = 4
[train]
epochs = 1
batch_size = 10
"#;

fn bin(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lab-imprecision"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn generate_and_preprocess() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("small.toml"), SMALL).unwrap();
    let o = bin(
        &["generate", "--config", "small.toml", "--out", "g"],
        tmp.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let visits = fs::read_to_string(tmp.path().join("g/visits.csv")).unwrap();
    assert_eq!(visits.lines().next().unwrap(), VISIT_HEADER.join(","));

    let o = bin(
        &[
            "preprocess",
            "--config",
            "small.toml",
            "--input",
            "g/visits.csv",
            "--out",
            "p",
        ],
        tmp.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let dataset = fs::read_to_string(tmp.path().join("p/dataset.csv")).unwrap();
    assert_eq!(dataset.lines().count(), 1 + 40 * 7);
    assert!(tmp.path().join("p/exclusions.csv").exists());
}

#[test]
fn train_writes_loadable_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("small.toml"), SMALL).unwrap();
    let o = bin(
        &[
            "train",
            "--config",
            "small.toml",
            "--target",
            "both",
            "--out",
            "m",
        ],
        tmp.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for t in ["tsh", "trab"] {
        let a = load(&fs::read(tmp.path().join(format!("m/model_{t}.lstm"))).unwrap()).unwrap();
        assert_eq!(a.config.target.key(), t);
    }
}

#[test]
fn audit_then_report_rebuild() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("small.toml"), SMALL).unwrap();
    let o = bin(
        &[
            "audit",
            "--config",
            "small.toml",
            "--seed",
            "5",
            "--runs",
            "2",
            "--out",
            "a",
        ],
        tmp.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let used = fs::read_to_string(tmp.path().join("a/config_used.toml")).unwrap();
    assert!(
        used.contains("master_seed = 5") && used.contains("runs = 2"),
        "{used}"
    );
    let summary = fs::read(tmp.path().join("a/sweep_summary.csv")).unwrap();
    fs::remove_file(tmp.path().join("a/sweep_summary.csv")).unwrap();
    assert_eq!(code(&bin(&["report", "--out", "a"], tmp.path())), 0);
    assert_eq!(
        fs::read(tmp.path().join("a/sweep_summary.csv")).unwrap(),
        summary
    );
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path();
    assert_eq!(code(&bin(&["--help"], p)), 0);
    assert_eq!(code(&bin(&["audit", "--target", "ft3"], p)), 1);
    assert_eq!(code(&bin(&["frobnicate"], p)), 1);

    fs::write(p.join("typo.toml"), "runz = 2\n").unwrap();
    let o = bin(&["audit", "--config", "typo.toml"], p);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("runz"));
    assert_eq!(code(&bin(&["audit", "--config", "missing.toml"], p)), 1);

    assert_eq!(code(&bin(&["preprocess", "--input", "missing.csv"], p)), 2);
    fs::write(p.join("bad.csv"), "patient_id,sex\nA,F\n").unwrap();
    assert_eq!(code(&bin(&["preprocess", "--input", "bad.csv"], p)), 2);
    assert_eq!(code(&bin(&["report", "--out", "nowhere"], p)), 2);

    // every patient the same age: zero-variance feature, a training failure
    let mut cohort = generate_synthetic(&GeneratorConfig {
        n_patients: 40,
        ..Default::default()
    })
    .unwrap();
    for s in cohort.statics.values_mut() {
        s.age_years = 50.0;
    }
    write_visits_csv(fs::File::create(p.join("flat.csv")).unwrap(), &cohort).unwrap();
    fs::write(p.join("small.toml"), SMALL).unwrap();
    let o = bin(
        &[
            "train",
            "--config",
            "small.toml",
            "--input",
            "flat.csv",
            "--out",
            "m",
        ],
        p,
    );
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}
