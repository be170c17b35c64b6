mod common;

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command as Process;

use selfintro::classifier::ClassifierModel;
use selfintro::persist::load_model;
use selfintro_cli::pipeline::{CLASSIFIER, CLASSIFIER_SORTED};
use selfintro_cli::runlog::{self, file_sha256};
use selfintro_cli::{execute, Command};

use common::{have_mnist, smoke_config};

const STAGES: [&str; 8] = [
    "train",
    "autoencode",
    "estimate",
    "atlas",
    "reorder",
    "constellation",
    "attack",
    "violin",
];

fn command(name: &str) -> Command {
    match name {
        "train" => Command::Train {
            noise_inject: None,
            history_probe: Some(5),
        },
        "autoencode" => Command::Autoencode,
        "estimate" => Command::Estimate,
        "atlas" => Command::Atlas,
        "reorder" => Command::Reorder,
        "constellation" => Command::Constellation,
        "attack" => Command::Attack,
        "violin" => Command::Violin,
        other => panic!("unknown stage {other}"),
    }
}

fn csv_checksums(dir: &Path) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|e| e == "csv") {
                let key = p.strip_prefix(dir).unwrap().display().to_string();
                out.insert(key, file_sha256(&p).unwrap());
            }
        }
    }
    out
}

fn run_all(dir: &Path) {
    for s in STAGES {
        execute(smoke_config(dir), &command(s)).unwrap_or_else(|e| panic!("{s}: {e:#}"));
    }
}

#[test]
fn full_pipeline_is_reproducible() {
    if !have_mnist() {
        return;
    }
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_all(a.path());
    run_all(b.path());

    for f in ["violin_samples.csv", "violin_summary.csv", "attacks.csv", "constellation.csv"] {
        assert!(a.path().join(f).is_file(), "{f} missing");
    }
    let log = runlog::read(a.path()).unwrap();
    let names: Vec<&str> = log.iter().map(|e| e.command.as_str()).collect();
    assert_eq!(names, STAGES);
    for e in &log {
        assert_eq!(e.seed, 7);
        assert_eq!(e.config_hash, log[0].config_hash);
        assert!(!e.version.is_empty());
        for (path, sum) in &e.artifacts {
            assert_eq!(sum.as_str().unwrap().len(), 64, "{path}");
        }
    }

    let ca = csv_checksums(a.path());
    let cb = csv_checksums(b.path());
    assert!(ca.len() > 10);
    assert_eq!(ca, cb);

    // Reordering kept every test label.
    let reorder = &log[4].metrics;
    assert_eq!(reorder["label_agreement"].as_f64(), Some(1.0));
    assert!(reorder["max_output_change"].as_f64().unwrap() < 1e-5);
    let c: ClassifierModel = load_model(a.path().join(CLASSIFIER)).unwrap();
    let s: ClassifierModel = load_model(a.path().join(CLASSIFIER_SORTED)).unwrap();
    assert_eq!(c.spec, s.spec);

    // Every trajectory file holds one row per executed step.
    let summary = std::fs::read_to_string(a.path().join("attacks.csv")).unwrap();
    for line in summary.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let name = format!("attacks/sample{:05}_target{}.csv", f[0].parse::<usize>().unwrap(), f[1]);
        let rows = std::fs::read_to_string(a.path().join(name)).unwrap().lines().count() - 1;
        assert_eq!(rows, f[3].parse::<usize>().unwrap());
    }
}

#[test]
fn missing_prerequisites_name_the_stage() {
    if !have_mnist() {
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let err = execute(smoke_config(dir.path()), &Command::Autoencode).unwrap_err();
    assert!(format!("{err:#}").contains("classifier"), "{err:#}");
    // A classifier alone is not enough for the estimator.
    execute(smoke_config(dir.path()), &command("train")).unwrap();
    let err = execute(smoke_config(dir.path()), &Command::Estimate).unwrap_err();
    assert!(format!("{err:#}").contains("autoencoder"), "{err:#}");
    let err = execute(smoke_config(dir.path()), &Command::Reorder).unwrap_err();
    assert!(format!("{err:#}").contains("atlas"), "{err:#}");
}

#[test]
fn export_reads_back_stored_artifacts() {
    if !have_mnist() {
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    execute(smoke_config(dir.path()), &command("train")).unwrap();
    execute(smoke_config(dir.path()), &Command::Autoencode).unwrap();
    let out = execute(
        smoke_config(dir.path()),
        &Command::Export {
            artifact: CLASSIFIER.into(),
            out: None,
        },
    )
    .unwrap();
    let exported = std::fs::read_to_string(&out.artifacts[0]).unwrap();
    let history = std::fs::read_to_string(dir.path().join("classifier_history.csv")).unwrap();
    assert_eq!(exported, history);

    let out = execute(
        smoke_config(dir.path()),
        &Command::Export {
            artifact: "latents_test.csv".into(),
            out: Some(dir.path().join("again.svg")),
        },
    )
    .unwrap();
    let svg = std::fs::read_to_string(&out.artifacts[0]).unwrap();
    let rows = std::fs::read_to_string(dir.path().join("latents_test.csv"))
        .unwrap()
        .lines()
        .count()
        - 1;
    assert_eq!(svg.matches("<circle").count(), rows);

    let out = execute(
        smoke_config(dir.path()),
        &Command::Export {
            artifact: "snapshots.sint".into(),
            out: None,
        },
    )
    .unwrap();
    let snaps = std::fs::read_to_string(&out.artifacts[0]).unwrap();
    assert_eq!(snaps, std::fs::read_to_string(dir.path().join("snapshots.csv")).unwrap());
}

#[test]
fn binary_reports_errors_with_nonzero_status() {
    let bin = env!("CARGO_BIN_EXE_selfintro");
    let out = Process::new(bin).arg("no-such-command").output().unwrap();
    assert!(!out.status.success());
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "seed = 1\n").unwrap();
    let out = Process::new(bin)
        .args(["--config", cfg.to_str().unwrap(), "train"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let out = Process::new(bin)
        .args(["--data-dir", dir.path().to_str().unwrap(), "-o"])
        .arg(dir.path().join("o"))
        .arg("train")
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("does not exist"));
}

#[test]
fn config_command_prints_effective_toml() {
    let bin = env!("CARGO_BIN_EXE_selfintro");
    let out = Process::new(bin)
        .args(["--seed", "42", "--preset", "paper", "config"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let c = selfintro_cli::config::RunConfig::from_toml(&text).unwrap();
    assert_eq!(c.seed, 42);
    assert_eq!(c.classifier.cycle_length, 3000);
}
