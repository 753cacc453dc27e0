mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use crmp::syngen::GeneratorConfig;

fn crmp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crmp"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn small_config(dir: &Path) -> String {
    let p = dir.join("small.conf");
    fs::write(&p, common::generator_section(&GeneratorConfig::small())).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn usage_errors_exit_2() {
    let o = crmp(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
    let o = crmp(&["generate", "--bogus-flag", "--out", "x"]);
    assert_eq!(o.status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = crmp(&["generate", "--set", "nosection=1", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("usage"), "{}", stderr(&o));
    assert_eq!(crmp(&["--help"]).status.code(), Some(0));
}

#[test]
fn oracle_check_on_bundled_fixture() {
    let o = crmp(&["oracle-check"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("all path counts match"));
}

#[test]
fn pipeline_verbs_and_single_class_training() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let cfg = small_config(root);
    let p = |name: &str| root.join(name).to_str().unwrap().to_string();

    let o = crmp(&["generate", "--config", &cfg, "--out", &p("data")]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["source/schema.txt", "target/edges/follow.tsv", "anchors.tsv", "labels.tsv", "manifest.json", "config.txt"] {
        assert!(root.join("data").join(f).exists(), "missing {f}");
    }

    let o = crmp(&["ingest", "--config", &cfg, "--data", &p("data"), "--out", &p("ingested")]);
    assert!(o.status.success(), "{}", stderr(&o));
    let stats = fs::read_to_string(root.join("ingested/stats.txt")).unwrap();
    assert!(stats.contains("[source]") && stats.contains("[anchors]"));

    let o = crmp(&["featurize", "--config", &cfg, "--data", &p("ingested"), "--out", &p("feat")]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = fs::read_to_string(root.join("feat/features.tsv")).unwrap();
    let header = table.lines().next().unwrap();
    assert_eq!(header.split('\t').count(), 2 + 738, "user id, label, 738 features");

    let features = p("feat/features.tsv");
    let o = crmp(&["train", "--config", &cfg, "--features", &features, "--out", &p("model")]);
    assert!(o.status.success(), "{}", stderr(&o));

    let o = crmp(&[
        "evaluate", "--config", &cfg, "--model", &p("model/model.txt"), "--features", &features, "--out", &p("scored"),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(root.join("scored/scores.tsv").exists() && root.join("scored/metrics.tsv").exists());

    let o = crmp(&["evaluate", "--config", &cfg, "--data", &p("data"), "--out", &p("cv")]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read_to_string(root.join("cv/report.tsv")).unwrap().lines().count(), 2);

    // every label 0
    let labels: String = fs::read_to_string(root.join("data/labels.tsv"))
        .unwrap()
        .lines()
        .map(|l| format!("{}\t0\n", l.split('\t').next().unwrap()))
        .collect();
    fs::write(root.join("zeros.tsv"), labels).unwrap();
    let o = crmp(&[
        "train", "--config", &cfg, "--features", &features, "--labels", &p("zeros.tsv"), "--out", &p("bad"),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("single-class training set"), "{}", stderr(&o));
    assert!(stderr(&o).contains("train"), "stage named: {}", stderr(&o));
}

#[test]
fn sweep_writes_one_row_per_value_and_variant() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let cfg = small_config(root);
    let out = root.join("sweep");
    let o = crmp(&[
        "sweep", "--config", &cfg, "--axis", "gamma_A", "--values", "0.1:0.8:0.1", "--variant", "all", "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = fs::read_to_string(out.join("report.tsv")).unwrap();
    assert_eq!(report.lines().count(), 1 + 8 * 3);
}
