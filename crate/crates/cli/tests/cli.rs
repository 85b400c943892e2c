use std::path::Path;
use std::process::{Command, Output};

fn dimdist(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dimdist"))
        .args(args)
        .output()
        .expect("spawn dimdist")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.display().to_string()
}

#[test]
fn passing_run_writes_report_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g");
    let o = dimdist(&["grushin", "--seed", "7", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("PASS comparability_constant"));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["experiment"], "grushin_compare");
    assert_eq!(report["config"]["seed"], 7);
    assert!(report["version"].is_string());
    for r in report["results"].as_array().unwrap() {
        assert!(r["tolerance"].is_number() && r["provenance"].is_string());
    }
    let csv = std::fs::read_to_string(out.join("grushin_pairs.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1001);
}

#[test]
fn replay_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        let o = dimdist(&["carpet", "--seed", "3", "--out", d.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
    }
    for f in ["carpet_ratios.csv", "carpet_partial_sums.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let strip = |p: &Path| {
        let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap();
        v["wall_clock_seconds"] = serde_json::Value::Null;
        v["config"]["output_dir"] = serde_json::Value::Null;
        v
    };
    assert_eq!(strip(&a.join("report.json")), strip(&b.join("report.json")));
}

#[test]
fn failing_verdict_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "g.json",
        r#"{"experiment":"grushin_compare","params":{"pairs":200,"c1_max":1.0}}"#,
    );
    let out = dir.path().join("o");
    let o = dimdist(&["grushin", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL comparability_constant"));
    assert!(out.join("report.json").exists());
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let out = out.to_str().unwrap();

    let alpha = write(
        dir.path(),
        "a.json",
        r#"{"experiment":"foliation_survey","params":{"chart":"heis_right","map":{"kind":"smooth_warp","amplitude":0.1},"p":5.0,"alphas":[3.5]}}"#,
    );
    let o = dimdist(&["survey", "--config", &alpha, "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("(2, 3.3333333333333335]"));

    let mismatch = write(dir.path(), "m.json", r#"{"experiment":"grushin_compare","params":{}}"#);
    let o = dimdist(&["carpet", "--config", &mismatch, "--out", out]);
    assert_eq!(o.status.code(), Some(2));

    let o = dimdist(&["sharpness", "--replicates", "0", "--out", out]);
    assert_eq!(o.status.code(), Some(2));

    let garbage = write(dir.path(), "bad.json", "{not json");
    let o = dimdist(&["regularity", "--config", &garbage, "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!Path::new(out).join("report.json").exists());
}

#[test]
fn shipped_configs_match_the_reference_configs() {
    let docs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/configs");
    let pairs = [
        ("sharpness", dimdist::harness::Experiment::Sharpness),
        ("universal", dimdist::harness::Experiment::UniversalBound),
        ("survey", dimdist::harness::Experiment::FoliationSurvey),
        ("regularity", dimdist::harness::Experiment::Regularity),
        ("grushin", dimdist::harness::Experiment::GrushinCompare),
        ("carpet", dimdist::harness::Experiment::CarpetRegularity),
    ];
    for (name, e) in pairs {
        let text = std::fs::read_to_string(docs.join(format!("{name}.json"))).unwrap();
        let c = dimdist::harness::ExperimentConfig::from_json(&text).unwrap();
        c.validate().unwrap();
        assert_eq!(c, dimdist::harness::ExperimentConfig::default_for(e), "{name}");
        let printed = dimdist(&[name, "--print-config"]);
        assert_eq!(printed.status.code(), Some(0));
        assert_eq!(String::from_utf8(printed.stdout).unwrap().trim_end(), text.trim_end(), "{name}");
    }
}
