//! End-to-end CLI tests: exit-code contract, report emission on failure,
//! curve files, and generator reproducibility.

use std::fs;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sparsedom"))
}

#[test]
fn run_passing_config_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = serde_json::json!({
        "experiment": "verify-sparse",
        "geometry": {"n": 1, "L": 5},
        "family": {"kind": "canonical", "map": "mean-center"},
        "params": {"etas": ["1/2"]},
        "input": {"kind": "smooth"},
        "seeds": [1, 2],
    });
    let cfg_path = dir.path().join("cfg.json");
    fs::write(&cfg_path, cfg.to_string()).unwrap();
    let out_dir = dir.path().join("out");
    let status = bin()
        .args(["run", "--config"])
        .arg(&cfg_path)
        .arg("--out")
        .arg(&out_dir)
        .status()
        .unwrap();
    assert!(status.success());
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["pass"], serde_json::json!(true));
    assert!(report["aggregate"]["runs"].as_u64().unwrap() >= 2);
}

#[test]
fn failing_assertion_exits_one_and_still_writes_report() {
    // the tent family satisfies the chain condition at r = 2 with constant 1;
    // checking it at r = 4 measures a constant > 1, so the run must fail
    let dir = tempfile::tempdir().unwrap();
    let cfg = serde_json::json!({
        "experiment": "ellr-check",
        "geometry": {"n": 1, "L": 4},
        "family": {"kind": "tent"},
        "params": {"r": 4.0},
        "input": {"kind": "uniform", "density": 0.5},
        "seeds": [1],
    });
    let cfg_path = dir.path().join("cfg.json");
    fs::write(&cfg_path, cfg.to_string()).unwrap();
    let out_dir = dir.path().join("out");
    let status = bin()
        .args(["run", "--config"])
        .arg(&cfg_path)
        .arg("--out")
        .arg(&out_dir)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1), "assertion failures exit 1");
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["pass"], serde_json::json!(false), "report written on failure");
    let c = report["runs"][0]["constant"].as_f64().unwrap();
    assert!(c > 1.0);
}

#[test]
fn bad_config_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("cfg.json");
    // bilinear with q == r is rejected before any computation
    fs::write(
        &cfg_path,
        serde_json::json!({
            "experiment": "bilinear",
            "geometry": {"n": 1, "L": 4},
            "params": {"q": 1.0, "r": 1.0},
            "seeds": [1],
        })
        .to_string(),
    )
    .unwrap();
    let status = bin().args(["run", "--config"]).arg(&cfg_path).status().unwrap();
    assert_eq!(status.code(), Some(2));
    // unknown keys are rejected too
    fs::write(&cfg_path, r#"{"experiment":"tent","geometry":{"n":1,"L":4},"seeds":[1],"junk":0}"#)
        .unwrap();
    let status = bin().args(["run", "--config"]).arg(&cfg_path).status().unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn goodlambda_config_emits_curves() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = serde_json::json!({
        "experiment": "goodlambda-sums",
        "geometry": {"n": 1, "L": 7},
        "family": {"kind": "dyadic-sums"},
        "params": {"q": 1.0, "gamma": 0.5},
        "input": {"kind": "measure", "atoms": 1},
        "seeds": [3],
    });
    let cfg_path = dir.path().join("cfg.json");
    fs::write(&cfg_path, cfg.to_string()).unwrap();
    let out_dir = dir.path().join("out");
    let status = bin()
        .args(["run", "--config"])
        .arg(&cfg_path)
        .arg("--out")
        .arg(&out_dir)
        .status()
        .unwrap();
    assert!(status.success());
    let csv = fs::read_to_string(out_dir.join("curve_seed3.csv")).unwrap();
    assert!(csv.starts_with("lambda,gamma_or_eps,bad_measure,superlevel_measure,ratio,overlap_min"));
    let rows = sparsedom::runner::parse_curve_csv(&csv).unwrap();
    assert!(!rows.is_empty());
    for r in rows {
        assert!(r.ratio >= 0.0 && r.ratio <= 1.0 + 1e-12);
    }
}

#[test]
fn generate_is_seed_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for path in [&a, &b] {
        let status = bin()
            .args(["generate", "--kind", "spiky", "--seed", "1", "--depth", "8", "--atoms", "1"])
            .arg("--out")
            .arg(path)
            .status()
            .unwrap();
        assert!(status.success());
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap(), "same seed, byte-identical files");
    let f = sparsedom::runner::load_grid(&a).unwrap();
    assert_eq!(f.values.iter().filter(|&&v| v != 0.0).count(), 1, "one atom, deterministic");
}

#[test]
fn potential_subcommand_runs() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let status = bin()
        .args([
            "potential",
            "--gamma",
            "0.5",
            "--q",
            "1",
            "--depth",
            "8",
            "--seeds",
            "1,2",
        ])
        .arg("--out")
        .arg(&out_dir)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out_dir.join("report.json").exists());
    assert!(out_dir.join("curve_seed1.csv").exists());
}
