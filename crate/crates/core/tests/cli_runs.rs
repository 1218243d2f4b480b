use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lognls::Field;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lognls"))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, edit: impl FnOnce(&mut serde_json::Value)) -> PathBuf {
    let text = std::fs::read_to_string(config("double_well.json")).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    edit(&mut v);
    let path = dir.join("config.json");
    std::fs::write(&path, v.to_string()).unwrap();
    path
}

#[test]
fn solve_writes_all_artifacts() {
    let out = tempfile::tempdir().unwrap();
    let o = out.path().to_str().unwrap();
    let res = run(&[
        "solve",
        "--config",
        config("double_well.json").to_str().unwrap(),
        "--out",
        o,
        "--jobs",
        "2",
    ]);
    assert_eq!(
        res.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    for f in [
        "levels.csv",
        "report.json",
        "fields/u_well1.csv",
        "fields/u_well2.csv",
        "fields/v_well1.csv",
        "fields/v_well2.csv",
    ] {
        assert!(out.path().join(f).exists(), "{f}");
    }
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.path().join("report.json")).unwrap())
            .unwrap();
    assert_eq!(report["separation_ok"], true);
    assert_eq!(report["success"], true);
    let levels = std::fs::read_to_string(out.path().join("levels.csv")).unwrap();
    assert_eq!(levels.lines().count(), 3);
    assert!(levels
        .lines()
        .skip(1)
        .all(|l| l.split(',').nth(1) == Some("Converged")));

    // field dumps read back, and v(x) = u(x/ε) lives on the scaled grid
    let (gu, u) = Field::read_csv(std::io::BufReader::new(
        std::fs::File::open(out.path().join("fields/u_well2.csv")).unwrap(),
    ))
    .unwrap();
    let (gv, v) = Field::read_csv(std::io::BufReader::new(
        std::fs::File::open(out.path().join("fields/v_well2.csv")).unwrap(),
    ))
    .unwrap();
    assert_eq!(u.values(), v.values());
    assert!((gv.radius() - 0.1 * gu.radius()).abs() < 1e-12);
    let peak = gv.nodes()[v
        .values()
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .unwrap()
        .0];
    assert!((peak[0] - 2.0).abs() <= gv.h());
}

#[test]
fn solve_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = config("double_well.json");
    for (dir, jobs) in [(&a, "1"), (&b, "2")] {
        let res = run(&[
            "solve",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            dir.path().to_str().unwrap(),
            "--jobs",
            jobs,
        ]);
        assert_eq!(res.status.code(), Some(0));
    }
    for f in [
        "levels.csv",
        "report.json",
        "fields/u_well1.csv",
        "fields/v_well2.csv",
    ] {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn delta_above_cap_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), |v| v["numerics"]["delta"] = 0.5.into());
    let res = run(&[
        "solve",
        "--config",
        path.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(2));
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(
        err.contains("numerics.delta") && err.contains("e^(-3/2)"),
        "{err}"
    );
    assert!(!dir.path().join("report.json").exists());
}

#[test]
fn large_eps_fails_honestly() {
    let dir = tempfile::tempdir().unwrap();
    let res = run(&[
        "solve",
        "--config",
        config("double_well_eps5.json").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(1));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap())
            .unwrap();
    assert_eq!(report["success"], false);
    assert_eq!(report["all_converged"], false);
    assert_eq!(report["localization_failures"], serde_json::json!([1, 2]));
    let levels = std::fs::read_to_string(dir.path().join("levels.csv")).unwrap();
    assert!(!levels.contains("Converged"));
}

#[test]
fn sweep_outputs_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().to_str().unwrap();
    let cfg = config("double_well.json");
    let res = run(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--eps",
        "0.4,0.2",
        "--out",
        o,
    ]);
    assert_eq!(res.status.code(), Some(0));
    let table = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(
        table.lines().next(),
        Some("eps,well,level,distance_to_well,status")
    );
    assert_eq!(table.lines().count(), 5);

    let empty = write_config(dir.path(), |v| v["sweep_eps"] = serde_json::json!([]));
    assert_eq!(
        run(&["sweep", "--config", empty.to_str().unwrap(), "--out", o])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        run(&[
            "sweep",
            "--config",
            cfg.to_str().unwrap(),
            "--eps",
            "0.1,0.2",
            "--out",
            o
        ])
        .status
        .code(),
        Some(2)
    );
}

#[test]
fn verify_passes_and_usage_errors() {
    let res = run(&["verify", "--verbose"]);
    assert_eq!(res.status.code(), Some(0));
    let text = String::from_utf8_lossy(&res.stdout);
    assert!(text.lines().all(|l| l.starts_with("PASS")));
    assert!(text.contains("slack"));
    assert_eq!(run(&["bogus"]).status.code(), Some(2));
    assert_eq!(
        run(&["solve", "--config", "/nonexistent.json"])
            .status
            .code(),
        Some(2)
    );
}
