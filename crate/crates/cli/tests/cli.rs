use std::path::Path;
use std::process::{Command, Output};

fn sqzphase(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sqzphase"))
        .env_remove("SQZPHASE_OUT_DIR")
        .arg("--out-dir")
        .arg(out)
        .args(args)
        .output()
        .expect("spawn sqzphase")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn bounds_for_pure_six_db_state() {
    let dir = tempfile::tempdir().unwrap();
    let o = sqzphase(
        dir.path(),
        &[
            "bounds",
            "--squeezed-db",
            "6.0206",
            "--antisqueezed-db",
            "6.0206",
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let curve = std::fs::read_to_string(dir.path().join("bounds_curve.csv")).unwrap();
    let mut lines = curve.lines();
    assert_eq!(
        lines.next().unwrap(),
        "phase,fisher,cramer_rao,qfi_pure,qfi_coherent"
    );
    assert!(lines.next().unwrap().starts_with("0.0,0.0,"));
    let json: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("bounds.json")).unwrap()).unwrap();
    let opt = json["optimal_phase"].as_f64().unwrap();
    assert!((opt - 0.2450).abs() < 1e-4);
    assert!(stdout(&o).contains("phi_opt"));
}

#[test]
fn degenerate_probe_exits_with_invalid_spec_code() {
    let dir = tempfile::tempdir().unwrap();
    let o = sqzphase(dir.path(), &["bounds", "--r", "0"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("degenerate"));
}

#[test]
fn argument_errors_exit_one_and_help_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        sqzphase(dir.path(), &["sweep-phase", "--bogus"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        sqzphase(dir.path(), &["sweep-phase", "--modes", "sideways"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(sqzphase(dir.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn invalid_sweep_spec_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("res");
    let o = sqzphase(&out, &["sweep-phase", "--repetitions", "1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!out.exists());
    let o = sqzphase(
        &out,
        &["sweep-phase", "--n-tot", "100,200", "--repetitions", "2"],
    );
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn micro_sweep_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "sweep-phase",
        "--phases",
        "0.7",
        "--n-tot",
        "500",
        "--repetitions",
        "2",
        "--grid-points",
        "512",
    ];
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(sqzphase(&a, &args).status.success());
    assert!(sqzphase(&b, &args).status.success());
    for name in [
        "sweep_phase_runs.csv",
        "sweep_phase_summary.csv",
        "sweep_phase_meta.json",
    ] {
        let x = std::fs::read(a.join(name)).unwrap();
        let y = std::fs::read(b.join(name)).unwrap();
        assert_eq!(x, y, "{name}");
    }
    let runs = std::fs::read_to_string(a.join("sweep_phase_runs.csv")).unwrap();
    assert_eq!(runs.lines().count(), 1 + 2 * 2);
}

#[test]
fn config_file_and_env_out_dir() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.toml");
    std::fs::write(
        &cfg,
        "phases = [0.4, 1.2]\nn_tot = [400, 800]\nrepetitions = 3\nmodes = [\"adaptive\"]\ngrid_points = 256\nseed = 5\n",
    )
    .unwrap();
    let out = dir.path().join("from_env");
    let o = Command::new(env!("CARGO_BIN_EXE_sqzphase"))
        .env("SQZPHASE_OUT_DIR", &out)
        .args(["sweep-n", "--config"])
        .arg(&cfg)
        .args(["--prefix", "ladder"])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let scaling = std::fs::read_to_string(out.join("ladder_scaling.csv")).unwrap();
    assert!(scaling.starts_with("n_tot,mode,phases,repetitions,mean_variance"));
    assert_eq!(scaling.lines().count(), 3);
    let meta: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("ladder_meta.json")).unwrap()).unwrap();
    assert_eq!(meta["spec"]["master_seed"], 5);
    assert!(meta["slopes"]["adaptive"].is_f64());
}

#[test]
fn run_one_trace_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let o = sqzphase(
        dir.path(),
        &[
            "run-one",
            "--phase",
            "0.9",
            "--n-tot",
            "2000",
            "--grid-points",
            "512",
        ],
    );
    assert!(o.status.success());
    let text = stdout(&o);
    for stage in ["[prepare]", "[rough]", "[feedback]", "[final]", "[result]"] {
        assert!(text.contains(stage), "{text}");
    }
    let o = sqzphase(
        dir.path(),
        &["run-one", "--phase", "0.9", "--nonadaptive", "--json"],
    );
    assert!(o.status.success());
    let rec: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(rec["mode"], "nonadaptive");
    assert_eq!(rec["feedback_shift"], 0.0);
    let o = sqzphase(dir.path(), &["run-one", "--phase", "2.0"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn bench_lut_report_and_dump() {
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("table.txt");
    let o = sqzphase(
        dir.path(),
        &[
            "bench-lut",
            "--samples",
            "100000",
            "--grid-points",
            "64",
            "--bins",
            "256",
            "--dump-table",
        ],
    );
    // --dump-table needs a value
    assert_eq!(o.status.code(), Some(1));
    let o = Command::new(env!("CARGO_BIN_EXE_sqzphase"))
        .arg("--out-dir")
        .arg(dir.path())
        .args([
            "bench-lut",
            "--samples",
            "100000",
            "--grid-points",
            "64",
            "--bins",
            "256",
            "--dump-table",
        ])
        .arg(&dump)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("bench_lut.json")).unwrap()).unwrap();
    assert_eq!(report["grid_points"], 64);
    assert_eq!(report["bins"], 256);
    assert_eq!(report["scale"], 1 << 20);
    assert!(report["machine"]["os"].is_string());
    assert!(report["lut"]["updates_per_sec"].as_f64().unwrap() > 0.0);
    let text = std::fs::read_to_string(&dump).unwrap();
    assert!(text.starts_with("sqzphase-lut 1\ngrid_points 64\nbins 256\n"));
    assert_eq!(text.lines().count(), 9 + 256);

    let o = sqzphase(dir.path(), &["bench-lut", "--samples", "10"]);
    assert_eq!(o.status.code(), Some(1));
}
