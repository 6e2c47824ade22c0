//! Exit codes, artifact layout and determinism of the command line driver.

mod support;

use support::{invoke, invoke_with, json, point_dir, Table};

const SMALL: &str = "U = 2\nE = 0.5\nT = 1\nOmega_L = 1.1\neta = 0.05\nn_max = 2\n\
omega_min = -6\nomega_max = 6\nn_omega = 256\nn_eps = 12\n";

fn files(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    ["spectra.csv", "distribution.csv", "self_energy.csv"]
        .iter()
        .map(|f| (f.to_string(), std::fs::read(dir.join(f)).unwrap()))
        .collect()
}

#[test]
fn run_writes_every_listed_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    let r = invoke(tmp.path(), "run", SMALL, "out", &["--emit-plots"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let out = tmp.path().join("out");
    let manifest = json(&out.join("manifest.json"));
    let listed: Vec<&str> = manifest["files"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    for f in ["spectra.csv", "distribution.csv", "self_energy.csv", "config.toml", "manifest.json", "plot.gp"] {
        assert!(listed.contains(&f), "{f} not listed");
        assert!(out.join(f).exists(), "{f} missing");
    }
    assert_eq!(manifest["config"]["U"], 2.0);
    assert_eq!(manifest["convergence"]["converged"], true);
    assert!(manifest["sum_rule_residual"].as_f64().unwrap() >= 0.0);
    let spectra = Table::read(&out.join("spectra.csv"));
    assert_eq!(spectra.header, ["omega [D]", "ldos_row0 [1/D]", "ldos_full [1/D]"]);
    assert_eq!(spectra.column(0).len(), 256);
    let first = std::fs::read_to_string(out.join("spectra.csv")).unwrap();
    let mantissa = first.lines().nth(1).unwrap().split(',').next().unwrap().split('e').next().unwrap().to_string();
    assert_eq!(mantissa.trim_start_matches('-').replace('.', "").len(), 17);
}

#[test]
fn outputs_are_bitwise_reproducible_across_threads_and_reruns() {
    let tmp = tempfile::tempdir().unwrap();
    let one = invoke(tmp.path(), "run", SMALL, "one", &["--threads", "1"]);
    let three = invoke(tmp.path(), "run", SMALL, "three", &["--threads", "3"]);
    assert_eq!(one.code, 0);
    assert_eq!(three.code, 0);
    let base = files(&tmp.path().join("one"));
    assert_eq!(base, files(&tmp.path().join("three")));
    let echo = tmp.path().join("one").join("config.toml");
    let again = invoke_with("run", &echo, &tmp.path().join("again"), &[]);
    assert_eq!(again.code, 0);
    assert_eq!(base, files(&tmp.path().join("again")));
}

#[test]
fn configuration_errors_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let zero = invoke(tmp.path(), "run", "Omega_L = 0\n", "zero", &[]);
    assert_eq!(zero.code, 1);
    assert!(zero.stderr.contains("Omega_L"), "{}", zero.stderr);
    let typo = invoke(tmp.path(), "run", "Omega = 0.5\n", "typo", &[]);
    assert_eq!(typo.code, 1);
    assert!(typo.stderr.contains("Omega"), "{}", typo.stderr);
    let mixing = invoke(tmp.path(), "run", "mixing = 1.5\n", "mixing", &[]);
    assert_eq!(mixing.code, 1);
    assert!(mixing.stderr.contains("mixing"), "{}", mixing.stderr);
    let list = invoke(tmp.path(), "run", "Omega_L = [0.5, 0.7]\n", "list", &[]);
    assert_eq!(list.code, 1);
    let single = invoke(tmp.path(), "sweep", SMALL, "single", &[]);
    assert_eq!(single.code, 1);
    let missing = invoke_with("run", &tmp.path().join("absent.toml"), &tmp.path().join("absent"), &[]);
    assert_eq!(missing.code, 1);
}

#[test]
fn non_convergence_exits_with_two_and_still_writes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = format!("{SMALL}max_iter = 2\n");
    let r = invoke(tmp.path(), "run", &cfg, "out", &[]);
    assert_eq!(r.code, 2);
    let manifest = json(&tmp.path().join("out").join("manifest.json"));
    assert_eq!(manifest["convergence"]["converged"], false);
    assert_eq!(manifest["convergence"]["iterations"], 2);
    assert!(tmp.path().join("out").join("spectra.csv").exists());
}

#[test]
fn noninteracting_run_takes_one_iteration() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = SMALL.replace("U = 2", "U = 0");
    let r = invoke(tmp.path(), "run", &cfg, "out", &[]);
    assert_eq!(r.code, 0);
    let manifest = json(&tmp.path().join("out").join("manifest.json"));
    assert_eq!(manifest["convergence"]["iterations"], 1);
}

#[test]
fn sweep_aggregates_points_and_matches_cold_starts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = SMALL.replace("Omega_L = 1.1", "Omega_L = [1.3, 0.9, 1.1]");
    let warm = invoke(tmp.path(), "sweep", &cfg, "warm", &["--emit-plots"]);
    assert_eq!(warm.code, 0, "{}", warm.stderr);
    let cold_cfg = format!("{cfg}seed_policy = \"zero_sigma\"\n");
    let cold = invoke(tmp.path(), "sweep", &cold_cfg, "cold", &[]);
    assert_eq!(cold.code, 0);

    let root = tmp.path().join("warm");
    let manifest = json(&root.join("sweep_manifest.json"));
    let points = manifest["points"].as_array().unwrap();
    let omegas: Vec<f64> = points.iter().map(|p| p["Omega_L"].as_f64().unwrap()).collect();
    assert_eq!(omegas, [0.9, 1.1, 1.3]);
    let warm_flags: Vec<bool> = points.iter().map(|p| p["warm_started"].as_bool().unwrap()).collect();
    assert_eq!(warm_flags, [false, true, true]);
    for f in manifest["files"].as_array().unwrap() {
        assert!(root.join(f.as_str().unwrap()).exists(), "{f}");
    }
    assert!(root.join("sweep_T0.gp").exists());

    let agg = Table::read(&root.join("sweep.csv"));
    assert_eq!(agg.header, ["T [D]", "Omega_L [D]", "omega [D]", "ldos [1/D]", "f [1]"]);
    assert_eq!(agg.column(0).len(), 3 * 256);

    // Both runs stop within tol of one fixed point, so G^R differs by at most
    // 10·tol per entry and the row-0 LDOS by 10·tol·(2n_max + 1)/π.
    let bound = 10.0 * 1e-5 * 5.0 / std::f64::consts::PI;
    for &w in &omegas {
        let a = Table::read(&point_dir(&root, 1.0, w).join("spectra.csv"));
        let b = Table::read(&point_dir(&tmp.path().join("cold"), 1.0, w).join("spectra.csv"));
        let worst = a
            .column(1)
            .iter()
            .zip(b.column(1))
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(worst < bound, "Omega_L = {w}: {worst:e}");
    }
}

#[test]
fn validate_passes_by_default_and_fails_when_truncated() {
    let tmp = tempfile::tempdir().unwrap();
    let ok = invoke(tmp.path(), "validate", "n_omega = 512\n", "ok", &[]);
    assert_eq!(ok.code, 0, "{}", ok.stdout);
    let report = json(&tmp.path().join("ok").join("validate_report.json"));
    assert_eq!(report["passed"], true);
    let scan = report["sum_rule_scan"].as_array().unwrap();
    for t in [1.0, 2.0, 3.0, 4.0] {
        assert!(scan.iter().any(|s| s["T"] == t));
    }
    let bad = invoke(tmp.path(), "validate", "n_max = 2\nOmega_L = 0.3\nn_omega = 512\n", "bad", &[]);
    assert_eq!(bad.code, 3);
    let report = json(&tmp.path().join("bad").join("validate_report.json"));
    let envelope = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == "sum_rule_envelope")
        .unwrap();
    assert_eq!(envelope["passed"], false);
}
