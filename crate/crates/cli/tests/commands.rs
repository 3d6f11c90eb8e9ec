use std::path::Path;
use std::process::{Command, Output};

use statematch::analysis::sigma_stat;
use statematch::{success_probability, NativeCircuit};
use statematch_cli::io::{read_records, Report};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_statematch"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn report(path: &Path) -> Report {
    Report::from_json(&std::fs::read(path).unwrap()).unwrap()
}

fn value_after(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(key))
        .unwrap()
        .trim()
        .parse()
        .unwrap()
}

#[test]
fn theory_prints_success_probability() {
    let out = ok(&["theory", "--epsilon", "0.973", "--theta0", "0.3927", "--n", "1"]);
    assert!((value_after(&out, "p_s ") - 0.8775).abs() < 5e-4, "{out}");
    let out = ok(&["theory", "--theta0", "3.14159", "--n", "2"]);
    assert!((value_after(&out, "p_s ") - 1.0).abs() < 1e-6);
}

#[test]
fn theory_rejects_bad_epsilon() {
    let out = run(&["theory", "--epsilon", "1.2"]);
    assert!(!out.status.success());
    assert!(out.stdout.is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).contains("epsilon"));
}

#[test]
fn default_simulation() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = run(&["simulate", "--out", d, "--quiet"]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty() && out.stderr.is_empty());

    let records = read_records(&dir.path().join("records.csv")).unwrap();
    assert_eq!(records.len(), 250);
    let r = report(&dir.path().join("report.json"));
    assert_eq!(r.schema_version, 1);
    assert_eq!(r.manifest.seed, 1);
    let m = &r.metrics[0];
    let ideal = success_probability(0.973, std::f64::consts::PI / 8.0, 1).unwrap();
    assert!((m.ps_exp_mean - ideal).abs() < 4.0 * m.sigma_stat / 50f64.sqrt());

    let first = std::fs::read(dir.path().join("records.csv")).unwrap();
    let first_report = std::fs::read(dir.path().join("report.json")).unwrap();
    ok(&["simulate", "--out", d, "--quiet"]);
    assert_eq!(first, std::fs::read(dir.path().join("records.csv")).unwrap());
    assert_eq!(first_report, std::fs::read(dir.path().join("report.json")).unwrap());

    ok(&["simulate", "--out", d, "--quiet", "--seed", "2"]);
    assert_ne!(first, std::fs::read(dir.path().join("records.csv")).unwrap());
}

#[test]
fn preset_breaks_phi0_invariance() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    ok(&["simulate", "--out", d, "-q", "--set", "noise.preset=lima-n1"]);
    let m = &report(&dir.path().join("report.json")).metrics[0];
    assert!(m.s > 2.0, "S = {}", m.s);
    let spread = m
        .per_phi0
        .iter()
        .map(|e| e.estimate)
        .fold((f64::MAX, f64::MIN), |(lo, hi), x| (lo.min(x), hi.max(x)));
    assert!(spread.1 - spread.0 > 5.0 * m.sigma_stat);
}

#[test]
fn zero_noise_metrics_at_high_shot_count() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    ok(&["simulate", "--out", d, "-q", "--set", "sweep.shots=10000", "--set", "sweep.runs=1"]);
    let records = dir.path().join("records.csv");
    let table = ok(&["metrics", records.to_str().unwrap(), "--out", d]);
    assert!(table.starts_with("device"));
    let m = &report(&dir.path().join("metrics.json")).metrics[0];
    assert!(m.f >= 0.999, "F = {}", m.f);
    assert!((0.5..=1.5).contains(&m.s), "S = {}", m.s);
    assert!(dir.path().join("metrics.txt").exists());
}

fn write_csv(path: &Path, rows: &[(f64, u64, u64)]) {
    let mut text = String::from("device,qubits,n,epsilon,theta0,phi0,run,shots,success_count\n");
    for (phi0, shots, k) in rows {
        text.push_str(&format!("dev,0-1,1,0.973,0.392699081699,{phi0},0,{shots},{k}\n"));
    }
    std::fs::write(path, text).unwrap();
}

#[test]
fn metrics_reproduce_ratio_to_f() {
    let dir = tempfile::tempdir().unwrap();
    let ideal = success_probability(0.973, std::f64::consts::FRAC_PI_8, 1).unwrap();
    let shots = 1_000_000_000u64;
    let k = |r: f64| (r * ideal * shots as f64).round() as u64;
    let path = dir.path().join("r.csv");
    write_csv(&path, &[(0.0, shots, k(1.013)), (1.0, shots, k(1.015))]);
    ok(&["metrics", path.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "-q"]);
    let m = &report(&dir.path().join("metrics.json")).metrics[0];
    assert_eq!(format!("{:.3}", m.ratio), "1.014");
    assert_eq!(format!("{:.3}", m.f), "0.986");
}

#[test]
fn metrics_errors() {
    let dir = tempfile::tempdir().unwrap();
    let single = dir.path().join("single.csv");
    write_csv(&single, &[(0.5, 2000, 1700), (0.5, 2000, 1710)]);
    let out = run(&["metrics", single.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("insufficient grid"));

    let bad = dir.path().join("bad.csv");
    std::fs::write(
        &bad,
        "device,qubits,n,epsilon,theta0,phi0,run,shots,success_count\ndev,0-1,1,0.973,0.39,0.1,0,2000\n",
    )
    .unwrap();
    let out = run(&["metrics", bad.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    let missing = dir.path().join("nope.csv");
    assert!(!run(&["metrics", missing.to_str().unwrap()]).status.success());
}

#[test]
fn sweep_shape_and_bands() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["sweep", "--out", dir.path().to_str().unwrap(), "-q"]);
    let text = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("phi0,ideal,simulated_mean,lower,upper"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 50);
    let ideal = success_probability(0.973, std::f64::consts::PI / 8.0, 1).unwrap();
    let sigma = sigma_stat(ideal, 10_000);
    for r in &rows {
        assert_eq!(r.len(), 5);
        assert_eq!(r[1], rows[0][1]);
        assert!((r[1] - ideal).abs() < 1e-11);
        assert!((r[3] - (ideal - sigma)).abs() < 1e-11);
        assert!((r[4] - (ideal + sigma)).abs() < 1e-11);
    }
}

#[test]
fn transpile_dumps_parseable_circuit() {
    let text = ok(&["transpile", "--set", "protocol.n=2", "--phi0", "0.4"]);
    let c = NativeCircuit::from_text(&text).unwrap();
    assert_eq!(c.n_qubits, 4);
    assert_eq!(c.swap_count, 1);

    let dir = tempfile::tempdir().unwrap();
    ok(&["transpile", "--out", dir.path().to_str().unwrap(), "-q"]);
    let c = NativeCircuit::from_text(&std::fs::read_to_string(dir.path().join("circuit.txt")).unwrap()).unwrap();
    assert_eq!(c.cnot_count(), 2);
}

#[test]
fn config_errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "protocol.epsilon = 0.9\nsweep.phi0_pionts = 10\n").unwrap();
    let out = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("unknown key 'sweep.phi0_pionts'") && err.contains("line 2"), "{err}");
    assert!(!dir.path().join("records.csv").exists());

    let out = run(&["simulate", "--set", "noise.preset=lima-n2"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("preset"));
}

#[test]
fn fit_noiseless_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "sweep.phi0_points = 12\nsweep.shots = 1000000000\nseed = 3\n").unwrap();
    let c = cfg.to_str().unwrap();
    ok(&["simulate", "--config", c, "--out", d, "-q"]);
    let records = dir.path().join("records.csv");
    ok(&["fit", records.to_str().unwrap(), "--config", c, "--out", d, "-q"]);

    let curve = std::fs::read_to_string(dir.path().join("fitted_curve.csv")).unwrap();
    assert_eq!(curve.lines().count(), 13);
    assert_eq!(curve.lines().next(), Some("phi0,estimate,fitted"));

    let bytes = std::fs::read(dir.path().join("fit.json")).unwrap();
    let r = Report::from_json(&bytes).unwrap();
    assert_eq!(r.to_json().unwrap(), bytes);
    assert_eq!(r.manifest.inputs, vec![records.clone()]);
    let fit = r.fit.unwrap();
    assert_eq!(fit.angles.len(), 3);
    for a in &fit.angles {
        assert!(a.value.abs() < 0.01, "{a:?}");
    }
    assert!(fit.shift_param < 1e-3);
}
