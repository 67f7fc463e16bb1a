use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn uamfd(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uamfd"))
        .args(args)
        .current_dir(dir)
        .env("UAMFD_OUT_DIR", dir)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = uamfd(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn simulate(dir: &Path, name: &str, seed: &str) {
    ok(dir, &["simulate", "--drones", "4", "--scenario", "3", "--duration", "30", "--seed", seed, "--out", name]);
}

#[test]
fn negative_spacing_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = uamfd(tmp.path(), &["simulate", "--spacing", "-1", "--out", "t.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!tmp.path().join("t.csv").exists());
}

#[test]
fn unknown_control_law_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(uamfd(tmp.path(), &["simulate", "--control", "swerve"]).status.code(), Some(2));
}

#[test]
fn simulate_is_deterministic_and_replays_from_its_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    simulate(d, "a.csv", "9");
    simulate(d, "b.csv", "9");
    let a = fs::read(d.join("a.csv")).unwrap();
    assert_eq!(a, fs::read(d.join("b.csv")).unwrap());
    assert!(String::from_utf8_lossy(&a).starts_with("id,time,px,py,pz,dest_px,dest_py,dest_pz\n"));

    ok(d, &["simulate", "--config", "a.csv.manifest.toml", "--out", "c.csv", "--check"]);
    assert_eq!(a, fs::read(d.join("c.csv")).unwrap());
}

#[test]
fn measure_fit_scale_chain() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    simulate(d, "r0.csv", "1");
    simulate(d, "r1.csv", "2");
    ok(d, &["measure", "--in", "r0.csv,r1.csv", "--trim-start", "5", "--out", "samples.csv"]);
    let samples = fs::read_to_string(d.join("samples.csv")).unwrap();
    assert_eq!(samples.lines().count(), 1 + 2 * 49);
    assert!(samples.starts_with("region_id,theta_bin,phi_bin,area_m2,k,q,run"));

    ok(d, &["fit", "--in", "samples.csv", "--out", "fit.toml", "--plot-data", "plot.csv"]);
    let fit: toml::Table = toml::from_str(&fs::read_to_string(d.join("fit.toml")).unwrap()).unwrap();
    for key in ["v_f", "alpha", "k_c_analytic", "q_max_analytic", "k_c_empirical", "q_max_empirical", "r2", "rmse", "n_samples_used"] {
        assert!(fit.contains_key(key), "missing {key}");
    }
    let used = fit["n_samples_used"].as_integer().unwrap() as usize;
    let plot = fs::read_to_string(d.join("plot.csv")).unwrap();
    assert_eq!(plot.lines().count(), 1 + used + 200);
    assert_eq!(fit["mbar"].as_integer(), Some(7));

    let out = ok(d, &["scale", "--fd", "fit.toml"]);
    let scaled: toml::Table = toml::from_str(&String::from_utf8(out.stdout).unwrap()).unwrap();
    let v = fit["v_f"].as_float().unwrap();
    assert!((scaled["v_f_scaled"].as_float().unwrap() - 20.0 * v).abs() <= 1e-12 * v * 20.0);
    let q = fit["q_max_empirical"].as_float().unwrap();
    assert!((scaled["q_max_scaled_per_km_h"].as_float().unwrap() - q * 20.0 / 400.0 * 3.6e6).abs() <= 1e-9 * q * 1e6);
}

#[test]
fn corrupt_trajectory_is_an_integrity_error_with_a_line() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    simulate(d, "t.csv", "3");
    let text = fs::read_to_string(d.join("t.csv")).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines[5] = "0,0.4,nan,0,1,0,0,1";
    fs::write(d.join("bad.csv"), lines.join("\n")).unwrap();
    let out = uamfd(d, &["measure", "--in", "bad.csv"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.csv:6"));
}

#[test]
fn missing_input_is_an_io_error() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(uamfd(tmp.path(), &["fit", "--in", "nope.csv"]).status.code(), Some(1));
}

#[test]
fn report_on_an_empty_directory_warns() {
    let tmp = tempfile::tempdir().unwrap();
    let out = ok(tmp.path(), &["report", "--dir", "."]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
    assert!(String::from_utf8_lossy(&out.stdout).contains("(no configurations found)"));
}

#[test]
fn small_sweep_reports_every_configuration() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let args = [
        "sweep", "--dir", "sw", "--scenarios", "2", "--drones", "4,8", "--replications", "1",
        "--duration", "30", "--trim-start", "5", "--check",
    ];
    let out = uamfd(d, &args);
    let code = out.status.code();
    let csv = fs::read_to_string(d.join("sw/report.csv")).unwrap();
    let rows = csv.lines().count() - 1;
    let missing = String::from_utf8_lossy(&out.stderr).matches("warning: ").count();
    assert_eq!(rows + missing, 4, "{csv}");
    assert_eq!(code, if missing == 0 { Some(0) } else { Some(4) });
    assert!(d.join("sw/sweep.manifest.toml").exists());
    assert!(d.join("sw/scenario2_stop_h0.5/I8_rep0.csv").exists());

    let again = uamfd(d, &["sweep", "--dir", "sw2", "--config", "sw/sweep.manifest.toml"]);
    assert_eq!(again.status.code(), code);
    assert_eq!(csv, fs::read_to_string(d.join("sw2/report.csv")).unwrap());
}
