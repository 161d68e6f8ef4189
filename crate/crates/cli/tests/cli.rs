//! End-to-end checks of the `smconv` binary: exit codes per failure class,
//! pinned CSV schemas, report content and determinism.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;
use tempfile::TempDir;

fn run(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_smconv"))
        .args(args)
        .output()
        .expect("launch smconv");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn write_conf(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("run.conf");
    fs::write(&path, body).unwrap();
    path
}

fn report(dir: &Path) -> Value {
    let text = fs::read_to_string(dir.join("report.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn num(v: &Value, section: &str, key: &str) -> f64 {
    v[section][key]
        .as_f64()
        .unwrap_or_else(|| panic!("missing number {section}/{key} in {v}"))
}

fn text<'a>(v: &'a Value, section: &str, key: &str) -> &'a str {
    v[section][key]
        .as_str()
        .unwrap_or_else(|| panic!("missing text {section}/{key} in {v}"))
}

#[track_caller]
fn assert_close(actual: f64, expected: f64, rel: f64) {
    assert!(
        (actual - expected).abs() <= rel * expected.abs(),
        "{actual} not within {rel} of {expected}"
    );
}

fn input_current_conf(delta: &str, record_from: &str) -> String {
    format!(
        "[circuit]\nv_in = 10\nl1 = 1m\nl2 = 1m\nc1 = 1u\nc2 = 20u\nr_load = 5\n\n\
         [surface]\nm1 = 1\nm5 = 0.5\ndelta = {delta}\n\n\
         [sim]\nt_end = 2m\nsample_dt = 1u\nrecord_from = {record_from}\n"
    )
}

const UNSTABLE_SYNTHETIC: &str = "[circuit]\n\
a = 1, 0, 0, 0, 2, 0, 0, 0, -1\n\
b = 1, 1, 0\n\
c = 0, 0, 0, 0, 0, 0, 0, 0, 0\n\
d = 0, 0, 1\n\
guess = 0, 0, 1\n\n\
[surface]\nm = 0, 0, 1\nm5 = 1\ndelta = 10m\n";

#[test]
fn analyze_reports_the_reference_operating_point() {
    let tmp = TempDir::new().unwrap();
    let conf = write_conf(tmp.path(), &input_current_conf("10m", "0"));
    let out = tmp.path().join("out");
    let (code, stdout, _) = run(&[
        "analyze",
        "--config",
        conf.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert!(stdout.contains("[equilibrium.branch0]"));

    let r = report(&out);
    assert_close(num(&r, "equilibrium.branch0", "i_l1 [A]"), 0.5, 1e-9);
    assert_close(num(&r, "equilibrium.branch0", "i_l2 [A]"), 1.0, 1e-9);
    assert_close(num(&r, "equilibrium.branch0", "v_c1 [V]"), 15.0, 1e-9);
    assert_close(num(&r, "equilibrium.branch0", "v_c2 [V]"), -5.0, 1e-9);
    assert_close(num(&r, "equilibrium.branch0", "u_eq"), 1.0 / 3.0, 1e-9);
    assert_eq!(text(&r, "equilibrium.branch0", "branch"), "feasible");
    assert_eq!(
        text(&r, "equilibrium.branch1", "branch"),
        "infeasible control"
    );

    assert_close(num(&r, "certificate", "r_tilde [1/s]"), 8337.15, 1e-3);
    assert_close(num(&r, "certificate", "r [1/s]"), 7603.74, 1e-3);
    assert_close(num(&r, "certificate", "r_full [1/s]"), 994.75, 1e-3);
    assert_eq!(r["certificate.verification"]["passed"], Value::Bool(true));

    assert_close(num(&r, "ripple", "t_s [s]"), 6e-6, 1e-9);
    assert_close(num(&r, "ripple", "di_l1 [A]"), 0.02, 1e-9);
    assert_close(num(&r, "ripple", "dv_c1 [V]"), 2.0, 1e-9);

    let delta_max = num(&r, "limits", "delta_max [A]");
    assert!(
        (0.012..0.02).contains(&delta_max),
        "delta_max = {delta_max} outside the expected window"
    );

    let txt = fs::read_to_string(out.join("report.txt")).unwrap();
    assert_eq!(txt, stdout);
}

#[test]
fn analyze_reports_the_weighted_sum_operating_point() {
    let tmp = TempDir::new().unwrap();
    let conf = write_conf(
        tmp.path(),
        "[surface]\nm1 = 1\nm2 = 1\nm5 = 2\ndelta = 100m\n",
    );
    let out = tmp.path().join("out");
    let (code, _, _) = run(&[
        "analyze",
        "--config",
        conf.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);

    let r = report(&out);
    let root5 = 5f64.sqrt();
    assert_close(
        num(&r, "equilibrium.branch0", "i_l1 [A]"),
        3.0 - root5,
        1e-9,
    );
    assert_close(
        num(&r, "equilibrium.branch0", "i_l2 [A]"),
        root5 - 1.0,
        1e-9,
    );
    assert_close(
        num(&r, "equilibrium.branch0", "v_c1 [V]"),
        5.0 * (root5 + 1.0),
        1e-9,
    );
    assert_close(
        num(&r, "equilibrium.branch0", "v_c2 [V]"),
        5.0 * (1.0 - root5),
        1e-9,
    );
    assert_close(
        num(&r, "equilibrium.branch0", "u_eq"),
        (3.0 - root5) / 2.0,
        1e-9,
    );

    assert_close(num(&r, "certificate", "r_tilde [1/s]"), 254.62, 1e-3);
    assert_close(num(&r, "certificate", "r [1/s]"), 287.34, 1e-3);
    assert!(num(&r, "limits", "delta_max [A]") > 0.0);
}

#[test]
fn literal_capacitor_flag_rescales_the_transfer_ripple() {
    let tmp = TempDir::new().unwrap();
    let conf = write_conf(tmp.path(), &input_current_conf("10m", "0"));
    let base = tmp.path().join("base");
    let lit = tmp.path().join("lit");

    let (code, _, _) = run(&[
        "analyze",
        "--config",
        conf.to_str().unwrap(),
        "--out",
        base.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let (code, _, _) = run(&[
        "analyze",
        "--config",
        conf.to_str().unwrap(),
        "--paper-literal-capacitors",
        "--out",
        lit.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);

    let base = report(&base);
    let lit = report(&lit);
    assert_close(num(&base, "ripple", "dv_c1 [V]"), 2.0, 1e-9);
    assert_close(num(&lit, "ripple", "dv_c1 [V]"), 2000.0, 1e-9);
    assert_close(num(&lit, "run", "c1 [F]"), 1e-9, 0.0);
    assert_close(num(&lit, "run", "c2 [F]"), 20e-9, 0.0);
    assert_close(
        num(&lit, "ripple", "t_s [s]"),
        num(&base, "ripple", "t_s [s]"),
        1e-12,
    );
}

#[test]
fn delta_override_scales_the_predicted_period() {
    let tmp = TempDir::new().unwrap();
    let conf = write_conf(tmp.path(), &input_current_conf("10m", "0"));
    let out = tmp.path().join("out");
    let (code, _, _) = run(&[
        "analyze",
        "--config",
        conf.to_str().unwrap(),
        "--delta",
        "1m",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let r = report(&out);
    assert_close(num(&r, "run", "delta"), 1e-3, 0.0);
    assert_close(num(&r, "ripple", "t_s [s]"), 6e-7, 1e-9);

    let resolved = fs::read_to_string(out.join("resolved.conf")).unwrap();
    assert!(resolved.contains("delta = 0.001"));
}

#[test]
fn infeasible_synthetic_model_exits_1() {
    let tmp = TempDir::new().unwrap();
    let conf = write_conf(tmp.path(), UNSTABLE_SYNTHETIC);
    let out = tmp.path().join("out");
    let (code, _, stderr) = run(&[
        "analyze",
        "--config",
        conf.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 1);
    assert!(stderr.contains("infeasible"), "stderr: {stderr}");
}

#[test]
fn invalid_configurations_exit_2() {
    let tmp = TempDir::new().unwrap();

    let conf = write_conf(tmp.path(), "[surface]\nm1 = 1\nm5 = 0.5\ndelta = abc\n");
    let (code, _, stderr) = run(&["analyze", "--config", conf.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(stderr.contains("line 4"), "stderr: {stderr}");

    let conf = write_conf(
        tmp.path(),
        "[surface]\nwidth = 1\nm1 = 1\nm5 = 0.5\ndelta = 1m\n",
    );
    let (code, _, stderr) = run(&["analyze", "--config", conf.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(stderr.contains("unknown key"), "stderr: {stderr}");

    let conf = write_conf(tmp.path(), "[surface]\nm1 = 1\ndelta = 1m\n");
    let (code, _, stderr) = run(&["analyze", "--config", conf.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(stderr.contains("m5"), "stderr: {stderr}");

    let (code, _, _) = run(&["analyze"]);
    assert_eq!(code, 2);
}

#[test]
fn simulate_emits_the_pinned_csv_schemas() {
    let tmp = TempDir::new().unwrap();
    let conf = write_conf(tmp.path(), &input_current_conf("100m", "0"));
    let out = tmp.path().join("out");
    let (code, _, _) = run(&[
        "simulate",
        "--config",
        conf.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);

    let waveform = fs::read_to_string(out.join("waveform.csv")).unwrap();
    let mut lines = waveform.lines();
    assert_eq!(lines.next().unwrap(), "t,i_l1,i_l2,v_c1,v_c2,u,mode");
    let mut rows = 0usize;
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 7, "row: {line}");
        assert!(fields[5] == "0" || fields[5] == "1", "u column: {line}");
        assert!(fields[6].starts_with("CCM") || fields[6] == "DICM" || fields[6] == "DCVM");
        rows += 1;
    }
    assert!(rows >= 2000, "only {rows} waveform rows");

    let phase = fs::read_to_string(out.join("phase.csv")).unwrap();
    assert_eq!(phase.lines().next().unwrap(), "i_l1,i_l2");
    assert_eq!(phase.lines().count(), rows + 1);

    let r = report(&out);
    assert_eq!(r["metrics"]["converged"], Value::Bool(true));
    assert_close(num(&r, "metrics", "T_S [s]"), 57.55e-6, 0.03);
    assert!(text(&r, "metrics", "modes").contains("CCM_ON"));
    assert_close(num(&r, "prediction", "t_s [s]"), 60e-6, 1e-9);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let conf = write_conf(tmp.path(), &input_current_conf("100m", "0"));
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for out in [&a, &b] {
        let (code, _, _) = run(&[
            "simulate",
            "--config",
            conf.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
    }
    for name in ["waveform.csv", "phase.csv", "report.json", "resolved.conf"] {
        let left = fs::read(a.join(name)).unwrap();
        let right = fs::read(b.join(name)).unwrap();
        assert_eq!(left, right, "{name} differs between identical runs");
    }
}

#[test]
fn unidirectional_weighted_run_reaches_dcvm() {
    let tmp = TempDir::new().unwrap();
    let conf = write_conf(
        tmp.path(),
        "[surface]\nm1 = 1\nm2 = 1\nm5 = 4\ndelta = 100m\n\n[sim]\nt_end = 2m\nsample_dt = 1u\n",
    );
    let out = tmp.path().join("out");
    let (code, _, _) = run(&[
        "simulate",
        "--config",
        conf.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let r = report(&out);
    assert!(text(&r, "metrics", "modes").contains("DCVM"));

    let bi = tmp.path().join("bi");
    let (code, _, _) = run(&[
        "simulate",
        "--config",
        conf.to_str().unwrap(),
        "--realization",
        "bi",
        "--out",
        bi.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let r = report(&bi);
    let modes = text(&r, "metrics", "modes");
    assert!(
        !modes.contains("DCVM") && !modes.contains("DICM"),
        "modes: {modes}"
    );
}

#[test]
fn zeno_guard_exits_3() {
    let tmp = TempDir::new().unwrap();
    let conf = write_conf(
        tmp.path(),
        "[surface]\nm1 = 1\nm5 = 0.5\ndelta = 1m\n\n[sim]\nt_end = 2m\nmax_events = 50\n",
    );
    let (code, _, stderr) = run(&[
        "simulate",
        "--config",
        conf.to_str().unwrap(),
        "--out",
        tmp.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(code, 3, "stderr: {stderr}");
}

#[test]
fn sector_check_verdicts_match_the_reference_behavior() {
    let tmp = TempDir::new().unwrap();
    let conf = write_conf(tmp.path(), &input_current_conf("10m", "1.6m"));
    let out = tmp.path().join("out");
    let (code, stdout, _) = run(&[
        "sector-check",
        "--config",
        conf.to_str().unwrap(),
        "--delta",
        "10m",
        "--delta",
        "100m",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert!(stdout.contains("inside"));
    assert!(stdout.contains("violated"));

    for name in ["sector_0.01.csv", "sector_0.1.csv"] {
        let csv = fs::read_to_string(out.join(name)).unwrap();
        assert_eq!(
            csv.lines().next().unwrap(),
            "y3,h3_star,r_tilde_bound,r_bound"
        );
        assert!(csv.lines().count() > 100, "{name} has too few rows");
    }

    let r = report(&out);
    assert_eq!(text(&r, "sector 0.01", "verdict"), "inside");
    assert_eq!(text(&r, "sector 0.1", "verdict"), "violated");
    assert!(num(&r, "sector 0.1", "worst_excess [V/s]") > 0.0);
    assert!(num(&r, "sector 0.1", "crossing_dv_c1 [V]") > 0.0);
    assert!(num(&r, "sector 0.1", "implied_delta_max [A]") > 0.0);
}

#[test]
fn sector_check_without_steady_samples_is_inconclusive() {
    let tmp = TempDir::new().unwrap();
    let conf = write_conf(
        tmp.path(),
        "[surface]\nm1 = 1\nm5 = 0.5\ndelta = 100m\n\n[sim]\nt_end = 0.2m\nrecord_from = 1m\n",
    );
    let out = tmp.path().join("out");
    let (code, stdout, _) = run(&[
        "sector-check",
        "--config",
        conf.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 1);
    assert!(stdout.contains("inconclusive"));
    assert_eq!(text(&report(&out), "sector 0.1", "verdict"), "inconclusive");
}

#[test]
fn sweep_records_row_outcomes_in_the_status_column() {
    let tmp = TempDir::new().unwrap();
    let conf = write_conf(tmp.path(), &input_current_conf("10m", "1.5m"));
    let out = tmp.path().join("out");
    let (code, _, _) = run(&[
        "sweep",
        "--config",
        conf.to_str().unwrap(),
        "--delta",
        "10m",
        "--delta",
        "100m",
        "--delta",
        "0",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);

    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(
        lines[0],
        "delta,T_S_predicted,T_S_measured,\
         ripple_di_l1_predicted,ripple_di_l1_measured,\
         ripple_di_l2_predicted,ripple_di_l2_measured,\
         ripple_dv_c1_predicted,ripple_dv_c1_measured,\
         ripple_dv_c2_predicted,ripple_dv_c2_measured,\
         sector_ok,status"
    );
    assert_eq!(lines.len(), 4);

    let row1: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(row1[0], "0.01");
    assert_close(row1[2].parse().unwrap(), 6e-6, 0.02);
    assert_eq!(row1[11], "true");
    assert_eq!(row1[12], "ok");

    let row2: Vec<&str> = lines[2].split(',').collect();
    assert_eq!(row2[0], "0.1");
    assert_eq!(row2[11], "false");
    assert_eq!(row2[12], "ok");

    let row3: Vec<&str> = lines[3].split(',').collect();
    assert_eq!(row3[0], "0");
    assert!(row3[1].is_empty() && row3[11].is_empty());
    assert!(row3[12].contains("positive"), "status: {}", row3[12]);
}
