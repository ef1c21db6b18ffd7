//! End-to-end runs of the `spinres` binary.

use std::path::Path;
use std::process::{Command, Output};

fn spinres(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spinres"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn parse_row(line: &str) -> Vec<f64> {
    line.split(',').map(|x| x.parse().unwrap()).collect()
}

#[test]
fn constants_match_reference_values() {
    let out = spinres(&["constants", "--zeros", "3", "--gamma-at", "1"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "# zeros of J0");
    assert_eq!(lines[1], "j,r_j");
    let zeros: Vec<f64> = lines[2..5].iter().map(|l| parse_row(l)[1]).collect();
    for (z, want) in zeros
        .iter()
        .zip([2.404825557696, 5.520078110286, 8.653727912911])
    {
        assert!((z - want).abs() < 1e-11);
    }
    let gamma = parse_row(lines[7]);
    assert!((gamma[3] + 0.684533).abs() < 1e-4);
}

#[test]
fn constants_json_is_valid() {
    let out = spinres(&["constants", "--gamma-at", "0,2", "--format", "json"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let text = v.to_string();
    assert!(text.contains("gamma1") && text.contains("gamma2"), "{text}");
}

#[test]
fn evolve_columns_and_initial_value() {
    let out = spinres(&["evolve", "--t-end", "1", "--methods", "avg,ms,numeric"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t,avg,ms,numeric,numeric_hf");
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(
        &first[..4],
        [
            "0.000000000000e+00",
            "1.000000000000e+00",
            "1.000000000000e+00",
            "1.000000000000e+00"
        ]
    );
    // averaged values are defined once a full drive period fits
    let last = lines.last().unwrap();
    assert!(!last.ends_with("nan"));
}

#[test]
fn output_is_byte_identical_across_runs() {
    let args = [
        "evolve",
        "--t-end",
        "2",
        "--methods",
        "avg,ms,numeric",
        "--format",
        "json",
    ];
    let a = spinres(&args);
    let b = spinres(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert!(v.to_string().contains("omega_perp"));
}

#[test]
fn exact_sweep_peaks_on_resonance() {
    let out = spinres(&[
        "sweep",
        "--r",
        "0",
        "--methods",
        "exact",
        "--grid",
        "-4,2,25",
        "--jobs",
        "2",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    let rows: Vec<Vec<f64>> = text.lines().skip(1).map(parse_row).collect();
    assert_eq!(rows.len(), 25);
    let peak = rows
        .iter()
        .max_by(|a, b| a[1].partial_cmp(&b[1]).unwrap())
        .unwrap();
    assert_eq!(peak[0], -1.0);
    assert_eq!(peak[1], 1.0);
}

#[test]
fn compare_reports_equivalent_runs() {
    let out = spinres(&[
        "compare",
        "--t-end",
        "3",
        "--r",
        "r1",
        "--phi-hf",
        "pi/2",
        "--methods",
        "avg,ms",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert_eq!(text.lines().next().unwrap(), "method,max_deviation");
    for line in text.lines().skip(1) {
        let dev: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!(dev < 1e-12, "{line}");
    }
}

#[test]
fn preset_writes_one_file_per_variant() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("fig7.csv");
    let out = spinres(&[
        "evolve",
        "--preset",
        "fig7",
        "--methods",
        "avg,ms",
        "--t-end",
        "5",
        "--out",
        target.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let written: Vec<String> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    assert!(written.len() >= 2, "{written:?}");
    assert!(written
        .iter()
        .all(|f| f.starts_with("fig7_") && f.ends_with(".csv")));
}

#[test]
fn usage_errors_exit_with_2() {
    for args in [
        vec!["evolve", "--methods", "exact"],
        vec!["evolve", "--omega-perp", "abc"],
        vec!["evolve", "--tol", "1"],
        vec!["sweep", "--grid", "2,-4,25"],
        vec!["evolve", "--preset", "nope"],
        vec!["frobnicate"],
    ] {
        let out = spinres(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn unwritable_output_exits_with_1() {
    let target = Path::new("/nonexistent-dir/out.csv");
    let out = spinres(&[
        "evolve",
        "--t-end",
        "0.1",
        "--out",
        target.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
}
