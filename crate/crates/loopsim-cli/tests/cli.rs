//! End-to-end checks of the installed binary: artifact shapes, exit codes,
//! determinism.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn loopsim(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_loopsim"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn read_json(path: &Path) -> Value {
    let text = std::fs::read_to_string(path).unwrap();
    serde_json::from_str(&text).unwrap()
}

#[test]
fn compile_prints_the_reference_row_and_writes_versioned_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = loopsim(dir.path(), &["compile", "qpg", "0.75", "--out", "c"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("25%"), "{text}");
    assert!(text.contains("-26.6"), "{text}");
    assert!(text.contains("63.4"), "{text}");
    assert!(text.contains("4.8"), "{text}");

    let schedule = read_json(&dir.path().join("c/schedule.json"));
    assert_eq!(schedule["format_version"], 1);
    assert_eq!(schedule["bins"].as_array().unwrap().len(), 3);
    assert_eq!(schedule["bins"][0]["kind"], "inject");
    assert_eq!(schedule["bins"][2]["kind"], "export");

    let timing = std::fs::read_to_string(dir.path().join("c/timing.csv")).unwrap();
    assert!(timing.starts_with("# format_version=1\nt_ns,component,value,unit\n"));
}

#[test]
fn repeated_programs_expand_to_one_bin_per_step() {
    let dir = tempfile::tempdir().unwrap();
    let out = loopsim(
        dir.path(),
        &["compile", "squeeze", "0.44", "--repeat", "3", "--out", "c"],
    );
    assert!(out.status.success());
    let schedule = read_json(&dir.path().join("c/schedule.json"));
    assert_eq!(schedule["bins"].as_array().unwrap().len(), 5);
}

#[test]
fn mixed_coupler_levels_fail_the_driver_check() {
    let dir = tempfile::tempdir().unwrap();
    let out = loopsim(
        dir.path(),
        &[
            "compile",
            "squeeze",
            "0.44",
            "squeeze",
            "0.69",
            "--driver-check",
            "--out",
            "c",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("levels"), "{}", stderr(&out));

    // same program without the check compiles fine
    let out = loopsim(
        dir.path(),
        &["compile", "squeeze", "0.44", "squeeze", "0.69", "--out", "c2"],
    );
    assert!(out.status.success());
}

#[test]
fn program_file_errors_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("p.txt"), "squeeze 0.44\nfrobnicate 1\n").unwrap();
    let out = loopsim(dir.path(), &["compile", "--program", "p.txt", "--out", "c"]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.contains("line 2"), "{err}");
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = loopsim(dir.path(), &["reproduce", "fig9"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn realistic_run_reports_the_expected_fidelity() {
    let dir = tempfile::tempdir().unwrap();
    let out = loopsim(dir.path(), &["run", "squeeze", "0.44", "--out", "r"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let results = read_json(&dir.path().join("r/results.json"));
    let f = results["analytic"]["fidelity_vs_target"].as_f64().unwrap();
    assert!((f - 0.88998).abs() < 1e-4, "fidelity {f}");
    assert_eq!(results["sampled"], Value::Null);
    assert_eq!(results["manifest"]["model"], "realistic");
    assert_eq!(results["manifest"]["program"][0], "squeeze 0.44");
}

#[test]
fn ideal_qpg_probe_matrix_is_the_shear() {
    let dir = tempfile::tempdir().unwrap();
    let out = loopsim(
        dir.path(),
        &[
            "run", "qpg", "0.46", "--model", "ideal", "--input", "coherent 4 0", "--out", "r",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let results = read_json(&dir.path().join("r/results.json"));
    let m = &results["analytic"]["matrix_estimate"]["matrix"];
    let expect = [[1.0, 0.0], [0.92, 1.0]];
    for i in 0..2 {
        for j in 0..2 {
            let got = m[i][j].as_f64().unwrap();
            assert!((got - expect[i][j]).abs() < 1e-9, "m[{i}][{j}] = {got}");
        }
    }
    let f = results["analytic"]["fidelity_vs_target"].as_f64().unwrap();
    assert!((f - 1.0).abs() < 1e-10);
}

#[test]
fn sampled_runs_are_bit_identical_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    for out_dir in ["a", "b"] {
        let out = loopsim(
            dir.path(),
            &[
                "run", "squeeze", "0.44", "--shots", "300", "--seed", "9", "--out", out_dir,
            ],
        );
        assert!(out.status.success(), "{}", stderr(&out));
    }
    let a = std::fs::read(dir.path().join("a/results.json")).unwrap();
    let b = std::fs::read(dir.path().join("b/results.json")).unwrap();
    assert_eq!(a, b);

    let out = loopsim(
        dir.path(),
        &[
            "run", "squeeze", "0.44", "--shots", "300", "--seed", "10", "--out", "c",
        ],
    );
    assert!(out.status.success());
    let c = std::fs::read(dir.path().join("c/results.json")).unwrap();
    assert_ne!(a, c, "a different seed must change the session");
}

#[test]
fn manifest_files_drive_runs_and_flags_override_them() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("m.txt"),
        "seed = 11\nprogram = squeeze 0.44\nshots = 120\nff_path_lossy = off\n",
    )
    .unwrap();
    let out = loopsim(
        dir.path(),
        &["run", "--manifest", "m.txt", "--out", "r"],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let results = read_json(&dir.path().join("r/results.json"));
    assert_eq!(results["manifest"]["seed"], 11);
    assert_eq!(results["manifest"]["ff_path_lossy"], false);
    let f = results["analytic"]["fidelity_vs_target"].as_f64().unwrap();
    assert!((f - 0.91464).abs() < 1e-4, "clean-feedforward fidelity {f}");
    assert_eq!(results["sampled"]["shots"], 120);

    let out = loopsim(
        dir.path(),
        &[
            "run",
            "--manifest",
            "m.txt",
            "--ff-path-lossy",
            "on",
            "--shots",
            "0",
            "--out",
            "r2",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let results = read_json(&dir.path().join("r2/results.json"));
    assert_eq!(results["manifest"]["ff_path_lossy"], true);
    assert_eq!(results["sampled"], Value::Null);
}

#[test]
fn reproduce_table1_matches_the_printed_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = loopsim(dir.path(), &["reproduce", "table1", "--out", "t"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = std::fs::read_to_string(dir.path().join("t/table1.csv")).unwrap();
    let rows: Vec<Vec<String>> = csv
        .lines()
        .skip(2)
        .map(|l| l.split(',').map(|s| s.to_string()).collect())
        .collect();
    assert_eq!(rows.len(), 4);
    let printed: [(&str, i64, f64, f64, f64); 4] = [
        ("squeeze 0.44", 41, 0.0, 0.0, 1.6),
        ("squeeze 0.69", 25, 0.0, 0.0, 4.8),
        ("qpg 0.46", 41, -32.7, 57.3, 1.6),
        ("qpg 0.75", 25, -26.6, 63.4, 4.8),
    ];
    for (row, want) in rows.iter().zip(printed) {
        assert_eq!(row[0], want.0);
        assert_eq!(row[1].parse::<i64>().unwrap(), want.1);
        assert!((row[2].parse::<f64>().unwrap() - want.2).abs() <= 0.1);
        assert!((row[3].parse::<f64>().unwrap() - want.3).abs() <= 0.1);
        assert!((row[4].parse::<f64>().unwrap() - want.4).abs() <= 0.1);
    }
}

#[test]
fn reproduce_fig5_recovers_the_step_fidelities() {
    let dir = tempfile::tempdir().unwrap();
    let out = loopsim(
        dir.path(),
        &["reproduce", "fig5", "--shots", "400", "--out", "f"],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = std::fs::read_to_string(dir.path().join("f/fidelity.csv")).unwrap();
    let mut realistic = Vec::new();
    for line in csv.lines().skip(2) {
        let cells: Vec<&str> = line.split(',').collect();
        if cells[1] == "realistic" {
            realistic.push(cells[2].parse::<f64>().unwrap());
        }
    }
    let expect = [0.89, 0.73, 0.54];
    assert_eq!(realistic.len(), 3);
    for (f, e) in realistic.iter().zip(expect) {
        assert!((f - e).abs() < 0.01, "fidelity {f} vs {e}");
    }
    for slug in ["n1", "n2", "n3"] {
        for model in ["ideal", "realistic"] {
            assert!(dir.path().join(format!("f/contour_{slug}_{model}.csv")).exists());
        }
    }
}

#[test]
fn reproduce_fig3_ideal_matrix_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let out = loopsim(
        dir.path(),
        &[
            "reproduce", "fig3", "--model", "ideal", "--shots", "0", "--out", "f",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = std::fs::read_to_string(dir.path().join("f/matrix.csv")).unwrap();
    for line in csv.lines().skip(2) {
        let cells: Vec<&str> = line.split(',').collect();
        let r: f64 = cells[0].parse().unwrap();
        assert_eq!(cells[2], "analytic");
        let m_xx: f64 = cells[3].parse().unwrap();
        let m_xp: f64 = cells[4].parse().unwrap();
        let m_px: f64 = cells[5].parse().unwrap();
        let m_pp: f64 = cells[6].parse().unwrap();
        assert!((m_xx - r.exp()).abs() < 1e-12);
        assert!((m_pp - (-r).exp()).abs() < 1e-12);
        assert!(m_xp.abs() < 1e-12 && m_px.abs() < 1e-12);
    }
}

#[test]
fn verify_cubic_passes_and_records_the_proof() {
    let dir = tempfile::tempdir().unwrap();
    let out = loopsim(
        dir.path(),
        &["verify-cubic", "--trials", "3", "--seed", "5", "--out", "v"],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("residual x = 0"), "{text}");
    assert!(text.contains("residual p = 0"), "{text}");
    let proof = read_json(&dir.path().join("v/cubic_proof.json"));
    assert_eq!(proof["passed"], true);
    assert_eq!(proof["symbolic"]["passed"], true);
    assert_eq!(proof["ideal_limit"]["passed"], true);
    assert_eq!(proof["nullifier"]["exact"], "1/2");
    assert_eq!(proof["trials"].as_array().unwrap().len(), 3);
}

#[test]
fn verify_cubic_accepts_pinned_rationals() {
    let dir = tempfile::tempdir().unwrap();
    let out = loopsim(
        dir.path(),
        &[
            "verify-cubic",
            "--gamma",
            "3/7",
            "--reflectivity",
            "2/5",
            "--trials",
            "0",
            "--out",
            "v",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let proof = read_json(&dir.path().join("v/cubic_proof.json"));
    assert_eq!(proof["symbolic"]["gamma"], "3/7");
    assert_eq!(proof["symbolic"]["reflectivity"], "2/5");
    assert_eq!(proof["passed"], true);

    let out = loopsim(dir.path(), &["verify-cubic", "--gamma", "pi", "--out", "v2"]);
    assert_eq!(out.status.code(), Some(1));
}
