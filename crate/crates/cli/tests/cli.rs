//! End-to-end behavior of the `ncl` binary: flag handling, exit codes,
//! config-file merging, and determinism.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ncl"));
    cmd.env("SOURCE_DATE_EPOCH", "1700000000");
    cmd
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("ncl-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str], out: &Path) -> Output {
    bin().args(args).arg("--out").arg(out).output().expect("spawn ncl")
}

#[test]
fn usage_errors_exit_2() {
    let out = tmp("usage");
    assert_eq!(run(&["rates", "--measure", "beta:0.5"], &out).status.code(), Some(2));
    assert_eq!(run(&["rates", "--measure", "{bad json", "--bmax", "5"], &out).status.code(), Some(2));
    assert_eq!(run(&["rates", "--measure", "beta:2.5", "--bmax", "5"], &out).status.code(), Some(2));
    assert_eq!(run(&["rates", "--measure", "beta:0.5", "--bmax", "1"], &out).status.code(), Some(2));
    // clap-level unknown flag also reports usage
    assert_eq!(run(&["rates", "--nonsense"], &out).status.code(), Some(2));
}

#[test]
fn hypothesis_violations_exit_3() {
    let out = tmp("hyp");
    assert_eq!(
        run(
            &["solve", "--measure", "beta:0.5", "--c", "3", "--from", "one", "--assert-finite-mean"],
            &out
        )
        .status
        .code(),
        Some(3)
    );
    // from inf needs dust
    assert_eq!(
        run(&["solve", "--measure", "beta:1.5", "--c", "1", "--from", "inf", "--n", "16"], &out)
            .status
            .code(),
        Some(3)
    );
    let o = run(&["sibuya", "--measure", "beta:0.5", "--c", "2.0", "--n", "32"], &out);
    assert_eq!(o.status.code(), Some(3));
    // the message carries the computed threshold
    assert!(String::from_utf8_lossy(&o.stderr).contains("1.273"));
}

#[test]
fn compare_target_mismatch_exits_4() {
    let out = tmp("mismatch");
    let st = run(
        &["solve", "--measure", "beta:0.5", "--c", "1", "--from", "one", "--n", "64"],
        &out,
    )
    .status;
    assert!(st.success());
    let solve_json = out.join("solve.json").display().to_string();
    // same measure, different c
    let o = run(
        &[
            "simulate", "--measure", "beta:0.5", "--s", "20", "--m", "2", "--c", "0.5",
            "--reps", "50", "--seed", "1", "--compare-to", &solve_json,
        ],
        &out,
    );
    assert_eq!(o.status.code(), Some(4));
    // matching pair is accepted
    let o = run(
        &[
            "simulate", "--measure", "beta:0.5", "--s", "20", "--m", "2", "--c", "1",
            "--reps", "50", "--seed", "1", "--compare-to", &solve_json,
        ],
        &out,
    );
    assert!(o.status.success());
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("simulate_summary.json")).unwrap())
            .unwrap();
    assert!(summary["runs"][0]["tv_to_reference"].is_array());
}

#[test]
fn measure_shorthand_equals_json_form() {
    let out_a = tmp("short-a");
    let out_b = tmp("short-b");
    assert!(run(
        &["solve", "--measure", "beta:0.5", "--c", "1", "--from", "one", "--n", "64"],
        &out_a
    )
    .status
    .success());
    assert!(run(
        &[
            "solve", "--measure", r#"{"kind":"beta","alpha":0.5}"#, "--c", "1", "--from", "one",
            "--n", "64"
        ],
        &out_b
    )
    .status
    .success());
    assert_eq!(
        fs::read(out_a.join("solve.json")).unwrap(),
        fs::read(out_b.join("solve.json")).unwrap()
    );
}

#[test]
fn config_file_supplies_and_flags_override() {
    let out = tmp("config");
    let cfg_path = out.join("run.json");
    fs::write(&cfg_path, r#"{"measure": "beta:0.5", "c": 1.0, "bmax": 8}"#).unwrap();
    let o = bin()
        .args(["rates", "--config", cfg_path.to_str().unwrap()])
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("rates_report.json")).unwrap()).unwrap();
    assert_eq!(report["b_max"], 8);
    // the config file is hashed into the manifest
    assert!(report["manifest"]["input_hashes"]
        .as_object()
        .unwrap()
        .keys()
        .any(|k| k.ends_with("run.json")));

    // an explicit flag wins over the config value
    let o = bin()
        .args(["rates", "--config", cfg_path.to_str().unwrap(), "--bmax", "12"])
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(o.status.success());
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("rates_report.json")).unwrap()).unwrap();
    assert_eq!(report["b_max"], 12);
}

#[test]
fn star_measure_rate_column_is_one() {
    let out = tmp("star");
    assert!(run(
        &["rates", "--measure", r#"{"kind":"atomic","atoms":[[1.0,1.0]]}"#, "--bmax", "10"],
        &out
    )
    .status
    .success());
    let csv = fs::read_to_string(out.join("rates.csv")).unwrap();
    for line in csv.lines().skip(2) {
        let mut fields = line.split(',');
        let b: u64 = fields.next().unwrap().parse().unwrap();
        let lambda_b: f64 = fields.next().unwrap().parse().unwrap();
        let expect = if b >= 2 { 1.0 } else { 0.0 };
        assert!((lambda_b - expect).abs() < 1e-12, "b={b}: lambda_b={lambda_b}");
    }
}

#[test]
fn simulate_is_invariant_to_worker_count() {
    let args = [
        "simulate", "--measure", "beta:0.5", "--s", "40", "--m", "2", "--c", "1", "--reps",
        "200", "--seed", "3",
    ];
    let out_a = tmp("threads-1");
    let out_b = tmp("threads-4");
    assert!(bin().args(args).arg("--out").arg(&out_a).env("NCL_THREADS", "1").status().unwrap().success());
    assert!(bin().args(args).arg("--out").arg(&out_b).env("NCL_THREADS", "4").status().unwrap().success());
    assert_eq!(
        fs::read(out_a.join("sim_s40.csv")).unwrap(),
        fs::read(out_b.join("sim_s40.csv")).unwrap()
    );
}

#[test]
fn sweep_writes_one_table_per_population_size() {
    let out = tmp("sweep");
    assert!(run(
        &[
            "simulate", "--measure", "beta:0.5", "--s", "20,40", "--m", "2", "--c", "1",
            "--reps", "100", "--seed", "9",
        ],
        &out
    )
    .status
    .success());
    assert!(out.join("sim_s20.csv").exists());
    assert!(out.join("sim_s40.csv").exists());
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("simulate_summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["runs"].as_array().unwrap().len(), 2);
    // no reference given: trend not evaluated
    assert!(summary["tv_trend_nonincreasing"].is_null());
}

#[test]
fn infinite_init_summary_is_all_infinite_for_beta() {
    let out = tmp("infinit");
    assert!(run(
        &[
            "simulate", "--measure", "beta:0.5", "--s", "20", "--m", "2", "--c", "1", "--init",
            "inf", "--reps", "100", "--seed", "4",
        ],
        &out
    )
    .status
    .success());
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("simulate_summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["runs"][0]["empirical_pmf"]["inf"], 1.0);
    let csv = fs::read_to_string(out.join("sim_s20.csv")).unwrap();
    assert!(csv.lines().skip(2).all(|l| l.ends_with(",inf,inf") || l.contains(",inf")));
}

#[test]
fn solve_from_inf_reports_the_infinity_mass() {
    let out = tmp("from-inf");
    assert!(run(
        &[
            "solve", "--measure", r#"{"kind":"atomic","atoms":[[1.0,0.3],[0.5,0.7]]}"#, "--c",
            "0.5", "--from", "inf", "--n", "128",
        ],
        &out
    )
    .status
    .success());
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("solve.json")).unwrap()).unwrap();
    let p_inf = report["p_inf"].as_f64().unwrap();
    assert!((p_inf - 0.4).abs() <= 1e-8);
    assert_eq!(report["mean"], "inf");
    assert!(report["diagnostics"]["p_inf_gap"].as_f64().unwrap() <= 1e-8);
}

#[test]
fn kernel_csv_is_emitted_on_request() {
    let out = tmp("kernel");
    assert!(run(
        &[
            "solve", "--measure", "beta:0.5", "--c", "1", "--from", "one", "--n", "32",
            "--kernel-csv",
        ],
        &out
    )
    .status
    .success());
    let csv = fs::read_to_string(out.join("kernel.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("# manifest:"));
    assert!(lines.next().unwrap().starts_with("# c="));
    assert_eq!(lines.next().unwrap().split(',').count(), 33);
}
