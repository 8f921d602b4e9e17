//! End-to-end checks of the bscsim binary: exit codes, output schemas,
//! sweeps, and byte-level reproducibility.

use std::process::{Command, Output};

fn bscsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bscsim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf-8 stdout")
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("utf-8 stderr")
}

fn data_lines(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).collect()
}

#[test]
fn analyze_sweep_emits_one_row_per_point() {
    let out = bscsim(&["analyze", "--sweep", "file_size_n=100:2000:100", "--rho", "0.9"]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    let lines = data_lines(&text);
    assert!(lines[0].starts_with("n,rho,x,phi,p_starv,baseline_p_starv,e_starvations,"));
    assert_eq!(lines.len(), 1 + 20, "header plus one row per sweep point");
    assert!(lines[1].starts_with("100,"));
    assert!(lines[20].starts_with("2000,"));
    assert!(text.starts_with("# bscsim "));
    assert!(text.contains("\n# config: {"));
}

#[test]
fn invalid_config_exits_two_and_names_the_field() {
    let out = bscsim(&["analyze", "--startup-x", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("startup_x"));
}

#[test]
fn critical_load_quality_exits_three() {
    let out = bscsim(&["quality", "--rho", "1.0"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("rho"));
}

#[test]
fn oracle_beyond_budget_exits_four() {
    let out = bscsim(&[
        "oracle",
        "--file-size-n",
        "20",
        "--startup-x",
        "2",
        "--offset-phi",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn oracle_reports_exact_rationals() {
    let out = bscsim(&[
        "oracle",
        "--file-size-n",
        "6",
        "--startup-x",
        "2",
        "--offset-phi",
        "2",
        "--rho",
        "1.0",
        "--format",
        "json",
    ]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).expect("valid json");
    assert_eq!(doc["p_starvation"]["numerator"], "37");
    assert_eq!(doc["p_starvation"]["denominator"], "128");
    assert_eq!(doc["total"]["numerator"], "1");
    assert_eq!(doc["total"]["denominator"], "1");
    assert_eq!(doc["command"], "oracle");
    assert_eq!(doc["data"].as_array().map(|a| a.len()), Some(2));
}

#[test]
fn oracle_rejects_sweep() {
    let out = bscsim(&["oracle", "--sweep", "rho=0.5:1:0.5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("sweep"));
}

#[test]
fn same_seed_reproduces_bytes() {
    let args = [
        "simulate",
        "--runs",
        "100",
        "--seed",
        "9",
        "--file-size-n",
        "40",
        "--startup-x",
        "4",
        "--offset-phi",
        "5",
    ];
    let a = bscsim(&args);
    let b = bscsim(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn config_echo_reproduces_the_run() {
    let dir = tempfile::tempdir().expect("tempdir");
    let first = dir.path().join("first.csv");
    let out = bscsim(&[
        "simulate",
        "--runs",
        "60",
        "--seed",
        "11",
        "--file-size-n",
        "30",
        "--startup-x",
        "3",
        "--offset-phi",
        "4",
        "--out",
        first.to_str().expect("path"),
    ]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let text = std::fs::read_to_string(&first).expect("output file written");
    let echo = text
        .lines()
        .find_map(|l| l.strip_prefix("# config: "))
        .expect("config echo present");
    let cfg_path = dir.path().join("echo.json");
    std::fs::write(&cfg_path, echo).expect("write echo");
    // The echo already records the output path, so the rerun needs no flags.
    let rerun = bscsim(&["simulate", "--config", cfg_path.to_str().expect("path")]);
    assert!(rerun.status.success(), "stderr: {}", stderr(&rerun));
    let second = std::fs::read_to_string(&first).expect("rerun wrote the file");
    assert_eq!(text, second);
}

#[test]
fn empty_ladder_exits_two() {
    let dir = tempfile::tempdir().expect("tempdir");
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"ladder": []}"#).expect("write config");
    let out = bscsim(&["compare", "--config", cfg.to_str().expect("path")]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_config_key_exits_two() {
    let dir = tempfile::tempdir().expect("tempdir");
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"file_size": 100}"#).expect("write config");
    let out = bscsim(&["analyze", "--config", cfg.to_str().expect("path")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("file_size"));
}

#[test]
fn non_poisson_simulate_omits_analytic_columns() {
    let out = bscsim(&[
        "simulate",
        "--arrival",
        "on_off",
        "--runs",
        "50",
        "--seed",
        "3",
        "--file-size-n",
        "30",
        "--startup-x",
        "3",
        "--offset-phi",
        "4",
    ]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    let lines = data_lines(&text);
    let header: Vec<&str> = lines[0].split(',').collect();
    let row: Vec<&str> = lines[1].split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).expect("column");
    assert_eq!(row[col("analytic_p_starv")], "");
    assert_eq!(row[col("z_score")], "");
    assert!(row[col("note")].contains("no closed form"));
    assert_eq!(row[col("arrival")], "on_off");
}

#[test]
fn offset_scans_down_from_the_largest_offset() {
    let out = bscsim(&[
        "offset",
        "--file-size-n",
        "7",
        "--startup-x",
        "1",
        "--rho",
        "1.0",
        "--risk-threshold",
        "0.56",
    ]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    let lines = data_lines(&text);
    let row: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(row[4], "2", "phi");
    assert_eq!(row[6], "true", "meets_threshold");
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().expect("tempdir");
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"file_size_n": 100, "startup_x": 4, "offset_phi": 5, "rho": 0.9}"#,
    )
    .expect("write config");
    let out = bscsim(&[
        "analyze",
        "--config",
        cfg.to_str().expect("path"),
        "--file-size-n",
        "50",
    ]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    let lines = data_lines(&text);
    assert!(lines[1].starts_with("50,0.9,4,5,"));
}

#[test]
fn trace_section_follows_the_data() {
    let out = bscsim(&[
        "simulate",
        "--runs",
        "5",
        "--seed",
        "4",
        "--file-size-n",
        "20",
        "--startup-x",
        "2",
        "--offset-phi",
        "3",
        "--emit-trace",
    ]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    let trace_at = text.find("# trace\n").expect("trace marker");
    let after = &text[trace_at + "# trace\n".len()..];
    assert!(after.starts_with("time,kind,buffer_level,state_n"));
    assert!(after.lines().count() > 20, "one event per arrival and display at least");
}
