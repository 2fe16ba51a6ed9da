use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn semiflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_semiflow")).args(args).output().expect("spawn semiflow")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("config.toml");
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn run_in(dir: &Path, config: &str, extra: &[&str]) -> Output {
    let out = dir.join("out");
    let mut args = vec!["run", config, "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    semiflow(&args)
}

fn report(dir: &Path, scenario: &str) -> Value {
    let text = fs::read_to_string(dir.join("out").join(scenario).join("report.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn without_wall_time(mut v: Value) -> Value {
    v["provenance"]["wall_time_s"] = Value::Null;
    v
}

const SWAP: &str = r#"
[[scenario]]
name = "swap"
kind = "raw_generator"
problem = { generator = [[-1, 1], [1, -1]] }

[[scenario.plan]]
op = "separation"
expect = { predicted_convergence = true, rank = 1 }
"#;

#[test]
fn builtin_swap_dichotomy_passes() {
    let dir = TempDir::new().unwrap();
    let o = run_in(dir.path(), "swap-dichotomy", &[]);
    assert_eq!(code(&o), 0, "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).contains("PASS swap-continuous"));
    assert!(stdout(&o).contains("PASS swap-discrete"));
    let r = report(dir.path(), "swap-discrete");
    assert_eq!(r["verdict"]["status"], "pass");
}

#[test]
fn builtin_ou_doob_passes() {
    let dir = TempDir::new().unwrap();
    let o = run_in(dir.path(), "ou-doob", &[]);
    assert_eq!(code(&o), 0, "{}{}", stdout(&o), stderr(&o));
}

#[test]
fn builtin_resolves_by_label() {
    let o = semiflow(&["show", "halfline-drift(b)"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("halfline-drift-minus"));
    let o = semiflow(&["show", "no-such-scenario"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn malformed_config_reports_position() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), &SWAP.replace("op = \"separation\"", "op = \"separation\"\nbogus = 1"));
    let o = run_in(dir.path(), &cfg, &[]);
    assert_eq!(code(&o), 2);
    let err = stderr(&o);
    assert!(err.contains("config.toml:"), "{err}");
    assert!(err.contains("bogus"), "{err}");
    let line_col = err.split("config.toml:").nth(1).unwrap();
    let mut parts = line_col.splitn(3, ':');
    assert!(parts.next().unwrap().parse::<usize>().is_ok(), "{err}");
    assert!(parts.next().unwrap().parse::<usize>().is_ok(), "{err}");
}

#[test]
fn kind_mismatch_is_invalid() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), &SWAP.replace("op = \"separation\"", "op = \"gaussian_stationary\""));
    let o = run_in(dir.path(), &cfg, &[]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn failed_expectation_exits_one() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), &SWAP.replace("rank = 1", "rank = 2"));
    let o = run_in(dir.path(), &cfg, &[]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("failed: swap.s0.separation.rank"), "{}", stdout(&o));
    let r = report(dir.path(), "swap");
    assert_eq!(r["verdict"]["status"], "fail");
    assert_eq!(r["verdict"]["failed"][0], "swap.s0.separation.rank");
}

#[test]
fn numerical_failure_exits_three() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"
[[scenario]]
name = "leaky-ou"
kind = "elliptic"
problem = { preset = { name = "ou" }, truncation = 6.0, n = 241, far_field = "absorbing" }

[[scenario.plan]]
op = "gaussian_stationary"
"#,
    );
    let o = run_in(dir.path(), &cfg, &[]);
    assert_eq!(code(&o), 3, "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).contains("Perron ratio"), "{}", stdout(&o));
    assert_eq!(report(dir.path(), "leaky-ou")["verdict"]["status"], "numerical");
}

#[test]
fn worst_status_wins_across_scenarios() {
    let dir = TempDir::new().unwrap();
    let failing = SWAP.replace("name = \"swap\"", "name = \"swap-bad\"").replace("rank = 1", "rank = 2");
    let cfg = write_config(dir.path(), &format!("{SWAP}\n{failing}"));
    let o = run_in(dir.path(), &cfg, &[]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("PASS swap "));
    assert!(stdout(&o).contains("FAIL swap-bad"));
}

#[test]
fn list_filters_by_substring() {
    let o = semiflow(&["list"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).lines().count(), 12);
    let o = semiflow(&["list", "coupled"]);
    assert_eq!(stdout(&o).lines().count(), 2);
    let o = semiflow(&["list", "zzz"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).is_empty());
}

#[test]
fn reports_are_deterministic() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    assert_eq!(code(&run_in(a.path(), "two-block-doob", &[])), 0);
    assert_eq!(code(&run_in(b.path(), "two-block-doob", &[])), 0);
    assert_eq!(
        without_wall_time(report(a.path(), "two-block-doob")),
        without_wall_time(report(b.path(), "two-block-doob"))
    );
}

#[test]
fn thread_count_does_not_change_reports() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    assert_eq!(code(&run_in(a.path(), "coupled-reducible", &["--jobs", "1"])), 0);
    assert_eq!(code(&run_in(b.path(), "coupled-reducible", &["--jobs", "4"])), 0);
    for name in ["coupled-zero", "coupled-partial"] {
        assert_eq!(without_wall_time(report(a.path(), name)), without_wall_time(report(b.path(), name)));
    }
}

#[test]
fn probe_csv_follows_swap_rate() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&run_in(dir.path(), "swap-dichotomy", &[])), 0);
    let csv = fs::read_to_string(dir.path().join("out/swap-continuous/s4_probe0.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,tv_distance,window_seminorm,leak_mass"));
    let mut rows = 0;
    for line in lines {
        let cols: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        assert!((cols[1] - (-2.0 * cols[0]).exp()).abs() < 1e-8, "{line}");
        rows += 1;
    }
    assert!(rows >= 8);
}

#[test]
fn export_rewrites_probe_files() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&run_in(dir.path(), "swap-dichotomy", &[])), 0);
    let src = dir.path().join("out/swap-continuous");
    let dest = dir.path().join("exported");
    let o = semiflow(&[
        "export",
        src.join("report.json").to_str().unwrap(),
        "--out",
        dest.to_str().unwrap(),
        "--svg",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(
        fs::read_to_string(src.join("s4_probe0.csv")).unwrap(),
        fs::read_to_string(dest.join("s4_probe0.csv")).unwrap()
    );
    assert!(fs::read_to_string(dest.join("s4_probe0.svg")).unwrap().starts_with("<svg"));
}

#[test]
fn diagnostics_without_probes_give_header_only_csv() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        &SWAP.replace("op = \"separation\"\nexpect = { predicted_convergence = true, rank = 1 }", "op = \"diagnose\""),
    );
    let o = run_in(dir.path(), &cfg, &[]);
    assert_eq!(code(&o), 0, "{}{}", stdout(&o), stderr(&o));
    let csv = fs::read_to_string(dir.path().join("out/swap/s0_probes.csv")).unwrap();
    assert_eq!(csv, "t,tv_distance,window_seminorm,leak_mass\n");
}

#[test]
fn coupled_probes_expand_per_component() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&run_in(dir.path(), "coupled-irreducible", &[])), 0);
    let r = report(dir.path(), "coupled-irreducible");
    let step = r["operations"].as_array().unwrap().iter().find(|op| op["op"] == "diagnose").unwrap();
    let labels = step["result"]["probe_labels"].as_array().unwrap();
    let m = r["provenance"]["grid"]["components"].as_u64().unwrap() as usize;
    let files = fs::read_dir(dir.path().join("out/coupled-irreducible"))
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().contains("_probe"))
        .count();
    assert_eq!(m, 2);
    assert_eq!(files, labels.len());
    assert_eq!(files % m, 0);
}

#[test]
fn matrix_subcommands_read_csv() {
    let dir = TempDir::new().unwrap();
    let q = dir.path().join("q.csv");
    fs::write(&q, "-1,1\n1,-1\n").unwrap();
    let k = dir.path().join("k.csv");
    fs::write(&k, "0,1\n1,0\n").unwrap();

    let o = semiflow(&["analyze", "--generator", q.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["separation"]["rank"], 1);

    let o = semiflow(&["diagnose", "--discrete-step", k.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["diagnostics"]["verdict"], "oscillating");

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "-1,1\n1\n").unwrap();
    assert_eq!(code(&semiflow(&["project", "--generator", bad.to_str().unwrap()])), 2);
    assert_eq!(code(&semiflow(&["project", "--generator", q.to_str().unwrap(), "--kernel", k.to_str().unwrap()])), 2);
}
