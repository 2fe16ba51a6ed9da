//! Run reports, assertion checks and plot-data export.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{Expectation, Kind, Operation, Scenario};
use crate::model::Model;
use crate::ops::execute;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Column order of the per-probe CSV files.
pub const PROBE_COLUMNS: [&str; 4] = ["t", "tv_distance", "window_seminorm", "leak_mass"];

/// Outcome class of a run, ordered by precedence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Numerical,
    Invalid,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Pass => 0,
            Status::Fail => 1,
            Status::Invalid => 2,
            Status::Numerical => 3,
        }
    }

    /// Precedence: invalid input, then numerical failure, then assertion failure.
    pub fn worst(a: Status, b: Status) -> Status {
        a.max(b)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Assertion {
    pub id: String,
    pub path: String,
    pub expected: Value,
    pub actual: Value,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OperationReport {
    pub step: usize,
    pub op: String,
    pub params: Value,
    pub result: Option<Value>,
    pub error: Option<String>,
    pub assertions: Vec<Assertion>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Verdict {
    pub status: Status,
    pub pass: bool,
    pub assertions: usize,
    /// Ids of failed assertions.
    pub failed: Vec<String>,
    /// Steps that raised a numerical failure, as `s<step>.<op>`.
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Provenance {
    pub toolkit_version: String,
    pub grid: Value,
    pub tolerances: BTreeMap<String, f64>,
    /// SEMIFLOW_SEED is reserved; every computation is deterministic.
    pub seed: String,
    /// The only field that differs between identical runs.
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub kind: Kind,
    /// Set when the problem could not be built; no steps ran.
    pub error: Option<String>,
    pub operations: Vec<OperationReport>,
    pub verdict: Verdict,
    pub provenance: Provenance,
}

/// A finished scenario with the files it wants written next to its report.
pub struct ScenarioRun {
    pub report: RunReport,
    pub files: Vec<(String, Vec<u8>)>,
    pub output: String,
}

/// Walks `a.b.0.c` through objects and arrays.
pub fn lookup<'a>(v: &'a Value, path: &str) -> Option<&'a Value> {
    path.split('.').try_fold(v, |cur, key| match cur {
        Value::Object(m) => m.get(key),
        Value::Array(a) => key.parse::<usize>().ok().and_then(|i| a.get(i)),
        _ => None,
    })
}

pub fn check(expected: &Expectation, actual: &Value) -> bool {
    match expected {
        Expectation::Bool(b) => actual.as_bool() == Some(*b),
        Expectation::Int(i) => actual.as_f64() == Some(*i as f64),
        Expectation::Float(f) => actual.as_f64() == Some(*f),
        Expectation::Text(s) => actual.as_str() == Some(s.as_str()),
        Expectation::Range(r) => match actual.as_f64() {
            None => false,
            Some(x) => {
                r.min.is_none_or(|m| x >= m)
                    && r.max.is_none_or(|m| x <= m)
                    && r.approx.is_none_or(|a| (x - a).abs() <= r.tol.unwrap_or(0.0))
            }
        },
    }
}

fn params(op: &Operation) -> Value {
    let mut v = serde_json::to_value(op).unwrap_or(Value::Null);
    if let Value::Object(m) = &mut v {
        m.remove("expect");
        m.remove("op");
    }
    v
}

fn empty_report(scn: &Scenario) -> RunReport {
    RunReport {
        scenario: scn.name.clone(),
        kind: scn.kind,
        error: None,
        operations: vec![],
        verdict: Verdict { status: Status::Pass, pass: true, assertions: 0, failed: vec![], errors: vec![] },
        provenance: Provenance {
            toolkit_version: VERSION.to_string(),
            grid: Value::Null,
            tolerances: BTreeMap::new(),
            seed: "ignored (SEMIFLOW_SEED is reserved; runs are deterministic)".into(),
            wall_time_s: 0.0,
        },
    }
}

/// Builds the model and runs every step; steps after a numerical failure
/// still run.
pub fn run_scenario(scn: &Scenario) -> ScenarioRun {
    let start = Instant::now();
    let mut report = empty_report(scn);
    let mut files = Vec::new();
    for (i, op) in scn.plan.iter().enumerate() {
        for (name, tol) in op.tolerances() {
            report.provenance.tolerances.insert(format!("s{i}.{name}"), tol);
        }
    }
    match Model::build(scn) {
        Err(e) => {
            report.error = Some(e);
            report.verdict.status = Status::Invalid;
            report.verdict.pass = false;
        }
        Ok(model) => {
            report.provenance.grid = model.grid();
            for (i, op) in scn.plan.iter().enumerate() {
                let mut rep = OperationReport {
                    step: i,
                    op: op.name().to_string(),
                    params: params(op),
                    result: None,
                    error: None,
                    assertions: vec![],
                };
                match execute(&model, op, i) {
                    Ok(out) => {
                        for (path, expected) in op.expect() {
                            let actual = lookup(&out.result, path).cloned().unwrap_or(Value::Null);
                            let pass = check(expected, &actual);
                            let id = format!("{}.s{i}.{}.{path}", scn.name, op.name());
                            if !pass {
                                report.verdict.failed.push(id.clone());
                            }
                            rep.assertions.push(Assertion {
                                id,
                                path: path.clone(),
                                expected: serde_json::to_value(expected).unwrap_or(Value::Null),
                                actual,
                                pass,
                            });
                        }
                        files.extend(out.files);
                        rep.result = Some(out.result);
                    }
                    Err(e) => {
                        report.verdict.errors.push(format!("s{i}.{}", op.name()));
                        rep.error = Some(e.to_string());
                    }
                }
                report.verdict.assertions += rep.assertions.len();
                report.operations.push(rep);
            }
            report.verdict.status = if !report.verdict.errors.is_empty() {
                Status::Numerical
            } else if !report.verdict.failed.is_empty() {
                Status::Fail
            } else {
                Status::Pass
            };
            report.verdict.pass = report.verdict.status == Status::Pass;
            if let Err(e) = model.write_matrices_to(&mut files) {
                report.error = Some(format!("matrix export: {e}"));
            }
        }
    }
    report.provenance.wall_time_s = start.elapsed().as_secs_f64();
    ScenarioRun { report, files, output: scn.output.clone().unwrap_or_else(|| scn.name.clone()) }
}

pub fn report_json(report: &RunReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("reports serialize");
    s.push('\n');
    s
}

/// Writes `report.json`, matrices and probe CSVs under `dir`.
pub fn write_run(run: &ScenarioRun, dir: &Path, svg: bool) -> std::io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let path = dir.join("report.json");
    fs::write(&path, report_json(&run.report))?;
    written.push(path);
    for (name, bytes) in &run.files {
        let path = dir.join(name);
        fs::write(&path, bytes)?;
        written.push(path);
    }
    written.extend(export_plotdata(&run.report, dir, svg)?);
    Ok(written)
}

fn cell(v: Option<&Value>) -> String {
    match v.and_then(Value::as_f64) {
        Some(x) => x.to_string(),
        None => String::new(),
    }
}

/// CSV text for one probe series (header only when it has no points).
pub fn probe_csv(points: &[Value]) -> String {
    let mut out = PROBE_COLUMNS.join(",");
    out.push('\n');
    for p in points {
        let row: Vec<String> = PROBE_COLUMNS.iter().map(|c| cell(p.get(*c))).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// One CSV per probe series of every diagnostics step: `s<step>_probe<k>.csv`.
/// A diagnostics step without probes yields a header-only `s<step>_probes.csv`.
pub fn export_plotdata(report: &RunReport, dir: &Path, svg: bool) -> std::io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for op in &report.operations {
        let Some(result) = &op.result else { continue };
        let Some(Value::Array(series)) = result.get("probes") else { continue };
        if series.is_empty() {
            let path = dir.join(format!("s{}_probes.csv", op.step));
            fs::write(&path, probe_csv(&[]))?;
            written.push(path);
            continue;
        }
        let labels = result.get("probe_labels").and_then(Value::as_array);
        for (k, s) in series.iter().enumerate() {
            let index = s.get("index").and_then(Value::as_u64).unwrap_or(k as u64);
            let points = s.get("points").and_then(Value::as_array).map(Vec::as_slice).unwrap_or(&[]);
            let path = dir.join(format!("s{}_probe{index}.csv", op.step));
            fs::write(&path, probe_csv(points))?;
            written.push(path);
            if svg {
                let title = labels.and_then(|l| l.get(k)).and_then(Value::as_str).unwrap_or("probe");
                let path = dir.join(format!("s{}_probe{index}.svg", op.step));
                fs::write(&path, crate::svg::line_chart(title, points))?;
                written.push(path);
            }
        }
    }
    Ok(written)
}

pub fn read_report(path: &Path) -> Result<RunReport, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}:{}:{}: {e}", path.display(), e.line(), e.column()))
}

/// The report without its wall time, for reproducibility checks.
pub fn canonical(report: &RunReport) -> Value {
    let mut v = serde_json::to_value(report).unwrap_or(Value::Null);
    if let Some(p) = v.get_mut("provenance").and_then(Value::as_object_mut) {
        p.insert("wall_time_s".into(), json!(0.0));
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Range;

    #[test]
    fn lookup_walks_objects_and_arrays() {
        let v = json!({ "a": { "b": [1, { "c": true }] } });
        assert_eq!(lookup(&v, "a.b.1.c"), Some(&json!(true)));
        assert_eq!(lookup(&v, "a.b.0"), Some(&json!(1)));
        assert_eq!(lookup(&v, "a.x"), None);
    }

    #[test]
    fn expectations_compare_by_kind() {
        assert!(check(&Expectation::Int(2), &json!(2)));
        assert!(check(&Expectation::Int(2), &json!(2.0)));
        assert!(!check(&Expectation::Bool(true), &json!(1)));
        assert!(check(&Expectation::Text("converged".into()), &json!("converged")));
        let r = Range { min: Some(0.1), max: None, approx: None, tol: None };
        assert!(check(&Expectation::Range(r.clone()), &json!(0.3)));
        assert!(!check(&Expectation::Range(r), &Value::Null));
        let a = Range { min: None, max: None, approx: Some(1.0), tol: Some(1e-3) };
        assert!(check(&Expectation::Range(a.clone()), &json!(1.0005)));
        assert!(!check(&Expectation::Range(a), &json!(1.01)));
    }

    #[test]
    fn empty_series_give_header_only_csv() {
        assert_eq!(probe_csv(&[]), "t,tv_distance,window_seminorm,leak_mass\n");
        let p = json!({ "t": 1.0, "tv_distance": 0.5, "window_seminorm": null, "leak_mass": 0.0 });
        assert_eq!(probe_csv(&[p]), "t,tv_distance,window_seminorm,leak_mass\n1,0.5,,0\n");
    }

    #[test]
    fn status_precedence() {
        assert_eq!(Status::worst(Status::Fail, Status::Numerical), Status::Numerical);
        assert_eq!(Status::worst(Status::Invalid, Status::Numerical), Status::Invalid);
        assert_eq!(Status::worst(Status::Pass, Status::Fail), Status::Fail);
    }
}
