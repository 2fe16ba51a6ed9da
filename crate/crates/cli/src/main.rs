use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use semiflow_cli::report::{export_plotdata, read_report};
use semiflow_cli::{overall, registry, resolve, run_all, RunOptions, Status};
use semiflow_core::asymptotics::{
    convergence_diagnostics_with, doob_check, limit_projection, separation_test, spectral_oracle,
    DiagnosticsOptions, DEFAULT_TOL,
};
use semiflow_core::{
    BoundedFunction, CompactWindow, GeneratorMatrix, Kernel, MatrixDocument, Semigroup, SignedMeasure, StateSpace,
};
use serde_json::{json, Value};

/// `println!` that ignores a closed stdout.
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout().lock(), $($arg)*);
    }};
}

/// Positive semigroups on finite state spaces: scenario runs and matrix analyses.
///
/// SEMIFLOW_SEED is reserved and ignored: every computation is deterministic.
#[derive(Parser)]
#[command(name = "semiflow", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file or a built-in scenario by name.
    Run {
        config: String,
        #[arg(long, default_value = "semiflow-out")]
        out: PathBuf,
        /// Scenarios run in parallel on this many threads.
        #[arg(long)]
        jobs: Option<usize>,
        /// Also write SVG line charts next to the probe CSVs.
        #[arg(long)]
        svg: bool,
    },
    /// List built-in scenarios whose name contains FILTER.
    List { filter: Option<String> },
    /// Print the configuration of a built-in scenario.
    Show { name: String },
    /// Write per-probe CSV files from a report.
    Export {
        report: PathBuf,
        /// Defaults to the report's directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        svg: bool,
    },
    /// Separation test and, for generators, the spectral oracle.
    Analyze(MatrixArgs),
    /// Invariant-measure domination of the rows of S_t0.
    Doob {
        #[command(flatten)]
        matrix: MatrixArgs,
        #[arg(long, default_value_t = 1.0)]
        t0: f64,
    },
    /// Limit projection as a dense matrix.
    Project(MatrixArgs),
    /// Orbits of point masses and atom indicators at doubling horizons.
    Diagnose {
        #[command(flatten)]
        matrix: MatrixArgs,
        #[arg(long, default_value_t = 16.0)]
        horizon: f64,
        #[arg(long, default_value_t = 8)]
        samples: usize,
        #[arg(long, default_value_t = 1e-6)]
        diagnostics_tol: f64,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false, id = "matrix_source")]
struct MatrixArgs {
    /// Generator Q (dense CSV or JSON envelope); S_t = e^{tQ}.
    #[arg(long, group = "matrix_source")]
    generator: Option<PathBuf>,
    /// Step kernel K of a discrete semigroup; S_n = K^n.
    #[arg(long, group = "matrix_source")]
    kernel: Option<PathBuf>,
    /// Same as --kernel.
    #[arg(long, group = "matrix_source")]
    discrete_step: Option<PathBuf>,
    /// Rank threshold of the fixed-space computations.
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
}

enum Failure {
    Input(String),
    Numerical(String),
}

impl From<semiflow_core::Error> for Failure {
    fn from(e: semiflow_core::Error) -> Self {
        Failure::Numerical(e.to_string())
    }
}

fn read_document(path: &Path) -> Result<MatrixDocument, Failure> {
    let input = |e: String| Failure::Input(format!("{}: {e}", path.display()));
    let text = std::fs::read_to_string(path).map_err(|e| input(e.to_string()))?;
    if path.extension().is_some_and(|e| e == "json") {
        return serde_json::from_str(&text).map_err(|e| input(e.to_string()));
    }
    let mut matrix = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let row: Result<Vec<f64>, _> = line.split(',').map(|v| v.trim().parse::<f64>()).collect();
        matrix.push(row.map_err(|e| input(format!("line {}: {e}", i + 1)))?);
    }
    let n = matrix.len();
    let atoms = StateSpace::indexed(n.max(1)).map_err(|e| input(e.to_string()))?.atoms().to_vec();
    Ok(MatrixDocument { atoms, embedding: None, weights: None, escape: vec![], matrix })
}

fn semigroup(m: &MatrixArgs) -> Result<Semigroup, Failure> {
    let input = |e: semiflow_core::Error| Failure::Input(e.to_string());
    if let Some(p) = &m.generator {
        return Ok(Semigroup::continuous(GeneratorMatrix::from_document(read_document(p)?).map_err(input)?));
    }
    let p = m.kernel.as_ref().or(m.discrete_step.as_ref()).ok_or(Failure::Input("no matrix given".into()))?;
    let k: Kernel = read_document(p)?.into_kernel().map_err(input)?;
    Ok(Semigroup::discrete(k))
}

fn print(v: &Value) {
    say!("{}", serde_json::to_string_pretty(v).expect("json"));
}

fn analyze(m: &MatrixArgs) -> Result<(), Failure> {
    let s = semigroup(m)?;
    let mut out = json!({ "separation": separation_test(&s, m.tol)? });
    if let Some(q) = s.generator() {
        out["oracle"] = serde_json::to_value(spectral_oracle(q)?).map_err(semiflow_core::Error::from)?;
    }
    print(&out);
    Ok(())
}

fn doob(m: &MatrixArgs, t0: f64) -> Result<(), Failure> {
    let s = semigroup(m)?;
    print(&json!({ "doob": doob_check(&s, t0, m.tol)? }));
    Ok(())
}

fn project(m: &MatrixArgs) -> Result<(), Failure> {
    let s = semigroup(m)?;
    let p = limit_projection(&s, m.tol)?;
    let k = p.kernel.matrix();
    let rows: Vec<Vec<f64>> = (0..k.nrows()).map(|i| k.row(i).iter().copied().collect()).collect();
    print(&json!({ "projection": p, "limit": rows }));
    Ok(())
}

/// Probes: point masses and indicators of the first eight genuine atoms.
fn diagnose(m: &MatrixArgs, horizon: f64, samples: usize, tol: f64) -> Result<(), Failure> {
    let s = semigroup(m)?;
    let space: Arc<StateSpace> = s.space().clone();
    let atoms: Vec<usize> = (0..space.len()).filter(|&i| !space.is_escape(i)).take(8).collect();
    let measures: Vec<SignedMeasure> =
        atoms.iter().map(|&i| SignedMeasure::dirac(space.clone(), i)).collect::<Result<_, _>>()?;
    let functions: Vec<BoundedFunction> =
        atoms.iter().map(|&i| BoundedFunction::indicator(space.clone(), i)).collect::<Result<_, _>>()?;
    let opts = DiagnosticsOptions { tol, samples, rank_tol: m.tol, ..Default::default() };
    let window = CompactWindow::whole(space);
    let d = convergence_diagnostics_with(&s, &measures, &functions, &window, horizon, &opts)?;
    print(&json!({ "diagnostics": d }));
    Ok(())
}

fn finish(r: Result<(), Failure>) -> ExitCode {
    match r {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(e)) => {
            eprintln!("numerical failure: {e}");
            ExitCode::from(3)
        }
    }
}

fn run(config: &str, out: PathBuf, jobs: Option<usize>, svg: bool) -> ExitCode {
    let scenarios = match resolve(config) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
    };
    let runs = match run_all(&scenarios, &RunOptions { out: out.clone(), jobs, svg }) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: writing results under {}: {e}", out.display());
            return ExitCode::from(3);
        }
    };
    for r in &runs {
        let v = &r.report.verdict;
        let tag = match v.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Numerical => "ERROR",
            Status::Invalid => "INVALID",
        };
        say!("{tag} {} ({} assertions, {:.2}s)", r.report.scenario, v.assertions, r.report.provenance.wall_time_s);
        if let Some(e) = &r.report.error {
            say!("  {e}");
        }
        for id in &v.failed {
            say!("  failed: {id}");
        }
        for op in r.report.operations.iter().filter(|o| o.error.is_some()) {
            say!("  s{}.{}: {}", op.step, op.op, op.error.as_deref().unwrap_or_default());
        }
    }
    ExitCode::from(overall(&runs).exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, out, jobs, svg } => run(&config, out, jobs, svg),
        Command::List { filter } => {
            for e in registry::list(filter.as_deref()) {
                say!("{:<24} {}", e.label, e.summary);
            }
            ExitCode::SUCCESS
        }
        Command::Show { name } => match registry::find(&name) {
            Some(e) => {
                {
                    use std::io::Write;
                    let _ = std::io::stdout().lock().write_all(e.source.as_bytes());
                }
                ExitCode::SUCCESS
            }
            None => {
                eprintln!("error: no built-in scenario {name:?}");
                ExitCode::from(2)
            }
        },
        Command::Export { report, out, svg } => {
            let dir = out.unwrap_or_else(|| report.parent().map(Path::to_path_buf).unwrap_or_default());
            let r = match read_report(&report) {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            match export_plotdata(&r, &dir, svg) {
                Ok(files) => {
                    for f in files {
                        say!("{}", f.display());
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(3)
                }
            }
        }
        Command::Analyze(m) => finish(analyze(&m)),
        Command::Doob { matrix, t0 } => finish(doob(&matrix, t0)),
        Command::Project(m) => finish(project(&m)),
        Command::Diagnose { matrix, horizon, samples, diagnostics_tol } => {
            finish(diagnose(&matrix, horizon, samples, diagnostics_tol))
        }
    }
}
