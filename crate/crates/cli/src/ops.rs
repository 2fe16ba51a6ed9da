//! Execution of plan steps against a model.

use nalgebra::DMatrix;
use semiflow_core::asymptotics::{
    convergence_diagnostics_with, doob_check, limit_projection, perron_fixed_measure, separation_test,
    spectral_oracle, DiagnosticsOptions,
};
use semiflow_core::coupled::{invariant_structure, limit_rank_law, matrix_lemmas, validate_hypotheses};
use semiflow_core::elliptic::{
    boundary_leak, check_lyapunov, consistency_residual, discretize, gaussian_cell_masses, heat_probe,
    liouville_check, LyapunovCertificate,
};
use semiflow_core::linalg::column;
use semiflow_core::semigroup::{boundedness_profile, dyadic_times};
use semiflow_core::{BoundedFunction, CompactWindow, Error, Result, SignedMeasure};
use serde_json::{json, Value};

use crate::config::{Compare, FunctionProbe, MeasureProbe, Operation};
use crate::expr::Expr;
use crate::model::Model;

/// Result of one step plus any matrix files it produced.
pub struct StepOutput {
    pub result: Value,
    /// `(file name, contents)`.
    pub files: Vec<(String, Vec<u8>)>,
}

impl StepOutput {
    fn value(result: Value) -> Self {
        StepOutput { result, files: vec![] }
    }
}

fn to_value<T: serde::Serialize>(v: &T) -> Result<Value> {
    Ok(serde_json::to_value(v)?)
}

fn insert(v: &mut Value, key: &str, x: Value) {
    if let Value::Object(m) = v {
        m.insert(key.to_string(), x);
    }
}

fn no_grid() -> Error {
    Error::Precondition("operation needs a grid".into())
}

/// Components a probe lives on: its own, or all of them when `expand`.
fn components(model: &Model, component: Option<usize>, expand: bool) -> Result<Vec<Option<usize>>> {
    match component {
        Some(k) if k >= model.components() => {
            Err(Error::Precondition(format!("component {k} out of range (m = {})", model.components())))
        }
        Some(k) => Ok(vec![Some(k)]),
        None if expand && model.components() > 1 => Ok((0..model.components()).map(Some).collect()),
        None => Ok(vec![None]),
    }
}

fn support(model: &Model, k: Option<usize>) -> Vec<usize> {
    match k {
        Some(k) => model.component_atoms(k),
        None => (0..model.space().len()).collect(),
    }
}

fn prefix(k: Option<usize>) -> String {
    k.map_or(String::new(), |k| format!("c{k} "))
}

fn measures(model: &Model, probe: &MeasureProbe, expand: bool) -> Result<Vec<(String, SignedMeasure)>> {
    let space = model.space().clone();
    let mut out = Vec::new();
    for k in components(model, probe.component, expand)? {
        let (label, mu) = if let Some(a) = probe.atom {
            let atom = match k {
                Some(k) => *model.component_atoms(k).get(a).ok_or(Error::Precondition(format!("atom {a} out of range")))?,
                None => a,
            };
            (format!("delta(atom {a})"), SignedMeasure::dirac(space.clone(), atom)?)
        } else if let Some(x) = probe.at {
            let atom = model.nearest(x, k.unwrap_or(0)).ok_or_else(no_grid)?;
            (format!("delta(x={x})"), SignedMeasure::dirac(space.clone(), atom)?)
        } else {
            let g = probe.density.as_ref().ok_or(Error::Precondition("empty measure probe".into()))?;
            let mut v = vec![0.0; space.len()];
            for i in support(model, k) {
                if !space.is_escape(i) {
                    v[i] = g.eval(space.position(i).ok_or_else(no_grid)?);
                }
            }
            let mass: f64 = v.iter().map(|x| x.abs()).sum();
            if !(mass > 0.0) || !mass.is_finite() {
                return Err(Error::Precondition(format!("density {:?} has no finite mass", g.source())));
            }
            v.iter_mut().for_each(|x| *x /= mass);
            (format!("density({})", g.source()), SignedMeasure::new(space.clone(), v)?)
        };
        out.push((format!("{}{label}", prefix(k)), mu));
    }
    Ok(out)
}

fn functions(model: &Model, probe: &FunctionProbe, expand: bool) -> Result<Vec<(String, BoundedFunction)>> {
    let space = model.space().clone();
    let mut out = Vec::new();
    for k in components(model, probe.component, expand)? {
        let mut v = vec![0.0; space.len()];
        let atoms = support(model, k);
        let label = if let Some(c) = probe.constant {
            atoms.iter().for_each(|&i| v[i] = c);
            format!("constant({c})")
        } else if let Some(a) = probe.indicator {
            let atom = *atoms.get(a).ok_or(Error::Precondition(format!("atom {a} out of range")))?;
            v[atom] = 1.0;
            format!("indicator(atom {a})")
        } else {
            let g = probe.expr.as_ref().ok_or(Error::Precondition("empty function probe".into()))?;
            for &i in &atoms {
                v[i] = g.eval(space.position(i).ok_or_else(no_grid)?);
            }
            format!("f({})", g.source())
        };
        out.push((format!("{}{label}", prefix(k)), BoundedFunction::new(space.clone(), v)?));
    }
    Ok(out)
}

/// Sup distance between `v` and `expr` over genuine atoms in the window,
/// after scaling `v` by its least-squares multiple when `fit`.
fn compare(model: &Model, v: &[f64], c: &Compare, fit: bool) -> Result<Value> {
    let space = model.space();
    let mut idx = Vec::new();
    for i in 0..space.len() {
        let x = space.position(i).ok_or_else(no_grid)?;
        if !space.is_escape(i) && x >= c.window[0] && x <= c.window[1] {
            idx.push((i, x));
        }
    }
    if idx.is_empty() {
        return Err(Error::Precondition("comparison window holds no atoms".into()));
    }
    let target: Vec<f64> = idx.iter().map(|&(_, x)| c.expr.eval(x)).collect();
    let scale = if fit {
        let num: f64 = idx.iter().zip(&target).map(|(&(i, _), t)| v[i] * t).sum();
        let den: f64 = idx.iter().map(|&(i, _)| v[i] * v[i]).sum();
        num / den
    } else {
        1.0
    };
    let sup = idx.iter().zip(&target).map(|(&(i, _), t)| (scale * v[i] - t).abs()).fold(0.0, f64::max);
    Ok(json!({ "expr": c.expr.source(), "window": c.window, "scale": scale, "sup_error": sup, "points": idx.len() }))
}

fn window(model: &Model, w: Option<[f64; 2]>) -> Result<CompactWindow> {
    match w {
        Some([lo, hi]) => CompactWindow::interval(model.space().clone(), lo, hi),
        None => Ok(CompactWindow::whole(model.space().clone())),
    }
}

fn matrix_csv(m: &DMatrix<f64>) -> Vec<u8> {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = m.row(i).iter().map(|v| v.to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out.into_bytes()
}

fn lyapunov_v(v: &Expr) -> impl Fn(f64) -> f64 + '_ {
    move |x| v.eval(x)
}

/// Executes step `step` of a plan.
pub fn execute(model: &Model, op: &Operation, step: usize) -> Result<StepOutput> {
    let s = model.semigroup();
    let generator = || s.generator().ok_or(Error::Precondition("operation needs a generator".into()));
    match op {
        Operation::Separation { tol, .. } => Ok(StepOutput::value(to_value(&separation_test(s, *tol)?)?)),
        Operation::Oracle { .. } => Ok(StepOutput::value(to_value(&spectral_oracle(generator()?)?)?)),
        Operation::Project { tol, .. } => {
            let p = limit_projection(s, *tol)?;
            let mut v = to_value(&p)?;
            let name = format!("s{step}_limit.csv");
            insert(&mut v, "limit_file", json!(name));
            Ok(StepOutput { result: v, files: vec![(name, matrix_csv(p.kernel.matrix()))] })
        }
        Operation::Doob { t0, tol, .. } => Ok(StepOutput::value(to_value(&doob_check(s, *t0, *tol)?)?)),
        Operation::Diagnose { horizon, tol, cap, samples, rank_tol, measures: ms, functions: fs, window: w, .. } => {
            let mut labels_m = Vec::new();
            let mut mus = Vec::new();
            for p in ms {
                for (l, m) in measures(model, p, true)? {
                    labels_m.push(l);
                    mus.push(m);
                }
            }
            let mut labels_f = Vec::new();
            let mut fs_ = Vec::new();
            for p in fs {
                for (l, f) in functions(model, p, true)? {
                    labels_f.push(l);
                    fs_.push(f);
                }
            }
            if mus.is_empty() && fs_.is_empty() {
                return Ok(StepOutput::value(json!({ "horizon": horizon, "probes": [], "probe_labels": [] })));
            }
            let opts = DiagnosticsOptions { tol: *tol, cap: *cap, samples: *samples, rank_tol: *rank_tol, ..Default::default() };
            let d = convergence_diagnostics_with(s, &mus, &fs_, &window(model, *w)?, *horizon, &opts)?;
            let labels: Vec<String> = (0..labels_m.len().max(labels_f.len()))
                .map(|i| match (labels_m.get(i), labels_f.get(i)) {
                    (Some(m), Some(f)) => format!("{m} | {f}"),
                    (Some(m), None) => m.clone(),
                    (None, Some(f)) => f.clone(),
                    (None, None) => unreachable!(),
                })
                .collect();
            let mut v = to_value(&d)?;
            insert(&mut v, "probe_labels", json!(labels));
            Ok(StepOutput::value(v))
        }
        Operation::OrbitDecay { measure, times, rate, amplitude, tol, .. } => {
            let p = limit_projection(s, *tol)?;
            let mut curves = Vec::new();
            let mut worst = 0.0_f64;
            for (label, mu) in measures(model, measure, false)? {
                let limit = p.forward(mu.values());
                let mut distances = Vec::new();
                for &t in times {
                    let st = s.act_forward(t, &mu)?;
                    let tv: f64 = st.values().iter().zip(&limit).map(|(a, b)| (a - b).abs()).sum();
                    worst = worst.max((tv - amplitude * (-rate * t).exp()).abs());
                    distances.push(tv);
                }
                curves.push(json!({ "probe": label, "distances": distances }));
            }
            Ok(StepOutput::value(json!({ "times": times, "curves": curves, "max_error": worst })))
        }
        Operation::Boundedness { horizon, samples, .. } => {
            let profile = boundedness_profile(s, *horizon, *samples)?;
            let m = profile.iter().map(|&(_, v)| v).fold(0.0, f64::max);
            Ok(StepOutput::value(json!({ "profile": profile, "bound": m, "contractive": s.is_contractive() })))
        }
        Operation::Leak { at, horizon, samples, .. } => {
            let atom = model.nearest(*at, 0).ok_or_else(no_grid)?;
            let times = dyadic_times(s, *horizon, *samples);
            let leaks = boundary_leak(s, atom, &times)?;
            let max = leaks.iter().copied().fold(0.0, f64::max);
            Ok(StepOutput::value(json!({ "atom": atom, "times": times, "leaks": leaks, "max_leak": max })))
        }
        Operation::GaussianStationary { .. } => {
            let Model::Elliptic { disc, .. } = model else { return Err(no_grid()) };
            let perron = perron_fixed_measure(s)?;
            let mu = perron.measure.as_ref().ok_or(Error::NoFixedMeasure(perron.ratio))?;
            let gauss = gaussian_cell_masses(&disc.positions, disc.h);
            let tv: f64 = mu.iter().zip(&gauss).map(|(a, b)| (a - b).abs()).sum();
            Ok(StepOutput::value(json!({
                "tv_to_gaussian": tv,
                "perron_ratio": perron.ratio,
                "perron_residual": perron.residual,
                "iterations": perron.iterations,
            })))
        }
        Operation::Liouville { tol, compare: c, .. } => {
            let r = liouville_check(generator()?, *tol)?;
            let mut v = json!({ "kernel_dim": r.kernel_dim, "gap": to_value(&r.gap)? });
            if let Some(c) = c {
                let cmp = if r.kernel_dim == 1 { compare(model, &column(&r.kernel_basis, 0), c, true)? } else { Value::Null };
                insert(&mut v, "compare", cmp);
            }
            Ok(StepOutput::value(v))
        }
        Operation::Limit { function, compare: c, tol, .. } => {
            let p = limit_projection(s, *tol)?;
            let (label, f) = functions(model, function, false)?.remove(0);
            let lim = p.backward(f.values());
            Ok(StepOutput::value(json!({ "function": label, "rank": p.rank, "compare": compare(model, &lim, c, false)? })))
        }
        Operation::Lyapunov { certificate, v, .. } => {
            let Model::Elliptic { problem, disc, .. } = model else { return Err(no_grid()) };
            let cert = LyapunovCertificate::on(disc, *certificate, lyapunov_v(v));
            let mut out = to_value(&check_lyapunov(problem, cert)?)?;
            if let Value::Object(m) = &mut out {
                m.remove("values");
            }
            Ok(StepOutput::value(out))
        }
        Operation::Consistency { u, grids, .. } => {
            let Model::Elliptic { problem, disc, .. } = model else { return Err(no_grid()) };
            let grids = if grids.is_empty() { vec![disc.len()] } else { grids.clone() };
            let mut residuals = Vec::new();
            let mut hs = Vec::new();
            for &n in &grids {
                let d = discretize(&problem.clone().with_grid(n))?;
                residuals.push(consistency_residual(&d.generator, &d.sample(|x| u.eval(x)))?);
                hs.push(d.h);
            }
            let orders: Vec<f64> = (1..residuals.len())
                .filter(|&i| residuals[i - 1] > 0.0 && residuals[i] > 0.0)
                .map(|i| (residuals[i - 1] / residuals[i]).ln() / (hs[i - 1] / hs[i]).ln())
                .collect();
            let min_order = orders.iter().copied().reduce(f64::min);
            Ok(StepOutput::value(json!({
                "grids": grids,
                "h": hs,
                "residuals": residuals,
                "orders": orders,
                "min_order": min_order,
                "exact": residuals.iter().all(|&r| r == 0.0),
            })))
        }
        Operation::HeatProbe { truncation, h, samples, .. } => {
            Ok(StepOutput::value(to_value(&heat_probe(*truncation, *h, *samples)?)?))
        }
        Operation::Hypotheses { .. } => {
            let Model::Coupled { problem, .. } = model else { return Err(no_grid()) };
            let r = validate_hypotheses(problem)?;
            let mut v = to_value(&r)?;
            insert(&mut v, "all_pass", json!(r.all_pass()));
            Ok(StepOutput::value(v))
        }
        Operation::InvariantStructure { .. } => {
            let Model::Coupled { problem, .. } = model else { return Err(no_grid()) };
            Ok(StepOutput::value(to_value(&invariant_structure(problem)?)?))
        }
        Operation::RankLaw { .. } => {
            let Model::Coupled { problem, .. } = model else { return Err(no_grid()) };
            Ok(StepOutput::value(to_value(&limit_rank_law(problem)?)?))
        }
        Operation::MatrixLemmas { cases, .. } => {
            let mut reports = Vec::new();
            for c in cases {
                let m = c.matrix.len();
                if c.matrix.iter().any(|r| r.len() != m) {
                    return Err(Error::Dimension("lemma matrices must be square".into()));
                }
                let a = DMatrix::from_fn(m, m, |i, j| c.matrix[i][j]);
                reports.push(matrix_lemmas(&a, c.mode)?);
            }
            let all_equal = reports.iter().all(|r| r.equal);
            Ok(StepOutput::value(json!({ "cases": to_value(&reports)?, "all_equal": all_equal })))
        }
    }
}
