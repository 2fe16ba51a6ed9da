use serde::Serialize;

use super::{limit_projection, ErgodicProjection, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::kernel::forward_values;
use crate::measure::{ensure_same, l1, window_max, BoundedFunction, CompactWindow, SignedMeasure};
use crate::semigroup::{Semigroup, DENSE_ACTION_LIMIT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Converged,
    Oscillating,
    Undecided,
}

/// What the reported distances are measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Reference {
    /// The limit projection.
    Projection,
    /// The previous dyadic sample.
    Successive,
    /// The state one step later (discrete time).
    Lag,
}

#[derive(Debug, Clone, Copy)]
pub struct DiagnosticsOptions {
    pub tol: f64,
    /// Hard cap on the horizon.
    pub cap: f64,
    /// Dyadic samples below the initial horizon.
    pub samples: usize,
    pub rank_tol: f64,
    /// Trailing window of consecutive steps inspected in discrete time.
    pub discrete_window: usize,
}

impl Default for DiagnosticsOptions {
    fn default() -> Self {
        DiagnosticsOptions { tol: 1e-6, cap: 1048576.0, samples: 8, rank_tol: DEFAULT_TOL, discrete_window: 32 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbePoint {
    pub t: f64,
    pub tv_distance: Option<f64>,
    pub window_seminorm: Option<f64>,
    pub leak_mass: Option<f64>,
}

/// Time series for probe pair `index`: measure probe `index` supplies the TV
/// distance and leak, function probe `index` the window seminorm.
#[derive(Debug, Clone, Serialize)]
pub struct ProbeSeries {
    pub index: usize,
    pub points: Vec<ProbePoint>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceDiagnostics {
    pub verdict: Verdict,
    pub period: Option<usize>,
    pub reference: Reference,
    pub horizon: f64,
    pub limit_rank: Option<usize>,
    pub tolerance: f64,
    /// `(t, max over probes of the distance)`.
    pub distances: Vec<(f64, f64)>,
    pub probes: Vec<ProbeSeries>,
}

pub fn convergence_diagnostics(
    s: &Semigroup,
    measures: &[SignedMeasure],
    functions: &[BoundedFunction],
    window: &CompactWindow,
    horizon: f64,
) -> Result<ConvergenceDiagnostics> {
    convergence_diagnostics_with(s, measures, functions, window, horizon, &DiagnosticsOptions::default())
}

struct Probes<'a> {
    measures: Vec<&'a [f64]>,
    masses: Vec<Option<f64>>,
    functions: Vec<&'a [f64]>,
    window: &'a CompactWindow,
}

impl Probes<'_> {
    fn count(&self) -> usize {
        self.measures.len().max(self.functions.len())
    }

    /// Distance of a state pair `(measures, functions)` to a reference pair.
    fn point(&self, t: f64, state: &State, reference: Option<&State>) -> (Vec<ProbePoint>, f64) {
        let mut worst = 0.0_f64;
        let mut points = Vec::with_capacity(self.count());
        for i in 0..self.count() {
            let tv = reference.and_then(|r| state.measures.get(i).map(|m| l1(&diff(m, &r.measures[i]))));
            let win = reference
                .and_then(|r| state.functions.get(i).map(|f| window_max(&diff(f, &r.functions[i]), self.window)));
            let leak = state.measures.get(i).and_then(|m| self.masses[i].map(|m0| 1.0 - l1(m) / m0));
            for d in [tv, win].into_iter().flatten() {
                worst = worst.max(d);
            }
            points.push(ProbePoint { t, tv_distance: tv, window_seminorm: win, leak_mass: leak });
        }
        (points, worst)
    }
}

#[derive(Clone)]
struct State {
    measures: Vec<Vec<f64>>,
    functions: Vec<Vec<f64>>,
}

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// TV distances of measure probes and window seminorms of function probes
/// along the orbit, with a convergence verdict.
///
/// Continuous time samples dyadic times `horizon/2^j` and keeps doubling the
/// horizon up to `opts.cap`. Distances are taken to the limit projection when
/// one exists, otherwise between successive samples. The verdict is
/// `converged` once the last three distances are below `opts.tol` and do not
/// grow by more than 2×.
///
/// Discrete time inspects a trailing window of consecutive steps after the
/// horizon: lag-1 distances below tolerance give `converged`; otherwise the
/// smallest lag `p ≥ 2` whose distances vanish is reported as the period.
pub fn convergence_diagnostics_with(
    s: &Semigroup,
    measures: &[SignedMeasure],
    functions: &[BoundedFunction],
    window: &CompactWindow,
    horizon: f64,
    opts: &DiagnosticsOptions,
) -> Result<ConvergenceDiagnostics> {
    if measures.is_empty() && functions.is_empty() {
        return Err(Error::Precondition("diagnostics need at least one probe".into()));
    }
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidTime(horizon, "horizon must be positive and finite"));
    }
    for m in measures {
        ensure_same(s.space(), m.space(), "diagnostics probe")?;
    }
    for f in functions {
        ensure_same(s.space(), f.space(), "diagnostics probe")?;
    }
    ensure_same(s.space(), window.space(), "diagnostics window")?;
    let probes = Probes {
        measures: measures.iter().map(|m| m.values()).collect(),
        masses: measures
            .iter()
            .map(|m| if m.is_nonnegative() && m.total_mass() > 0.0 { Some(m.total_mass()) } else { None })
            .collect(),
        functions: functions.iter().map(|f| f.values()).collect(),
        window,
    };
    if s.is_discrete() {
        discrete(s, &probes, horizon, opts)
    } else {
        continuous(s, &probes, horizon, opts)
    }
}

fn advance_state(s: &Semigroup, state: &State, dt: f64) -> Result<State> {
    Ok(State {
        measures: state.measures.iter().map(|m| s.forward_raw(dt, m)).collect::<Result<_>>()?,
        functions: state.functions.iter().map(|f| s.backward_raw(dt, f)).collect::<Result<_>>()?,
    })
}

fn advance(s: &Semigroup, probes: &Probes, t: f64) -> Result<State> {
    Ok(State {
        measures: probes.measures.iter().map(|m| s.forward_raw(t, m)).collect::<Result<_>>()?,
        functions: probes.functions.iter().map(|f| s.backward_raw(t, f)).collect::<Result<_>>()?,
    })
}

fn continuous(s: &Semigroup, probes: &Probes, horizon: f64, opts: &DiagnosticsOptions) -> Result<ConvergenceDiagnostics> {
    let proj: Option<ErgodicProjection> =
        if s.len() <= DENSE_ACTION_LIMIT { limit_projection(s, opts.rank_tol).ok() } else { None };
    let limit = proj.as_ref().map(|p| State {
        measures: probes.measures.iter().map(|m| p.forward(m)).collect(),
        functions: probes.functions.iter().map(|f| p.backward(f)).collect(),
    });
    let reference = if limit.is_some() { Reference::Projection } else { Reference::Successive };
    let mut times: Vec<f64> = (0..opts.samples.max(1)).rev().map(|j| horizon / 2f64.powi(j as i32)).collect();
    let mut series: Vec<ProbeSeries> = (0..probes.count()).map(|index| ProbeSeries { index, points: Vec::new() }).collect();
    let mut distances = Vec::new();
    let mut prev: Option<State> = None;
    let mut h = horizon;
    let mut k = 0;
    let verdict = loop {
        while k < times.len() {
            let t = times[k];
            // Dyadic steps advance by the previous sample time, whose kernel is cached.
            let state = match &prev {
                Some(p) => advance_state(s, p, t - times[k - 1])?,
                None => advance(s, probes, t)?,
            };
            let r = limit.as_ref().or(prev.as_ref());
            let (points, worst) = probes.point(t, &state, r);
            for (ser, p) in series.iter_mut().zip(points) {
                ser.points.push(p);
            }
            if r.is_some() {
                distances.push((t, worst));
            }
            prev = Some(state);
            k += 1;
        }
        if converged(&distances, opts.tol) {
            break Verdict::Converged;
        }
        if h * 2.0 > opts.cap {
            break Verdict::Undecided;
        }
        h *= 2.0;
        times.push(h);
    };
    Ok(ConvergenceDiagnostics {
        verdict,
        period: None,
        reference,
        horizon: h,
        limit_rank: proj.map(|p| p.rank),
        tolerance: opts.tol,
        distances,
        probes: series,
    })
}

fn converged(d: &[(f64, f64)], tol: f64) -> bool {
    if d.len() < 3 {
        return false;
    }
    let last = &d[d.len() - 3..];
    let noise = 1e-12;
    last.iter().all(|&(_, x)| x <= tol) && last.windows(2).all(|w| w[1].1 <= 2.0 * w[0].1 + noise)
}

fn discrete(s: &Semigroup, probes: &Probes, horizon: f64, opts: &DiagnosticsOptions) -> Result<ConvergenceDiagnostics> {
    let step = s.step_kernel().expect("discrete semigroup").matrix().clone();
    let len = opts.discrete_window.max(4);
    let mut h = horizon.round().max(1.0);
    loop {
        // States at h, h+1, …, h+len.
        let mut states = vec![advance(s, probes, h)?];
        for _ in 0..len {
            let last = states.last().unwrap();
            states.push(State {
                measures: last.measures.iter().map(|m| forward_values(&step, m)).collect(),
                functions: last.functions.iter().map(|f| crate::kernel::backward_values(&step, f)).collect(),
            });
        }
        let lag = |p: usize| -> f64 {
            (0..=len - p).map(|i| probes.point(0.0, &states[i + p], Some(&states[i])).1).fold(0.0, f64::max)
        };
        let (verdict, period) = if lag(1) <= opts.tol {
            (Some(Verdict::Converged), None)
        } else {
            match (2..=len / 2).find(|&p| lag(p) <= opts.tol) {
                Some(p) => (Some(Verdict::Oscillating), Some(p)),
                None => (None, None),
            }
        };
        let done = verdict.is_some() || h * 2.0 > opts.cap;
        if done {
            let mut series: Vec<ProbeSeries> =
                (0..probes.count()).map(|index| ProbeSeries { index, points: Vec::new() }).collect();
            let mut distances = Vec::new();
            for i in 0..len {
                let t = h + i as f64;
                let (points, worst) = probes.point(t, &states[i + 1], Some(&states[i]));
                for (ser, p) in series.iter_mut().zip(points) {
                    ser.points.push(p);
                }
                distances.push((t, worst));
            }
            return Ok(ConvergenceDiagnostics {
                verdict: verdict.unwrap_or(Verdict::Undecided),
                period,
                reference: Reference::Lag,
                horizon: h,
                limit_rank: None,
                tolerance: opts.tol,
                distances,
                probes: series,
            });
        }
        h *= 2.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asymptotics::tests::swap_minus_identity;
    use crate::kernel::Kernel;
    use crate::measure::StateSpace;
    use crate::semigroup::GeneratorMatrix;
    use std::sync::Arc;

    #[test]
    fn discrete_swap_oscillates_with_period_two() {
        let sp = Arc::new(StateSpace::indexed(2).unwrap());
        let s = Semigroup::discrete(Kernel::from_rows(sp.clone(), &[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap());
        let d = convergence_diagnostics(
            &s,
            &[SignedMeasure::dirac(sp.clone(), 0).unwrap()],
            &[],
            &CompactWindow::whole(sp),
            16.0,
        )
        .unwrap();
        assert_eq!(d.verdict, Verdict::Oscillating);
        assert_eq!(d.period, Some(2));
        assert!(d.probes[0].points.iter().all(|p| p.tv_distance == Some(2.0)));
    }

    #[test]
    fn continuous_swap_converges_with_exponential_error() {
        let s = swap_minus_identity();
        let sp = s.space().clone();
        let f = BoundedFunction::new(sp.clone(), vec![1.0, -1.0]).unwrap();
        let d = convergence_diagnostics(
            &s,
            &[SignedMeasure::dirac(sp.clone(), 0).unwrap()],
            &[f],
            &CompactWindow::whole(sp),
            4.0,
        )
        .unwrap();
        assert_eq!(d.verdict, Verdict::Converged);
        assert_eq!(d.reference, Reference::Projection);
        for p in &d.probes[0].points {
            let e = (-2.0 * p.t).exp();
            assert!((p.tv_distance.unwrap() - e).abs() < 1e-12);
            assert!((p.window_seminorm.unwrap() - e).abs() < 1e-12);
            assert!(p.leak_mass.unwrap().abs() < 1e-14);
        }
    }

    #[test]
    fn killed_chain_converges_to_zero() {
        let sp = Arc::new(StateSpace::indexed(2).unwrap());
        let q = GeneratorMatrix::from_rows(sp.clone(), &[vec![-2.0, 1.0], vec![0.5, -1.0]]).unwrap();
        let s = Semigroup::continuous(q);
        let d = convergence_diagnostics(
            &s,
            &[SignedMeasure::dirac(sp.clone(), 1).unwrap()],
            &[BoundedFunction::constant(sp.clone(), 1.0)],
            &CompactWindow::whole(sp),
            8.0,
        )
        .unwrap();
        assert_eq!(d.verdict, Verdict::Converged);
        assert_eq!(d.limit_rank, Some(0));
        assert!(d.probes[0].points.last().unwrap().leak_mass.unwrap() > 0.99);
    }

    #[test]
    fn empty_probes_rejected() {
        let s = swap_minus_identity();
        assert!(convergence_diagnostics(&s, &[], &[], &CompactWindow::whole(s.space().clone()), 1.0).is_err());
    }
}
