//! One-parameter semigroups of kernels: `e^{tQ}` for a generator `Q`, or
//! integer powers of a step kernel.

mod expm;
mod generator;
mod uniformize;

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::{backward_values, forward_values, Kernel};
use crate::measure::{ensure_same, BoundedFunction, SignedMeasure, StateSpace};

pub use expm::{expm, expm_scaled};
pub use generator::GeneratorMatrix;
pub use uniformize::Uniformizer;

/// Above this size single-vector actions of a continuous semigroup avoid
/// forming `e^{tQ}` when `Q` is Metzler.
pub const DENSE_ACTION_LIMIT: usize = 1200;

#[derive(Debug, Clone)]
pub enum TimeStructure {
    Continuous(GeneratorMatrix),
    Discrete(Kernel),
}

#[derive(Debug)]
pub struct Semigroup {
    structure: TimeStructure,
    dense: OnceLock<DMatrix<f64>>,
    on_functions: OnceLock<Uniformizer>,
    on_measures: OnceLock<Uniformizer>,
    cache: Mutex<HashMap<u64, Arc<Kernel>>>,
}

impl Clone for Semigroup {
    fn clone(&self) -> Self {
        Semigroup::new(self.structure.clone())
    }
}

impl Semigroup {
    pub fn new(structure: TimeStructure) -> Self {
        Semigroup {
            structure,
            dense: OnceLock::new(),
            on_functions: OnceLock::new(),
            on_measures: OnceLock::new(),
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn continuous(q: GeneratorMatrix) -> Self {
        Self::new(TimeStructure::Continuous(q))
    }

    pub fn discrete(step: Kernel) -> Self {
        Self::new(TimeStructure::Discrete(step))
    }

    pub fn time_structure(&self) -> &TimeStructure {
        &self.structure
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self.structure, TimeStructure::Discrete(_))
    }

    pub fn generator(&self) -> Option<&GeneratorMatrix> {
        match &self.structure {
            TimeStructure::Continuous(q) => Some(q),
            TimeStructure::Discrete(_) => None,
        }
    }

    pub fn step_kernel(&self) -> Option<&Kernel> {
        match &self.structure {
            TimeStructure::Discrete(k) => Some(k),
            TimeStructure::Continuous(_) => None,
        }
    }

    pub fn space(&self) -> &Arc<StateSpace> {
        match &self.structure {
            TimeStructure::Continuous(q) => q.space(),
            TimeStructure::Discrete(k) => k.space(),
        }
    }

    pub fn len(&self) -> usize {
        self.space().len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Every `S_t` is a positive operator.
    pub fn is_positive(&self) -> bool {
        match &self.structure {
            TimeStructure::Continuous(q) => q.is_metzler(),
            TimeStructure::Discrete(k) => k.is_positive(),
        }
    }

    /// Every `T_t` is a sup-norm contraction.
    pub fn is_contractive(&self) -> bool {
        match &self.structure {
            TimeStructure::Continuous(q) => q.is_metzler() && q.is_substochastic(),
            TimeStructure::Discrete(k) => k.bound() <= 1.0 + 1e-12,
        }
    }

    /// Dense matrix of the generator, or of `K − I` in discrete time.
    pub fn dense_generator(&self) -> &DMatrix<f64> {
        self.dense.get_or_init(|| match &self.structure {
            TimeStructure::Continuous(q) => q.to_dense(),
            TimeStructure::Discrete(k) => {
                let n = k.len();
                k.matrix() - DMatrix::identity(n, n)
            }
        })
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !t.is_finite() || t <= 0.0 {
            return Err(Error::InvalidTime(t, "time must be positive and finite"));
        }
        if self.is_discrete() && t.fract() != 0.0 {
            return Err(Error::InvalidTime(t, "discrete semigroups take integer times"));
        }
        Ok(())
    }

    fn cached(&self, t: f64) -> Option<Arc<Kernel>> {
        self.cache.lock().expect("cache lock").get(&t.to_bits()).cloned()
    }

    fn store(&self, t: f64, k: Kernel) -> Arc<Kernel> {
        let k = Arc::new(k);
        self.cache.lock().expect("cache lock").entry(t.to_bits()).or_insert(k).clone()
    }

    /// Kernel of `S_t`. Results are cached under the exact bits of `t`; when
    /// `t/2` is cached the result is its square.
    pub fn evaluate(&self, t: f64) -> Result<Arc<Kernel>> {
        self.check_time(t)?;
        if let Some(k) = self.cached(t) {
            return Ok(k);
        }
        let space = self.space().clone();
        let m = match &self.structure {
            TimeStructure::Continuous(_) => match self.cached(t / 2.0) {
                Some(half) => half.matrix() * half.matrix(),
                None => expm_scaled(self.dense_generator(), t)?,
            },
            TimeStructure::Discrete(step) => {
                let p = t as u64;
                if p.is_multiple_of(2) && self.cached(t / 2.0).is_some() {
                    let half = self.cached(t / 2.0).unwrap();
                    half.matrix() * half.matrix()
                } else if let Some(prev) = if p > 1 { self.cached(t - 1.0) } else { None } {
                    prev.matrix() * step.matrix()
                } else {
                    matrix_power(step.matrix(), p)
                }
            }
        };
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("kernel at t = {t} is not finite")));
        }
        Ok(self.store(t, Kernel::new(space, m)?))
    }

    /// Evaluates several times in parallel.
    pub fn evaluate_many(&self, times: &[f64]) -> Result<Vec<Arc<Kernel>>> {
        times.par_iter().map(|&t| self.evaluate(t)).collect()
    }

    pub fn cached_times(&self) -> Vec<f64> {
        let mut ts: Vec<f64> = self.cache.lock().expect("cache lock").keys().map(|&b| f64::from_bits(b)).collect();
        ts.sort_by(f64::total_cmp);
        ts
    }

    pub fn clear_cache(&self) {
        self.cache.lock().expect("cache lock").clear();
    }

    fn uniformizer(&self, measures: bool) -> Option<&Uniformizer> {
        let q = self.generator()?;
        if self.len() <= DENSE_ACTION_LIMIT || !q.is_metzler() {
            return None;
        }
        let cell = if measures { &self.on_measures } else { &self.on_functions };
        Some(cell.get_or_init(|| Uniformizer::new(q, measures)))
    }

    /// `S_t μ` as raw values.
    pub(crate) fn forward_raw(&self, t: f64, mu: &[f64]) -> Result<Vec<f64>> {
        self.check_time(t)?;
        if self.cached(t).is_none() {
            if let Some(u) = self.uniformizer(true) {
                return Ok(u.apply(t, mu));
            }
        }
        Ok(forward_values(self.evaluate(t)?.matrix(), mu))
    }

    /// `T_t f` as raw values.
    pub(crate) fn backward_raw(&self, t: f64, f: &[f64]) -> Result<Vec<f64>> {
        self.check_time(t)?;
        if self.cached(t).is_none() {
            if let Some(u) = self.uniformizer(false) {
                return Ok(u.apply(t, f));
            }
        }
        Ok(backward_values(self.evaluate(t)?.matrix(), f))
    }

    /// `S_t μ`.
    pub fn act_forward(&self, t: f64, mu: &SignedMeasure) -> Result<SignedMeasure> {
        ensure_same(self.space(), mu.space(), "semigroup and measure")?;
        SignedMeasure::new(self.space().clone(), self.forward_raw(t, mu.values())?)
    }

    /// `T_t f`.
    pub fn act_backward(&self, t: f64, f: &BoundedFunction) -> Result<BoundedFunction> {
        ensure_same(self.space(), f.space(), "semigroup and function")?;
        BoundedFunction::new(self.space().clone(), self.backward_raw(t, f.values())?)
    }

    /// Orbit of raw values at increasing times. Large Metzler generators step
    /// from one sample to the next instead of evaluating kernels.
    pub(crate) fn orbit_raw(&self, start: &[f64], times: &[f64], measures: bool) -> Result<Vec<Vec<f64>>> {
        check_increasing(times)?;
        for &t in times {
            self.check_time(t)?;
        }
        if let Some(u) = self.uniformizer(measures) {
            let mut out = Vec::with_capacity(times.len());
            let mut cur = start.to_vec();
            let mut last = 0.0;
            for &t in times {
                cur = u.apply(t - last, &cur);
                last = t;
                out.push(cur.clone());
            }
            return Ok(out);
        }
        times
            .iter()
            .map(|&t| if measures { self.forward_raw(t, start) } else { self.backward_raw(t, start) })
            .collect()
    }
}

fn check_increasing(times: &[f64]) -> Result<()> {
    for w in times.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::InvalidTime(w[1], "sample times must be strictly increasing"));
        }
    }
    Ok(())
}

fn matrix_power(step: &DMatrix<f64>, mut p: u64) -> DMatrix<f64> {
    let n = step.nrows();
    let mut result = DMatrix::identity(n, n);
    let mut base = step.clone();
    let mut first = true;
    while p > 0 {
        if p & 1 == 1 {
            result = if first { base.clone() } else { &result * &base };
            first = false;
        }
        p >>= 1;
        if p > 0 {
            base = &base * &base;
        }
    }
    result
}

/// Kernel of `S_t`.
pub fn evaluate(s: &Semigroup, t: f64) -> Result<Arc<Kernel>> {
    s.evaluate(t)
}

/// `(S_t μ0)` at each sampled time.
pub fn trajectory_forward(s: &Semigroup, mu0: &SignedMeasure, times: &[f64]) -> Result<Vec<SignedMeasure>> {
    ensure_same(s.space(), mu0.space(), "semigroup and measure")?;
    s.orbit_raw(mu0.values(), times, true)?
        .into_iter()
        .map(|v| SignedMeasure::new(s.space().clone(), v))
        .collect()
}

/// `(T_t f0)` at each sampled time.
pub fn trajectory_backward(s: &Semigroup, f0: &BoundedFunction, times: &[f64]) -> Result<Vec<BoundedFunction>> {
    ensure_same(s.space(), f0.space(), "semigroup and function")?;
    s.orbit_raw(f0.values(), times, false)?
        .into_iter()
        .map(|v| BoundedFunction::new(s.space().clone(), v))
        .collect()
}

/// Dyadic sample times `horizon / 2^j` in `(0, horizon]`, ascending; integers
/// (deduplicated, at least 1) in discrete time.
pub fn dyadic_times(s: &Semigroup, horizon: f64, samples: usize) -> Vec<f64> {
    let mut ts: Vec<f64> = (0..samples).rev().map(|j| horizon / 2f64.powi(j as i32)).collect();
    if s.is_discrete() {
        ts = ts.into_iter().map(|t| t.round().max(1.0)).collect();
        ts.dedup();
    }
    ts
}

/// `(t, M(S_t))` at dyadic times in `(0, horizon]`.
pub fn boundedness_profile(s: &Semigroup, horizon: f64, samples: usize) -> Result<Vec<(f64, f64)>> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidTime(horizon, "horizon must be positive and finite"));
    }
    if samples < 2 {
        return Err(Error::Precondition("at least two samples are required".into()));
    }
    // Ascending order lets each continuous sample square the previous one.
    dyadic_times(s, horizon, samples)
        .into_iter()
        .map(|t| Ok((t, s.evaluate(t)?.bound())))
        .collect()
}

/// Largest `M(S_t)` over dyadic times in `(0, horizon]`.
pub fn boundedness_report(s: &Semigroup, horizon: f64, samples: usize) -> Result<f64> {
    let m = boundedness_profile(s, horizon, samples)?.into_iter().map(|(_, m)| m).fold(0.0, f64::max);
    if let Some(q) = s.generator() {
        if q.is_metzler() && q.is_substochastic() && m > 1.0 + 1e-10 {
            return Err(Error::Numerical(format!("contraction semigroup reported bound {m}")));
        }
    }
    Ok(m)
}
