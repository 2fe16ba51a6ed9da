use serde::Serialize;
use statrs::function::erf::erf;

use super::{discretize, laplace, Domain};
use crate::error::{Error, Result};
use crate::measure::l1;
use crate::semigroup::{GeneratorMatrix, Semigroup, Uniformizer};

/// Largest `|(Q u)_i|` over genuine atoms at least `3h` away from the extreme
/// positions, where `h` is the smallest grid spacing.
pub fn consistency_residual(q: &GeneratorMatrix, u: &[f64]) -> Result<f64> {
    let space = q.space();
    if u.len() != q.len() {
        return Err(Error::Dimension(format!("{} values for {} atoms", u.len(), q.len())));
    }
    let mut xs = Vec::with_capacity(q.len());
    for i in 0..q.len() {
        xs.push(space.position(i).ok_or_else(|| Error::InvalidSpace("atoms need positions".into()))?);
    }
    let mut sorted = xs.clone();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let h = sorted.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
    let au = q.apply(u);
    let r = (0..q.len())
        .filter(|&i| !space.is_escape(i) && xs[i] >= lo + 3.0 * h - 1e-12 && xs[i] <= hi - 3.0 * h + 1e-12)
        .map(|i| au[i].abs())
        .fold(0.0, f64::max);
    Ok(r)
}

/// Standard Gaussian mass of the cell `[x − h/2, x + h/2]` around each position.
pub fn gaussian_cell_masses(positions: &[f64], h: f64) -> Vec<f64> {
    let cdf = |x: f64| 0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2));
    positions.iter().map(|&x| cdf(x + h / 2.0) - cdf(x - h / 2.0)).collect()
}

/// Mass lost by the orbit of `δ_atom` at each time, `1 − ‖S_t δ‖`.
pub fn boundary_leak(s: &Semigroup, atom: usize, times: &[f64]) -> Result<Vec<f64>> {
    if atom >= s.len() {
        return Err(Error::Dimension(format!("atom {atom} outside {} atoms", s.len())));
    }
    let mut start = vec![0.0; s.len()];
    start[atom] = 1.0;
    Ok(s.orbit_raw(&start, times, true)?.iter().map(|m| 1.0 - l1(m)).collect())
}

/// Indicator of the annuli `4^k ≤ |x| < 4^{k+1}` with `k ≥ 0` even.
pub fn annuli_indicator(x: f64) -> f64 {
    let r = x.abs();
    if r < 1.0 {
        return 0.0;
    }
    let k = (r.ln() / 4f64.ln()).floor() as i64;
    if k % 2 == 0 {
        1.0
    } else {
        0.0
    }
}

/// Orbit of the annuli indicator under the heat semigroup, read at the origin.
#[derive(Debug, Clone, Serialize)]
pub struct HeatProbe {
    pub truncation: f64,
    pub h: f64,
    pub times: Vec<f64>,
    /// `(T_t f)(0)`.
    pub values: Vec<f64>,
    pub leaks: Vec<f64>,
    /// `max − min` of the values.
    pub amplitude: f64,
    pub max_leak: f64,
    pub window_end: f64,
}

/// Heat equation on `[−L, L]` with absorbing ends, sampled at geometric times
/// in `[1/2, L²/64]`, where the absorbed mass stays negligible.
pub fn heat_probe(truncation: f64, h_target: f64, samples: usize) -> Result<HeatProbe> {
    if samples < 2 || !(h_target > 0.0) || !(truncation > 0.0) {
        return Err(Error::Precondition("heat probe needs L > 0, h > 0 and two samples".into()));
    }
    let n = ((2.0 * truncation / h_target).round() as usize).saturating_sub(1);
    let d = discretize(&laplace(Domain::WholeLine, truncation, n))?;
    let window_end = truncation * truncation / 64.0;
    let t0 = 0.5_f64.min(window_end / 2.0);
    let ratio = (window_end / t0).powf(1.0 / (samples - 1) as f64);
    let times: Vec<f64> = (0..samples).map(|k| if k + 1 == samples { window_end } else { t0 * ratio.powi(k as i32) }).collect();
    let f = d.sample(annuli_indicator);
    let origin = d.nearest(0.0);
    let u = Uniformizer::new(&d.generator, true);
    let mut mu = vec![0.0; d.len()];
    mu[origin] = 1.0;
    let (mut values, mut leaks) = (Vec::new(), Vec::new());
    let mut last = 0.0;
    for &t in &times {
        mu = u.apply(t - last, &mu);
        last = t;
        values.push(mu.iter().zip(&f).map(|(m, g)| m * g).sum());
        leaks.push(1.0 - l1(&mu));
    }
    let amplitude = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max_leak = leaks.iter().cloned().fold(0.0, f64::max);
    Ok(HeatProbe { truncation, h: d.h, times, values, leaks, amplitude, max_leak, window_end })
}
