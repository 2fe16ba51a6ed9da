use nalgebra::DMatrix;
use serde::Serialize;

use super::{fixed_space, require_positive_bounded, separation_from_bases, SeparationReport, Side};
use crate::error::{Error, Result};
use crate::kernel::{backward_values, forward_values, Kernel};
use crate::measure::{linf, SignedMeasure};
use crate::semigroup::{Semigroup, DENSE_ACTION_LIMIT};

/// Distance `M(S_t − P)` at which the dyadic cross-check stops.
const CROSS_CHECK_TOL: f64 = 1e-8;
/// Largest time tried by the cross-check.
const CROSS_CHECK_CAP: f64 = 1048576.0;

/// Limit of `S_t` (on measures) and `T_t` (on functions) as `t → ∞`.
///
/// Both limits are read from one kernel `P`: its forward action is the limit
/// on measures and its backward action the limit on functions.
#[derive(Debug, Clone, Serialize)]
pub struct ErgodicProjection {
    #[serde(skip)]
    pub kernel: Kernel,
    pub rank: usize,
    /// `M(S_t − P)` at the last cross-check time (sampled on probes for large spaces).
    pub residual: f64,
    pub residual_time: f64,
    /// Smallest singular value of the fixed-space pairing `WᵀV`.
    pub pairing_sigma_min: f64,
    pub idempotency_defect: f64,
    pub min_entry: f64,
    pub separation: SeparationReport,
}

impl ErgodicProjection {
    /// Limit operator on measures.
    pub fn p_forward(&self) -> &Kernel {
        &self.kernel
    }

    /// Limit operator on functions.
    pub fn q_backward(&self) -> &Kernel {
        &self.kernel
    }

    pub fn forward(&self, mu: &[f64]) -> Vec<f64> {
        forward_values(self.kernel.matrix(), mu)
    }

    pub fn backward(&self, f: &[f64]) -> Vec<f64> {
        backward_values(self.kernel.matrix(), f)
    }
}

/// Spectral projection onto `ker Qᵀ` along `range Qᵀ` (equivalently onto
/// `ker Q` on the function side), cross-checked against `S_t` at dyadic times.
pub fn limit_projection(s: &Semigroup, tol: f64) -> Result<ErgodicProjection> {
    require_positive_bounded(s)?;
    let fm = fixed_space(s, Side::Measures, tol)?;
    let ff = fixed_space(s, Side::Functions, tol)?;
    let separation = separation_from_bases(s, &fm, &ff, tol)?;
    let n = s.len();
    let (w, v) = (&fm.vectors, &ff.vectors);
    let d = ff.dimension;
    let mut sigma_min = f64::INFINITY;
    let p = if fm.dimension == d && d > 0 {
        let m = w.transpose() * v;
        let sv = m.clone().svd(false, false).singular_values;
        sigma_min = sv.iter().fold(f64::INFINITY, |a, &x| a.min(x));
        if sigma_min <= tol {
            return Err(Error::DefectiveGenerator(sigma_min));
        }
        if separation.predicted_convergence != Some(true) {
            return Err(Error::ConvergenceNotPredicted);
        }
        let inv = m.try_inverse().ok_or(Error::DefectiveGenerator(sigma_min))?;
        v * inv * w.transpose()
    } else {
        if separation.predicted_convergence != Some(true) {
            return Err(Error::ConvergenceNotPredicted);
        }
        DMatrix::zeros(n, n)
    };
    let idempotency_defect = (&p * &p - &p).amax();
    let min_entry = p.min();
    let kernel = Kernel::new(s.space().clone(), p)?;
    let (residual, residual_time) = cross_check(s, &kernel)?;
    Ok(ErgodicProjection {
        kernel,
        rank: d,
        residual,
        residual_time,
        pairing_sigma_min: sigma_min,
        idempotency_defect,
        min_entry,
        separation,
    })
}

fn cross_check(s: &Semigroup, p: &Kernel) -> Result<(f64, f64)> {
    let n = s.len();
    let mut t = 1.0;
    let mut last = f64::INFINITY;
    if n <= DENSE_ACTION_LIMIT {
        while t <= CROSS_CHECK_CAP {
            let k = s.evaluate(t)?;
            last = crate::kernel::row_abs_sums(&(k.matrix() - p.matrix())).into_iter().fold(0.0, f64::max);
            if last <= CROSS_CHECK_TOL {
                break;
            }
            t *= 2.0;
        }
    } else {
        // Probe functions: the constant, a ramp and an alternating sign pattern.
        let probes: Vec<Vec<f64>> = vec![
            vec![1.0; n],
            (0..n).map(|i| i as f64 / n as f64).collect(),
            (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect(),
        ];
        let limits: Vec<Vec<f64>> = probes.iter().map(|f| backward_values(p.matrix(), f)).collect();
        let mut state = probes.clone();
        let mut prev = 0.0;
        while t <= CROSS_CHECK_CAP.min(4096.0) {
            last = 0.0;
            for (st, lim) in state.iter_mut().zip(&limits) {
                *st = s.backward_raw(t - prev, st)?;
                let diff: Vec<f64> = st.iter().zip(lim).map(|(a, b)| a - b).collect();
                last = last.max(linf(&diff));
            }
            prev = t;
            if last <= CROSS_CHECK_TOL {
                break;
            }
            t *= 2.0;
        }
        t = prev;
    }
    Ok((last, t.min(CROSS_CHECK_CAP)))
}

/// `lim_t S_t|x|` for a fixed measure `x`: a non-negative fixed measure that
/// dominates `|x|`.
pub fn dominating_fixed_measure(proj: &ErgodicProjection, x: &SignedMeasure) -> Result<SignedMeasure> {
    let abs: Vec<f64> = x.values().iter().map(|v| v.abs()).collect();
    SignedMeasure::new(x.space().clone(), proj.forward(&abs))
}
