use nalgebra::DMatrix;
use serde::Serialize;

use super::{fixed_space, Side};
use crate::error::Result;
use crate::kernel::{abs_continuous_rows, forward_values, rows_mutually_equivalent};
use crate::measure::{l1, SignedMeasure};
use crate::semigroup::{Semigroup, DENSE_ACTION_LIMIT};

const RESIDUAL: f64 = 1e-12;
const ITERATIONS_PER_TAU: usize = 64;
const MAX_DOUBLINGS: usize = 30;
/// Largest step used with matrix-free actions.
const MAX_SPARSE_TAU: f64 = 64.0;
/// Ratio below which the iteration is taken to decay rather than settle.
const RATIO_FLOOR: f64 = 1.0 - 1e-9;

#[derive(Debug, Clone, Serialize)]
pub struct PerronResult {
    /// Probability vector fixed by the semigroup, when one exists.
    pub measure: Option<Vec<f64>>,
    /// Growth `‖E x‖₁ / ‖x‖₁` of the last iterate.
    pub ratio: f64,
    pub residual: f64,
    /// Time step of the final iteration operator.
    pub tau: f64,
    pub iterations: usize,
}

/// Non-negative fixed measure by power iteration of `e^{τQᵀ}` from the
/// uniform measure (lazy chain `(I + K)/2` in discrete time), doubling `τ`
/// when progress stalls.
pub fn perron_fixed_measure(s: &Semigroup) -> Result<PerronResult> {
    let n = s.len();
    let mut x = vec![1.0 / n as f64; n];
    let mut tau = 1.0;
    let mut iterations = 0;
    let mut ratio = 0.0;
    let mut residual = f64::INFINITY;
    let mut lazy: Option<DMatrix<f64>> = s.step_kernel().map(|k| (k.matrix() + DMatrix::identity(n, n)) * 0.5);
    'outer: for _ in 0..=MAX_DOUBLINGS {
        for _ in 0..ITERATIONS_PER_TAU {
            let y = match (&lazy, s.len() <= DENSE_ACTION_LIMIT) {
                (Some(l), _) => forward_values(l, &x),
                (None, true) => forward_values(s.evaluate(tau)?.matrix(), &x),
                (None, false) => s.forward_raw(tau, &x)?,
            };
            iterations += 1;
            let y: Vec<f64> = y.into_iter().map(|v| v.max(0.0)).collect();
            ratio = l1(&y);
            if ratio == 0.0 || !ratio.is_finite() {
                break 'outer;
            }
            let y: Vec<f64> = y.into_iter().map(|v| v / ratio).collect();
            residual = l1(&y.iter().zip(&x).map(|(a, b)| a - b).collect::<Vec<_>>());
            x = y;
            if residual <= RESIDUAL {
                break 'outer;
            }
        }
        if lazy.is_none() && n > DENSE_ACTION_LIMIT && tau >= MAX_SPARSE_TAU {
            break;
        }
        tau *= 2.0;
        if let Some(l) = lazy.as_mut() {
            *l = &*l * &*l;
        }
    }
    let exists = ratio >= RATIO_FLOOR && ratio.is_finite();
    Ok(PerronResult { measure: exists.then_some(x), ratio, residual, tau, iterations })
}

#[derive(Debug, Clone, Serialize)]
pub struct DoobReport {
    pub invariant_measure: Option<Vec<f64>>,
    pub perron_ratio: f64,
    pub rows_dominated: bool,
    pub rows_equivalent: bool,
    pub fix_dimension: usize,
    pub rank_one_predicted: bool,
    /// Rows of `S_{t0}` dominated by a non-zero invariant measure; never set
    /// in discrete time.
    pub convergence_predicted: bool,
    /// Discrete time: the domination hypothesis may hold without any
    /// convergence conclusion.
    pub discrete_time_inapplicable: bool,
    pub t0: f64,
}

impl DoobReport {
    pub fn invariant(&self, s: &Semigroup) -> Option<SignedMeasure> {
        self.invariant_measure.as_ref().map(|v| SignedMeasure::new(s.space().clone(), v.clone()).expect("same space"))
    }
}

/// Checks whether the rows of `S_{t0}` are dominated by an invariant measure
/// and whether they are mutually equivalent.
pub fn doob_check(s: &Semigroup, t0: f64, tol: f64) -> Result<DoobReport> {
    let k = s.evaluate(t0)?;
    let perron = perron_fixed_measure(s)?;
    let mu = perron.measure.as_ref().map(|v| SignedMeasure::new(s.space().clone(), v.clone())).transpose()?;
    let rows_dominated = match &mu {
        Some(m) => abs_continuous_rows(&k, m)?,
        None => false,
    };
    let rows_equivalent = rows_mutually_equivalent(&k)?;
    let fix_dimension = fixed_space(s, Side::Measures, tol)?.dimension;
    let discrete = s.is_discrete();
    let nonzero = mu.is_some();
    Ok(DoobReport {
        invariant_measure: perron.measure.clone(),
        perron_ratio: perron.ratio,
        rows_dominated,
        rows_equivalent,
        fix_dimension,
        rank_one_predicted: rows_equivalent && nonzero,
        convergence_predicted: rows_dominated && nonzero && !discrete,
        discrete_time_inapplicable: discrete,
        t0,
    })
}
