//! Long-time behaviour of a semigroup: fixed spaces, the separation test,
//! the limit projection, convergence diagnostics, Doob-type checks and an
//! eigenvalue-based oracle.

mod diagnostics;
mod doob;
mod oracle;
mod projection;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, RankGap};
use crate::measure::{l1, linf};
use crate::semigroup::{boundedness_report, Semigroup, DENSE_ACTION_LIMIT};

pub use diagnostics::{
    convergence_diagnostics, convergence_diagnostics_with, ConvergenceDiagnostics, DiagnosticsOptions, ProbePoint,
    ProbeSeries, Reference, Verdict,
};
pub use doob::{doob_check, perron_fixed_measure, DoobReport, PerronResult};
pub use oracle::{escape_reachable, spectral_oracle, SpectralOracle};
pub use projection::{dominating_fixed_measure, limit_projection, ErgodicProjection};

/// Default relative threshold for rank decisions in this module.
pub const DEFAULT_TOL: f64 = linalg::RANK_TOL;

/// Times at which fixed-space bases are checked against the semigroup.
const VERIFY_TIMES: [f64; 3] = [1.0, 2.0, 4.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Measures,
    Functions,
}

/// Orthonormal basis of `fix 𝒮` (measures) or `fix 𝒯` (functions).
///
/// On spaces with escape atoms the measure side only contains fixed
/// measures that put no mass on escape atoms: mass parked at infinity is not
/// a measure on the modeled domain.
#[derive(Debug, Clone, Serialize)]
pub struct FixedSpaceBasis {
    pub side: Side,
    #[serde(serialize_with = "serialize_columns")]
    pub vectors: DMatrix<f64>,
    pub dimension: usize,
    pub tolerance: f64,
    pub gap: RankGap,
    /// Largest relative defect `‖S_t v − v‖ / ‖v‖` seen during verification.
    pub verified_defect: f64,
}

impl FixedSpaceBasis {
    pub fn column(&self, j: usize) -> Vec<f64> {
        linalg::column(&self.vectors, j)
    }
}

pub(crate) fn serialize_columns<S: serde::Serializer>(m: &DMatrix<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(m.ncols()))?;
    for j in 0..m.ncols() {
        seq.serialize_element(&linalg::column(m, j))?;
    }
    seq.end()
}

fn side_matrix(s: &Semigroup, side: Side) -> DMatrix<f64> {
    let a = s.dense_generator();
    match side {
        Side::Functions => a.clone(),
        Side::Measures => {
            let at = a.transpose();
            let escape = s.space().escape_atoms();
            if escape.is_empty() {
                return at;
            }
            // Stack scaled selector rows so that null vectors vanish on escape atoms.
            let n = at.nrows();
            let scale = at.norm().max(1.0);
            let mut stacked = DMatrix::zeros(n + escape.len(), n);
            stacked.rows_mut(0, n).copy_from(&at);
            for (r, &e) in escape.iter().enumerate() {
                stacked[(n + r, e)] = scale;
            }
            stacked
        }
    }
}

/// Numerical null space of the generator (or `K − I`) on the requested side,
/// checked against the semigroup at `t ∈ {1, 2, 4}`.
pub fn fixed_space(s: &Semigroup, side: Side, tol: f64) -> Result<FixedSpaceBasis> {
    if !(tol > 0.0) {
        return Err(Error::Precondition(format!("tolerance must be positive, got {tol}")));
    }
    let a = side_matrix(s, side);
    let ns = linalg::null_space(&a, tol)?;
    let n = s.len();
    let smax = ns.gap.threshold / tol;
    let eps = ns.gap.largest_dropped.unwrap_or(0.0).max(f64::EPSILON * smax);
    let mut worst = 0.0_f64;
    for &t in &VERIFY_TIMES {
        let m_t = if s.len() <= DENSE_ACTION_LIMIT { s.evaluate(t)?.bound().max(1.0) } else { 1.0 };
        let allowed = 1e-10 + 10.0 * t * (n as f64).sqrt() * eps * m_t;
        for j in 0..ns.dim() {
            let v = linalg::column(&ns.basis, j);
            let (moved, norm) = match side {
                Side::Measures => (s.forward_raw(t, &v)?, l1 as fn(&[f64]) -> f64),
                Side::Functions => (s.backward_raw(t, &v)?, linf as fn(&[f64]) -> f64),
            };
            let diff: Vec<f64> = moved.iter().zip(&v).map(|(a, b)| a - b).collect();
            let scale = norm(&v);
            let defect = norm(&diff) / scale;
            worst = worst.max(defect);
            if defect > allowed {
                return Err(Error::InconsistentTolerance { t, defect, tolerance: allowed });
            }
        }
    }
    Ok(FixedSpaceBasis {
        side,
        dimension: ns.dim(),
        vectors: ns.basis,
        tolerance: tol,
        gap: ns.gap,
        verified_defect: worst,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SeparationReport {
    pub dim_fix_measures: usize,
    pub dim_fix_functions: usize,
    /// `G[i][j] = ⟨μ_i, f_j⟩` over the two orthonormal bases.
    pub pairing_matrix: Vec<Vec<f64>>,
    pub rank: usize,
    pub gap: RankGap,
    /// `fix 𝒮` separates `fix 𝒯`: `rank G = dim fix 𝒯`.
    pub separates: bool,
    /// `fix 𝒯` separates `fix 𝒮`: `rank Gᵀ = dim fix 𝒮`.
    pub reverse_separates: bool,
    /// `None` in discrete time, where separation does not decide convergence.
    pub predicted_convergence: Option<bool>,
    pub discrete_time_inapplicable: bool,
    pub tolerance: f64,
}

/// Largest kernel bound accepted as "bounded" when the generator is not a
/// contraction generator.
const BOUNDED_LIMIT: f64 = 1e8;

pub(crate) fn require_positive_bounded(s: &Semigroup) -> Result<()> {
    if !s.is_positive() {
        return Err(Error::Hypothesis("semigroup is not positive".into()));
    }
    if !s.is_contractive() && s.len() <= DENSE_ACTION_LIMIT {
        let horizon = if s.is_discrete() { 1024.0 } else { 4096.0 };
        let m = boundedness_report(s, horizon, 13)?;
        if !(m <= BOUNDED_LIMIT) {
            return Err(Error::Hypothesis(format!("semigroup does not look bounded (M ≈ {m:e})")));
        }
    }
    Ok(())
}

/// Whether the fixed measures separate the fixed functions.
pub fn separation_test(s: &Semigroup, tol: f64) -> Result<SeparationReport> {
    require_positive_bounded(s)?;
    let fm = fixed_space(s, Side::Measures, tol)?;
    let ff = fixed_space(s, Side::Functions, tol)?;
    separation_from_bases(s, &fm, &ff, tol)
}

pub(crate) fn separation_from_bases(
    s: &Semigroup,
    fm: &FixedSpaceBasis,
    ff: &FixedSpaceBasis,
    tol: f64,
) -> Result<SeparationReport> {
    let g = fm.vectors.transpose() * &ff.vectors;
    // Both bases are orthonormal, so singular values of G are at most 1; the
    // unit floor keeps a G made of rounding noise from reporting full rank.
    let gap = linalg::rank_with_floor(&g, tol, 1.0)?;
    let separates = gap.rank == ff.dimension;
    let discrete = s.is_discrete();
    Ok(SeparationReport {
        dim_fix_measures: fm.dimension,
        dim_fix_functions: ff.dimension,
        pairing_matrix: (0..g.nrows()).map(|i| g.row(i).iter().copied().collect()).collect(),
        rank: gap.rank,
        gap,
        separates,
        reverse_separates: gap.rank == fm.dimension,
        predicted_convergence: if discrete { None } else { Some(separates) },
        discrete_time_inapplicable: discrete,
        tolerance: tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::Kernel;
    use crate::measure::StateSpace;
    use crate::semigroup::GeneratorMatrix;
    use std::sync::Arc;

    fn space(n: usize) -> Arc<StateSpace> {
        Arc::new(StateSpace::indexed(n).unwrap())
    }

    pub(crate) fn swap_minus_identity() -> Semigroup {
        Semigroup::continuous(GeneratorMatrix::from_rows(space(2), &[vec![-1.0, 1.0], vec![1.0, -1.0]]).unwrap())
    }

    pub(crate) fn two_block() -> Semigroup {
        let q = vec![
            vec![-1.0, 1.0, 0.0, 0.0],
            vec![2.0, -2.0, 0.0, 0.0],
            vec![0.0, 0.0, -3.0, 3.0],
            vec![0.0, 0.0, 1.0, -1.0],
        ];
        Semigroup::continuous(GeneratorMatrix::from_rows(space(4), &q).unwrap())
    }

    #[test]
    fn swap_fixed_spaces() {
        let s = swap_minus_identity();
        let f = fixed_space(&s, Side::Functions, DEFAULT_TOL).unwrap();
        assert_eq!(f.dimension, 1);
        let v = f.column(0);
        assert!((v[0] - v[1]).abs() < 1e-14);
        let m = fixed_space(&s, Side::Measures, DEFAULT_TOL).unwrap();
        assert_eq!(m.dimension, 1);
        let v = m.column(0);
        assert!((v[0] - v[1]).abs() < 1e-14);
    }

    #[test]
    fn strictly_substochastic_has_trivial_fixed_spaces() {
        let q = GeneratorMatrix::from_rows(space(2), &[vec![-2.0, 1.0], vec![0.5, -1.0]]).unwrap();
        let s = Semigroup::continuous(q);
        assert_eq!(fixed_space(&s, Side::Functions, DEFAULT_TOL).unwrap().dimension, 0);
        assert_eq!(fixed_space(&s, Side::Measures, DEFAULT_TOL).unwrap().dimension, 0);
    }

    #[test]
    fn two_block_fixed_spaces_match_blockwise_oracle() {
        let s = two_block();
        let m = fixed_space(&s, Side::Measures, DEFAULT_TOL).unwrap();
        assert_eq!(m.dimension, 2);
        // Blockwise stationary vectors (2/3, 1/3, 0, 0) and (0, 0, 1/4, 3/4).
        let oracle = linalg::from_columns(4, &[vec![2.0, 1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0, 3.0]]);
        let q = oracle.clone().qr().q();
        assert!(linalg::max_principal_angle(&q, &m.vectors) < 1e-10);
        assert_eq!(fixed_space(&s, Side::Functions, DEFAULT_TOL).unwrap().dimension, 2);
    }

    #[test]
    fn swap_separates_and_discrete_is_flagged() {
        let r = separation_test(&swap_minus_identity(), DEFAULT_TOL).unwrap();
        assert!(r.separates && r.reverse_separates);
        assert_eq!(r.predicted_convergence, Some(true));
        let step = Kernel::from_rows(space(2), &[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let d = separation_test(&Semigroup::discrete(step), DEFAULT_TOL).unwrap();
        assert!(d.discrete_time_inapplicable);
        assert_eq!(d.predicted_convergence, None);
    }

    #[test]
    fn escape_atoms_break_separation() {
        // Atoms 1 and 2 are traps at "infinity" reachable from atom 0.
        let sp = Arc::new(StateSpace::indexed(3).unwrap().with_escape(vec![1, 2]).unwrap());
        let q = GeneratorMatrix::from_rows(sp, &[vec![-2.0, 1.0, 1.0], vec![0.0; 3], vec![0.0; 3]]).unwrap();
        let r = separation_test(&Semigroup::continuous(q), DEFAULT_TOL).unwrap();
        assert_eq!(r.dim_fix_functions, 2);
        assert_eq!(r.dim_fix_measures, 0);
        assert!(!r.separates && r.reverse_separates);
        assert_eq!(r.predicted_convergence, Some(false));
    }

    #[test]
    fn rejects_nonpositive_semigroup() {
        let q = GeneratorMatrix::from_rows(space(2), &[vec![0.0, 1.0], vec![-1.0, 0.0]]).unwrap();
        assert!(matches!(separation_test(&Semigroup::continuous(q), DEFAULT_TOL), Err(Error::Hypothesis(_))));
    }
}
