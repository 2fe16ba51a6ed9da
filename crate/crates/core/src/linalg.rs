//! Dense rank and null-space decisions shared by the asymptotic and coupled
//! modules. All rank calls use singular values against a relative threshold
//! and report the gap around it.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};

/// Default relative threshold for rank decisions.
pub const RANK_TOL: f64 = 1e-9;

/// Outcome of a rank decision with the singular values bracketing the cut.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RankGap {
    pub rank: usize,
    /// Absolute cut: `tol · σ_max`.
    pub threshold: f64,
    /// Smallest singular value kept (`None` when the rank is zero).
    pub smallest_kept: Option<f64>,
    /// Largest singular value dropped (`None` at full rank).
    pub largest_dropped: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct NullSpace {
    /// Orthonormal basis, one column per null vector.
    pub basis: DMatrix<f64>,
    pub gap: RankGap,
}

impl NullSpace {
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }
}

fn sorted_svd(m: &DMatrix<f64>, want_v: bool) -> Result<(Vec<f64>, Option<DMatrix<f64>>)> {
    let svd = nalgebra::linalg::SVD::try_new(m.clone(), false, want_v, f64::EPSILON, 0)
        .ok_or_else(|| Error::Numerical("SVD failed to converge".into()))?;
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sv = idx.iter().map(|&i| svd.singular_values[i]).collect();
    let vt = svd.v_t.map(|vt| {
        let rows: Vec<_> = idx.iter().map(|&i| vt.row(i).clone_owned()).collect();
        DMatrix::from_rows(&rows)
    });
    Ok((sv, vt))
}

fn gap_of(sv: &[f64], tol: f64) -> RankGap {
    gap_scaled(sv, tol, 0.0)
}

fn gap_scaled(sv: &[f64], tol: f64, floor: f64) -> RankGap {
    let smax = sv.first().copied().unwrap_or(0.0).max(floor);
    let threshold = tol * smax;
    let rank = if smax == 0.0 { 0 } else { sv.iter().filter(|&&s| s > threshold).count() };
    RankGap {
        rank,
        threshold,
        smallest_kept: rank.checked_sub(1).map(|i| sv[i]),
        largest_dropped: sv.get(rank).copied(),
    }
}

/// Numerical rank with relative threshold `tol`.
pub fn rank(m: &DMatrix<f64>, tol: f64) -> Result<RankGap> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(RankGap { rank: 0, threshold: 0.0, smallest_kept: None, largest_dropped: None });
    }
    let (sv, _) = sorted_svd(m, false)?;
    Ok(gap_of(&sv, tol))
}

/// Rank with threshold `tol · max(σ_max, floor)`.
pub fn rank_with_floor(m: &DMatrix<f64>, tol: f64, floor: f64) -> Result<RankGap> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(RankGap { rank: 0, threshold: tol * floor, smallest_kept: None, largest_dropped: None });
    }
    let (sv, _) = sorted_svd(m, false)?;
    Ok(gap_scaled(&sv, tol, floor))
}

/// Orthonormal basis of `{v : m v ≈ 0}` with relative threshold `tol`.
pub fn null_space(m: &DMatrix<f64>, tol: f64) -> Result<NullSpace> {
    let n = m.ncols();
    // A wide matrix gets zero rows so that the SVD returns a full V.
    let work = if m.nrows() < n {
        let mut sq = DMatrix::zeros(n, n);
        sq.rows_mut(0, m.nrows()).copy_from(m);
        sq
    } else {
        m.clone()
    };
    let (sv, vt) = sorted_svd(&work, true)?;
    let vt = vt.expect("requested V");
    let mut gap = gap_of(&sv, tol);
    // Padding rows contribute zero singular values that are not reported.
    if gap.rank > m.nrows() {
        gap.rank = m.nrows();
    }
    let dim = n - gap.rank;
    let mut basis = DMatrix::zeros(n, dim);
    for (c, r) in (gap.rank..n).enumerate() {
        basis.set_column(c, &vt.row(r).transpose());
    }
    Ok(NullSpace { basis, gap })
}

/// Largest principal angle between the column spans of two orthonormal
/// bases; `π/2` when the dimensions differ.
pub fn max_principal_angle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    if a.ncols() != b.ncols() {
        return std::f64::consts::FRAC_PI_2;
    }
    if a.ncols() == 0 {
        return 0.0;
    }
    // sin of the largest angle is the spectral norm of (I − AAᵀ)B.
    let resid = b - a * (a.transpose() * b);
    let s = resid.clone().svd(false, false).singular_values.iter().fold(0.0_f64, |m, &v| m.max(v));
    s.min(1.0).asin()
}

/// Spectral norm.
pub fn norm2(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.iter().fold(0.0_f64, |a, &v| a.max(v))
}

/// Largest eigenvalue of the symmetric part `(m + mᵀ)/2`.
pub fn max_symmetric_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigenvalues().iter().fold(f64::NEG_INFINITY, |a, &v| a.max(v))
}

pub fn column(m: &DMatrix<f64>, j: usize) -> Vec<f64> {
    m.column(j).iter().copied().collect()
}

pub fn from_columns(n: usize, cols: &[Vec<f64>]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, cols.len());
    for (j, c) in cols.iter().enumerate() {
        m.set_column(j, &DVector::from_column_slice(c));
    }
    m
}
