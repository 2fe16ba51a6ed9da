use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, RANK_TOL};

/// Largest principal angle at which two subspaces count as equal.
pub const ANGLE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LemmaMode {
    /// `‖D‖₂ ≤ 1`: compare `fix D` with `fix Dᵀ`.
    Contraction,
    /// `(C + Cᵀ)/2 ≤ 0`: compare `ker C` with `ker Cᵀ`.
    Dissipative,
}

#[derive(Debug, Clone, Serialize)]
pub struct MatrixLemmaReport {
    pub mode: LemmaMode,
    pub left_dim: usize,
    pub right_dim: usize,
    pub angle: f64,
    pub equal: bool,
}

/// Compares the fixed (or null) spaces of a matrix and its transpose.
pub fn matrix_lemmas(a: &DMatrix<f64>, mode: LemmaMode) -> Result<MatrixLemmaReport> {
    let m = a.nrows();
    if a.ncols() != m || m == 0 {
        return Err(Error::Dimension(format!("matrix is {}x{}", a.nrows(), a.ncols())));
    }
    let scale = a.abs().max().max(1.0);
    let target = match mode {
        LemmaMode::Contraction => {
            let norm = linalg::norm2(a);
            if norm > 1.0 + 1e-12 {
                return Err(Error::Precondition(format!("operator norm {norm} exceeds 1")));
            }
            a - DMatrix::identity(m, m)
        }
        LemmaMode::Dissipative => {
            let e = linalg::max_symmetric_eigenvalue(a);
            if e > 1e-10 * scale {
                return Err(Error::Precondition(format!("symmetric part has eigenvalue {e} > 0")));
            }
            a.clone()
        }
    };
    let left = linalg::null_space(&target, RANK_TOL)?;
    let right = linalg::null_space(&target.transpose(), RANK_TOL)?;
    let angle = linalg::max_principal_angle(&left.basis, &right.basis);
    Ok(MatrixLemmaReport {
        mode,
        left_dim: left.dim(),
        right_dim: right.dim(),
        angle,
        equal: left.dim() == right.dim() && angle <= ANGLE_TOL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotation_swap_and_exchange() {
        let (s, c) = 0.7_f64.sin_cos();
        let rot = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
        let r = matrix_lemmas(&rot, LemmaMode::Contraction).unwrap();
        assert!(r.equal && r.left_dim == 0);
        let swap = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let r = matrix_lemmas(&swap, LemmaMode::Contraction).unwrap();
        assert!(r.equal && r.left_dim == 1);
        let ex = DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -1.0]);
        let r = matrix_lemmas(&ex, LemmaMode::Dissipative).unwrap();
        assert!(r.equal && r.left_dim == 1);
    }

    #[test]
    fn non_symmetric_dissipative_kernel() {
        // Bounded but not contractive on sup norm: row sums 1 and −2.
        let c = DMatrix::from_row_slice(2, 2, &[-1.0, 2.0, 2.0, -4.0]);
        let r = matrix_lemmas(&c, LemmaMode::Dissipative).unwrap();
        assert!(r.equal && r.left_dim == 1);
        // Skew part does not move the kernel of a dissipative matrix.
        let c = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 0.0, 0.0, -1.0, 2.0, 0.0, -2.0, -1.0]);
        let r = matrix_lemmas(&c, LemmaMode::Dissipative).unwrap();
        assert!(r.equal && r.left_dim == 1);
    }

    #[test]
    fn rejects_mode_violations() {
        let big = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.5]);
        assert!(matrix_lemmas(&big, LemmaMode::Contraction).is_err());
        assert!(matrix_lemmas(&big, LemmaMode::Dissipative).is_err());
        // Transpose spaces differ without the hypothesis.
        let jordan = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert!(matrix_lemmas(&jordan, LemmaMode::Dissipative).is_err());
    }
}
