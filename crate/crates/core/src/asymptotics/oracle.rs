use std::collections::VecDeque;

use nalgebra::linalg::Schur;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::semigroup::GeneratorMatrix;

/// Convergence verdict read off the spectrum of `Q`, computed without the
/// singular value decompositions used by the separation test.
#[derive(Debug, Clone, Serialize)]
pub struct SpectralOracle {
    pub converges: bool,
    /// Algebraic multiplicity of the eigenvalue 0.
    pub limit_rank: usize,
    pub geometric_zero: usize,
    /// Largest real part among eigenvalues outside the zero cluster.
    pub spectral_abscissa: f64,
    /// An eigenvalue sits on the imaginary axis away from 0.
    pub imaginary_axis: bool,
    /// Some escape atom is reachable from a genuine atom.
    pub escape_reachable: bool,
    pub tolerance: f64,
}

/// `converges` iff every eigenvalue has `Re λ < −tol` or lies in the zero
/// cluster `|λ| ≤ tol`, the zero cluster is semisimple, and no escape atom
/// can be reached (mass leaving for infinity is not convergence on the
/// modeled domain).
pub fn spectral_oracle(q: &GeneratorMatrix) -> Result<SpectralOracle> {
    let dense = q.to_dense();
    let n = dense.nrows();
    let tol = 1e-8 * q.norm_inf().max(1.0);
    let schur = Schur::try_new(dense.clone(), f64::EPSILON, 0)
        .ok_or_else(|| Error::Numerical("Schur decomposition failed".into()))?;
    let eig = schur.complex_eigenvalues();
    let mut algebraic = 0;
    let mut abscissa = f64::NEG_INFINITY;
    let mut imaginary_axis = false;
    let mut bad = false;
    for l in eig.iter() {
        if l.norm() <= tol {
            algebraic += 1;
            continue;
        }
        abscissa = abscissa.max(l.re);
        if l.re >= -tol {
            bad = true;
            if l.im.abs() > tol {
                imaginary_axis = true;
            }
        }
    }
    // Geometric multiplicity from a column-pivoted QR: small trailing R diagonal.
    let r = dense.col_piv_qr().r();
    let rank = (0..n).filter(|&i| r[(i, i)].abs() > tol).count();
    let geometric = n - rank;
    let escape = escape_reachable(q);
    Ok(SpectralOracle {
        converges: !bad && geometric == algebraic && !escape,
        limit_rank: algebraic,
        geometric_zero: geometric,
        spectral_abscissa: abscissa,
        imaginary_axis,
        escape_reachable: escape,
        tolerance: tol,
    })
}

/// Breadth-first search from the genuine atoms along positive rates.
pub fn escape_reachable(q: &GeneratorMatrix) -> bool {
    let space = q.space();
    if space.escape_atoms().is_empty() {
        return false;
    }
    let tau = crate::kernel::SUPPORT_THRESHOLD * q.norm_inf();
    let n = q.len();
    let mut seen = vec![false; n];
    let mut queue = VecDeque::new();
    for i in 0..n {
        if !space.is_escape(i) {
            seen[i] = true;
            queue.push_back(i);
        }
    }
    while let Some(i) = queue.pop_front() {
        for (j, v) in q.row(i) {
            if v > tau && !seen[j] {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    space.escape_atoms().iter().any(|&e| seen[e])
}
