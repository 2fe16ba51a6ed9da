use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::kernel::{read_matrix_csv, write_matrix_csv, MatrixDocument, SUPPORT_THRESHOLD};
use crate::measure::StateSpace;

/// Generator of a continuous-time semigroup, in backward orientation:
/// `(Af)(x) = Σ_y Q[x][y] f(y)`.
///
/// Stored as off-diagonal rates plus a killing rate per row, so that
/// `Q[x][x] = −Σ_{y≠x} Q[x][y] − κ(x)`. Constants are then annihilated
/// exactly on rows with `κ = 0`, and conservation does not depend on how the
/// diagonal rounds.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorMatrix {
    space: Arc<StateSpace>,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    killing: Vec<f64>,
    diag: Vec<f64>,
}

impl GeneratorMatrix {
    /// Builds from per-row off-diagonal entries `(column, rate)` and killing
    /// rates. Repeated columns are summed; diagonal entries are rejected.
    pub fn from_rates(space: Arc<StateSpace>, rows: Vec<Vec<(usize, f64)>>, killing: Vec<f64>) -> Result<Self> {
        let g = Self::build(space, rows, killing)?;
        g.check_escape_atoms()?;
        Ok(g)
    }

    fn build(space: Arc<StateSpace>, rows: Vec<Vec<(usize, f64)>>, killing: Vec<f64>) -> Result<Self> {
        let n = space.len();
        if rows.len() != n || killing.len() != n {
            return Err(Error::Dimension(format!("generator rows/killing do not match {n} atoms")));
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        let mut diag = Vec::with_capacity(n);
        row_ptr.push(0);
        for (i, mut row) in rows.into_iter().enumerate() {
            row.sort_by_key(|&(j, _)| j);
            let start = cols.len();
            for (j, v) in row {
                if j >= n || j == i {
                    return Err(Error::Dimension(format!("off-diagonal entry ({i}, {j}) invalid")));
                }
                if !v.is_finite() {
                    return Err(Error::Precondition(format!("rate ({i}, {j}) is not finite")));
                }
                if cols.len() > start && *cols.last().unwrap() == j {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(j);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
            let mut off = 0.0;
            for v in &vals[start..] {
                off += v;
            }
            if !killing[i].is_finite() {
                return Err(Error::Precondition(format!("killing rate {i} is not finite")));
            }
            diag.push(-off - killing[i]);
        }
        Ok(GeneratorMatrix { space, row_ptr, cols, vals, killing, diag })
    }

    /// Escape atoms must be traps that the genuine atoms can reach.
    fn check_escape_atoms(&self) -> Result<()> {
        let escape = self.space.escape_atoms();
        if escape.is_empty() {
            return Ok(());
        }
        for &e in escape {
            if self.row(e).any(|(_, v)| v != 0.0) || self.killing[e] != 0.0 {
                return Err(Error::InvalidSpace(format!("escape atom {e} is not a conservative trap")));
            }
        }
        let n = self.len();
        let mut seen: Vec<bool> = (0..n).map(|i| !self.space.is_escape(i)).collect();
        let mut stack: Vec<usize> = (0..n).filter(|&i| seen[i]).collect();
        while let Some(i) = stack.pop() {
            for (j, v) in self.row(i) {
                if v > 0.0 && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        match escape.iter().find(|&&e| !seen[e]) {
            Some(e) => Err(Error::InvalidSpace(format!("escape atom {e} is unreachable"))),
            None => Ok(()),
        }
    }

    pub fn from_dense(space: Arc<StateSpace>, q: &DMatrix<f64>) -> Result<Self> {
        let n = space.len();
        if q.nrows() != n || q.ncols() != n {
            return Err(Error::Dimension(format!("generator is {}x{} on {n} atoms", q.nrows(), q.ncols())));
        }
        let mut rows = Vec::with_capacity(n);
        let mut killing = Vec::with_capacity(n);
        for i in 0..n {
            let mut row = Vec::new();
            let mut sum = 0.0;
            for j in 0..n {
                let v = q[(i, j)];
                if j != i && v != 0.0 {
                    row.push((j, v));
                }
                if j != i {
                    sum += v;
                }
            }
            killing.push(-(sum + q[(i, i)]));
            rows.push(row);
        }
        let mut g = Self::from_rates(space, rows, killing)?;
        // Keep the caller's diagonal bit-for-bit.
        for i in 0..n {
            g.diag[i] = q[(i, i)];
        }
        Ok(g)
    }

    pub fn from_rows(space: Arc<StateSpace>, rows: &[Vec<f64>]) -> Result<Self> {
        let n = space.len();
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension(format!("generator rows do not form a {n}x{n} matrix")));
        }
        Self::from_dense(space, &DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn zero(space: Arc<StateSpace>) -> Self {
        let n = space.len();
        Self::from_rates(space, vec![Vec::new(); n], vec![0.0; n]).expect("zero generator")
    }

    pub fn space(&self) -> &Arc<StateSpace> {
        &self.space
    }

    pub fn len(&self) -> usize {
        self.space.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn killing(&self) -> &[f64] {
        &self.killing
    }

    /// Off-diagonal entries of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn nnz(&self) -> usize {
        self.vals.len() + self.len()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diag[i];
            for (j, v) in self.row(i) {
                m[(i, j)] = v;
            }
        }
        m
    }

    /// Largest absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.len())
            .map(|i| self.diag[i].abs() + self.row(i).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    fn tau(&self) -> f64 {
        SUPPORT_THRESHOLD * self.norm_inf()
    }

    /// Off-diagonal entries `≥ −τ`; then `e^{tQ} ≥ 0` for `t ≥ 0`.
    pub fn is_metzler(&self) -> bool {
        let tau = self.tau();
        self.vals.iter().all(|&v| v >= -tau)
    }

    /// Row sums `≤ 0` (up to `τ`); then `e^{tQ}` is a sup-norm contraction.
    pub fn is_substochastic(&self) -> bool {
        let tau = self.tau();
        self.killing.iter().all(|&k| k >= -tau)
    }

    /// `(Qu)(x) = Σ_{y≠x} Q[x][y] (u(y) − u(x)) − κ(x) u(x)`.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        (0..self.len())
            .map(|i| {
                let mut s = 0.0;
                for (j, v) in self.row(i) {
                    s += v * (u[j] - u[i]);
                }
                s - self.killing[i] * u[i]
            })
            .collect()
    }

    /// `(Qᵀμ)(y) = Σ_x Q[x][y] μ(x)`.
    pub fn apply_transpose(&self, mu: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = self.diag.iter().zip(mu).map(|(d, m)| d * m).collect();
        for i in 0..self.len() {
            for (j, v) in self.row(i) {
                out[j] += v * mu[i];
            }
        }
        out
    }

    /// Generator on the same space with transposed rates.
    pub fn transpose(&self) -> GeneratorMatrix {
        let n = self.len();
        let mut rows = vec![Vec::new(); n];
        for i in 0..n {
            for (j, v) in self.row(i) {
                rows[j].push((i, v));
            }
        }
        let mut offsum = vec![0.0; n];
        for (j, row) in rows.iter().enumerate() {
            for (_, v) in row {
                offsum[j] += v;
            }
        }
        let killing = (0..n).map(|j| -(offsum[j] + self.diag[j])).collect();
        // Escape atoms are sources in the transpose, so they are not re-validated.
        let mut t = Self::build(self.space.clone(), rows, killing).expect("transpose of valid generator");
        t.diag.copy_from_slice(&self.diag);
        t
    }

    pub fn read_csv<R: Read>(space: Arc<StateSpace>, reader: R) -> Result<Self> {
        Self::from_rows(space, &read_matrix_csv(reader)?)
    }

    pub fn read_csv_file(path: &Path) -> Result<Self> {
        let rows = read_matrix_csv(std::fs::File::open(path)?)?;
        let space = Arc::new(StateSpace::indexed(rows.len())?);
        Self::from_rows(space, &rows)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_matrix_csv(&self.to_dense(), out)
    }

    pub fn to_document(&self) -> MatrixDocument {
        MatrixDocument::new(&self.space, &self.to_dense())
    }

    pub fn from_document(doc: MatrixDocument) -> Result<Self> {
        let space = Arc::new(doc.space()?);
        Self::from_rows(space, &doc.matrix)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space(n: usize) -> Arc<StateSpace> {
        Arc::new(StateSpace::indexed(n).unwrap())
    }

    #[test]
    fn dense_roundtrip_and_flags() {
        let q = DMatrix::from_row_slice(3, 3, &[-1.0, 1.0, 0.0, 0.5, -1.5, 0.5, 0.0, 2.0, -3.0]);
        let g = GeneratorMatrix::from_dense(space(3), &q).unwrap();
        assert_eq!(g.to_dense(), q);
        assert!(g.is_metzler());
        assert!(g.is_substochastic());
        assert_eq!(g.killing()[2], 1.0);
        let rot = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let g = GeneratorMatrix::from_dense(space(2), &rot).unwrap();
        assert!(!g.is_metzler());
    }

    #[test]
    fn apply_annihilates_constants_exactly() {
        let rows = vec![vec![(1, 0.1 + 0.2)], vec![(0, 1.0 / 3.0), (2, 7.0 / 9.0)], vec![(1, 1e-3)]];
        let g = GeneratorMatrix::from_rates(space(3), rows, vec![0.0; 3]).unwrap();
        assert_eq!(g.apply(&[1.0, 1.0, 1.0]), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn apply_matches_dense_product() {
        let q = DMatrix::from_row_slice(3, 3, &[-2.0, 1.0, 0.5, 0.5, -1.5, 0.5, 0.0, 2.0, -3.0]);
        let g = GeneratorMatrix::from_dense(space(3), &q).unwrap();
        let u = [0.3, -1.2, 2.5];
        let dense = &q * nalgebra::DVector::from_column_slice(&u);
        for (a, b) in g.apply(&u).iter().zip(dense.iter()) {
            assert!((a - b).abs() < 1e-14);
        }
        let dense_t = q.transpose() * nalgebra::DVector::from_column_slice(&u);
        for (a, b) in g.apply_transpose(&u).iter().zip(dense_t.iter()) {
            assert!((a - b).abs() < 1e-14);
        }
        assert_eq!(g.transpose().to_dense(), q.transpose());
    }

    #[test]
    fn rejects_diagonal_rates() {
        assert!(GeneratorMatrix::from_rates(space(2), vec![vec![(0, 1.0)], vec![]], vec![0.0; 2]).is_err());
    }
}
