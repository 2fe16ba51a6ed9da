//! Bounded kernels and the dual pair of kernel operators they induce.
//!
//! A kernel is one matrix `K[x][y] = k(x, {y})`. The backward operator acts
//! on functions, `(Tf)(x) = Σ_y K[x][y] f(y)`; the forward operator acts on
//! measures, `(Sμ)({y}) = Σ_x K[x][y] μ({x})`. Both read the same matrix, so
//! `⟨Sμ, f⟩ = ⟨μ, Tf⟩` holds up to rounding.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{
    ensure_same, l1, pairing, sup_norm, tv_norm, BoundedFunction, Coordinate, SignedMeasure, StateSpace,
};

/// Relative threshold below which kernel entries count as zero in support tests.
pub const SUPPORT_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    space: Arc<StateSpace>,
    matrix: DMatrix<f64>,
}

impl Kernel {
    pub fn new(space: Arc<StateSpace>, matrix: DMatrix<f64>) -> Result<Self> {
        let n = space.len();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::Dimension(format!(
                "kernel is {}x{} on a space of {n} atoms",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::Precondition("kernel has non-finite entries".into()));
        }
        Ok(Kernel { space, matrix })
    }

    pub fn from_rows(space: Arc<StateSpace>, rows: &[Vec<f64>]) -> Result<Self> {
        let n = space.len();
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension(format!("kernel rows do not form a {n}x{n} matrix")));
        }
        Self::new(space, DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn identity(space: Arc<StateSpace>) -> Self {
        let n = space.len();
        Kernel { space, matrix: DMatrix::identity(n, n) }
    }

    pub fn zero(space: Arc<StateSpace>) -> Self {
        let n = space.len();
        Kernel { space, matrix: DMatrix::zeros(n, n) }
    }

    pub fn space(&self) -> &Arc<StateSpace> {
        &self.space
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    pub fn len(&self) -> usize {
        self.space.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn entry(&self, x: usize, y: usize) -> f64 {
        self.matrix[(x, y)]
    }

    /// `M(K) = max_x Σ_y |K[x][y]|`.
    pub fn bound(&self) -> f64 {
        row_abs_sums(&self.matrix).into_iter().fold(0.0, f64::max)
    }

    pub fn is_positive(&self) -> bool {
        self.matrix.iter().all(|&v| v >= 0.0)
    }

    /// Positive up to `-tol · M(K)`.
    pub fn is_positive_within(&self, tol: f64) -> bool {
        let floor = -tol * self.bound().max(f64::MIN_POSITIVE);
        self.matrix.iter().all(|&v| v >= floor)
    }

    /// Norm of the forward operator on measures, taken as the largest total
    /// variation of a Dirac image.
    pub fn forward_operator_norm(&self) -> f64 {
        (0..self.len())
            .map(|x| l1(self.matrix.row(x).transpose().as_slice()))
            .fold(0.0, f64::max)
    }

    /// Norm of the backward operator on functions, attained at the sign
    /// pattern of the heaviest row.
    pub fn backward_operator_norm(&self) -> f64 {
        let n = self.len();
        let mut best = 0.0_f64;
        for x in 0..n {
            let signs: Vec<f64> = (0..n).map(|y| self.matrix[(x, y)].signum()).collect();
            let mut s = 0.0;
            for y in 0..n {
                s += self.matrix[(x, y)] * signs[y];
            }
            best = best.max(s.abs());
        }
        best
    }

    /// Entries below `SUPPORT_THRESHOLD · M(K)` in absolute value count as zero.
    pub fn support_threshold(&self) -> f64 {
        SUPPORT_THRESHOLD * self.bound()
    }

    pub fn row_support(&self, x: usize) -> Vec<bool> {
        let tau = self.support_threshold();
        (0..self.len()).map(|y| self.matrix[(x, y)].abs() > tau).collect()
    }

    pub fn read_csv<R: Read>(space: Arc<StateSpace>, reader: R) -> Result<Self> {
        let rows = read_matrix_csv(reader)?;
        Self::from_rows(space, &rows)
    }

    /// Reads a dense CSV kernel and labels its atoms `0..n`.
    pub fn read_csv_file(path: &Path) -> Result<Self> {
        let rows = read_matrix_csv(std::fs::File::open(path)?)?;
        let space = Arc::new(StateSpace::indexed(rows.len().max(1))?);
        Self::from_rows(space, &rows)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_matrix_csv(&self.matrix, out)
    }

    pub fn to_document(&self) -> MatrixDocument {
        MatrixDocument::new(&self.space, &self.matrix)
    }
}

pub(crate) fn row_abs_sums(m: &DMatrix<f64>) -> Vec<f64> {
    let mut sums = vec![0.0; m.nrows()];
    for j in 0..m.ncols() {
        for (i, v) in m.column(j).iter().enumerate() {
            sums[i] += v.abs();
        }
    }
    sums
}

/// `(Sμ)({y}) = Σ_x K[x][y] μ({x})`.
pub fn apply_forward(k: &Kernel, mu: &SignedMeasure) -> Result<SignedMeasure> {
    ensure_same(&k.space, mu.space(), "forward action")?;
    SignedMeasure::new(k.space.clone(), forward_values(&k.matrix, mu.values()))
}

/// `(Tf)(x) = Σ_y K[x][y] f(y)`.
pub fn apply_backward(k: &Kernel, f: &BoundedFunction) -> Result<BoundedFunction> {
    ensure_same(&k.space, f.space(), "backward action")?;
    BoundedFunction::new(k.space.clone(), backward_values(&k.matrix, f.values()))
}

pub(crate) fn forward_values(m: &DMatrix<f64>, mu: &[f64]) -> Vec<f64> {
    (0..m.ncols())
        .map(|y| {
            let mut s = 0.0;
            for (x, k) in m.column(y).iter().enumerate() {
                s += k * mu[x];
            }
            s
        })
        .collect()
}

pub(crate) fn backward_values(m: &DMatrix<f64>, f: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; m.nrows()];
    for (y, &fy) in f.iter().enumerate() {
        for (x, k) in m.column(y).iter().enumerate() {
            out[x] += k * fy;
        }
    }
    out
}

/// `|⟨Sμ, f⟩ − ⟨μ, Tf⟩|`.
pub fn duality_check(k: &Kernel, mu: &SignedMeasure, f: &BoundedFunction) -> Result<f64> {
    let lhs = pairing(&apply_forward(k, mu)?, f)?;
    let rhs = pairing(mu, &apply_backward(k, f)?)?;
    Ok((lhs - rhs).abs())
}

/// Tolerance the duality defect must respect: `1e-10 (1 + M) ‖μ‖ ‖f‖`.
pub fn duality_tolerance(k: &Kernel, mu: &SignedMeasure, f: &BoundedFunction) -> f64 {
    1e-10 * (1.0 + k.bound()) * tv_norm(mu) * sup_norm(f)
}

/// Kernel of `T₁ T₂`: `result[x][y] = Σ_z K1[x][z] K2[z][y]`.
pub fn compose(k1: &Kernel, k2: &Kernel) -> Result<Kernel> {
    ensure_same(&k1.space, &k2.space, "composition")?;
    Ok(Kernel { space: k1.space.clone(), matrix: &k1.matrix * &k2.matrix })
}

/// Whether every row `K[x][·]` is absolutely continuous with respect to `μ ≥ 0`.
pub fn abs_continuous_rows(k: &Kernel, mu: &SignedMeasure) -> Result<bool> {
    ensure_same(&k.space, mu.space(), "absolute continuity")?;
    if !mu.is_nonnegative() {
        return Err(Error::Precondition("reference measure must be non-negative".into()));
    }
    let mu_floor = SUPPORT_THRESHOLD * tv_norm(mu);
    let null: Vec<usize> = (0..k.len()).filter(|&y| mu.values()[y] <= mu_floor).collect();
    let tau = k.support_threshold();
    Ok((0..k.len()).all(|x| null.iter().all(|&y| k.matrix[(x, y)].abs() <= tau)))
}

/// Whether all rows of a positive kernel have the same support.
pub fn rows_mutually_equivalent(k: &Kernel) -> Result<bool> {
    if !k.is_positive_within(SUPPORT_THRESHOLD) {
        return Err(Error::NotPositive("row equivalence needs a positive kernel".into()));
    }
    let first = k.row_support(0);
    Ok((1..k.len()).all(|x| k.row_support(x) == first))
}

pub(crate) fn read_matrix_csv<R: Read>(reader: R) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("row {}: {s:?}: {e}", line + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse("empty matrix".into()));
    }
    Ok(rows)
}

pub(crate) fn write_matrix_csv<W: Write>(m: &DMatrix<f64>, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    for i in 0..m.nrows() {
        w.write_record((0..m.ncols()).map(|j| format!("{:e}", m[(i, j)])))?;
    }
    w.flush()?;
    Ok(())
}

/// JSON envelope for kernels and generators: the space plus a dense matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixDocument {
    pub atoms: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<Vec<Coordinate>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub escape: Vec<usize>,
    pub matrix: Vec<Vec<f64>>,
}

impl MatrixDocument {
    pub(crate) fn new(space: &StateSpace, m: &DMatrix<f64>) -> Self {
        MatrixDocument {
            atoms: space.atoms().to_vec(),
            embedding: space.embedding().map(|e| e.to_vec()),
            weights: space.weights().map(|w| w.to_vec()),
            escape: space.escape_atoms().to_vec(),
            matrix: (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect(),
        }
    }

    pub fn space(&self) -> Result<StateSpace> {
        let mut s = StateSpace::new(self.atoms.clone())?;
        if let Some(e) = &self.embedding {
            s = s.with_embedding(e.clone())?;
        }
        if let Some(w) = &self.weights {
            s = s.with_weights(w.clone())?;
        }
        s.with_escape(self.escape.clone())
    }

    pub fn into_kernel(self) -> Result<Kernel> {
        let space = Arc::new(self.space()?);
        Kernel::from_rows(space, &self.matrix)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space(n: usize) -> Arc<StateSpace> {
        Arc::new(StateSpace::indexed(n).unwrap())
    }

    fn swap() -> Kernel {
        Kernel::from_rows(space(2), &[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap()
    }

    #[test]
    fn dirac_image_is_row() {
        let s = space(3);
        let k = Kernel::from_rows(s.clone(), &[vec![0.1, 0.2, 0.7], vec![0.5, 0.5, 0.0], vec![0.0, 0.0, 1.0]])
            .unwrap();
        let img = apply_forward(&k, &SignedMeasure::dirac(s, 1).unwrap()).unwrap();
        assert_eq!(img.values(), &[0.5, 0.5, 0.0]);
    }

    #[test]
    fn identity_acts_trivially() {
        let s = space(3);
        let id = Kernel::identity(s.clone());
        let mu = SignedMeasure::new(s.clone(), vec![1.0, -2.0, 0.5]).unwrap();
        let f = BoundedFunction::new(s, vec![4.0, 0.0, -1.0]).unwrap();
        assert_eq!(apply_forward(&id, &mu).unwrap(), mu);
        assert_eq!(apply_backward(&id, &f).unwrap(), f);
    }

    #[test]
    fn stochastic_kernel_preserves_one() {
        let s = space(2);
        let k = Kernel::from_rows(s.clone(), &[vec![0.25, 0.75], vec![0.5, 0.5]]).unwrap();
        let one = BoundedFunction::constant(s, 1.0);
        assert_eq!(apply_backward(&k, &one).unwrap(), one);
    }

    #[test]
    fn duality_exact_for_dirac_and_coordinate() {
        let s = space(3);
        let k = Kernel::from_rows(s.clone(), &[vec![0.1, -0.2, 0.3], vec![1.0, 2.0, 3.0], vec![0.0, 0.5, 0.0]])
            .unwrap();
        for x in 0..3 {
            for y in 0..3 {
                let mu = SignedMeasure::dirac(s.clone(), x).unwrap();
                let f = BoundedFunction::indicator(s.clone(), y).unwrap();
                assert_eq!(duality_check(&k, &mu, &f).unwrap(), 0.0);
            }
        }
        let z = Kernel::zero(s.clone());
        let mu = SignedMeasure::new(s.clone(), vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(duality_check(&z, &mu, &BoundedFunction::constant(s, 1.0)).unwrap(), 0.0);
    }

    #[test]
    fn compose_identity_and_swap() {
        let s = space(2);
        let k = Kernel::from_rows(s.clone(), &[vec![0.3, 0.7], vec![0.9, 0.1]]).unwrap();
        assert_eq!(compose(&Kernel::identity(s.clone()), &k).unwrap(), k);
        assert_eq!(compose(&swap(), &swap()).unwrap(), Kernel::identity(s));
    }

    #[test]
    fn compose_rejects_space_mismatch() {
        assert!(compose(&Kernel::identity(space(2)), &Kernel::identity(space(3))).is_err());
    }

    #[test]
    fn absolute_continuity_cases() {
        let s = space(2);
        let id = Kernel::identity(s.clone());
        let positive = SignedMeasure::new(s.clone(), vec![0.3, 0.7]).unwrap();
        assert!(abs_continuous_rows(&id, &positive).unwrap());
        let d1 = SignedMeasure::dirac(s.clone(), 0).unwrap();
        assert!(!abs_continuous_rows(&id, &d1).unwrap());
        let signed = SignedMeasure::new(s, vec![1.0, -1.0]).unwrap();
        assert!(abs_continuous_rows(&id, &signed).is_err());
    }

    #[test]
    fn block_chain_dominated_by_uniform() {
        let s = space(4);
        let k = Kernel::from_rows(
            s.clone(),
            &[
                vec![0.5, 0.5, 0.0, 0.0],
                vec![0.2, 0.8, 0.0, 0.0],
                vec![0.0, 0.0, 0.6, 0.4],
                vec![0.0, 0.0, 0.1, 0.9],
            ],
        )
        .unwrap();
        let uniform = SignedMeasure::new(s, vec![0.25; 4]).unwrap();
        assert!(abs_continuous_rows(&k, &uniform).unwrap());
        assert!(!rows_mutually_equivalent(&k).unwrap());
    }

    #[test]
    fn row_equivalence_cases() {
        let s = space(2);
        let pos = Kernel::from_rows(s.clone(), &[vec![0.3, 0.7], vec![0.9, 0.1]]).unwrap();
        assert!(rows_mutually_equivalent(&pos).unwrap());
        assert!(!rows_mutually_equivalent(&swap()).unwrap());
        let signed = Kernel::from_rows(s, &[vec![-0.3, 0.7], vec![0.9, 0.1]]).unwrap();
        assert!(rows_mutually_equivalent(&signed).is_err());
    }

    #[test]
    fn tiny_entries_below_threshold_are_not_support() {
        let s = space(2);
        let k = Kernel::from_rows(s, &[vec![1.0, 1e-15], vec![1e-15, 1.0]]).unwrap();
        assert_eq!(k.row_support(0), vec![true, false]);
    }

    #[test]
    fn norm_identity_on_signed_kernel() {
        let k = Kernel::from_rows(space(2), &[vec![0.5, -1.5], vec![0.25, 0.25]]).unwrap();
        assert_eq!(k.bound(), 2.0);
        assert_eq!(k.forward_operator_norm(), 2.0);
        assert_eq!(k.backward_operator_norm(), 2.0);
    }

    #[test]
    fn csv_and_json_roundtrip() {
        let k = Kernel::from_rows(space(2), &[vec![0.25, 0.75], vec![1.0 / 3.0, 2.0 / 3.0]]).unwrap();
        let mut buf = Vec::new();
        k.write_csv(&mut buf).unwrap();
        let back = Kernel::read_csv(k.space().clone(), buf.as_slice()).unwrap();
        assert_eq!(back, k);
        let json = serde_json::to_string(&k.to_document()).unwrap();
        let doc: MatrixDocument = serde_json::from_str(&json).unwrap();
        assert_eq!(doc.into_kernel().unwrap(), k);
    }

    #[test]
    fn csv_rejects_ragged_and_garbage() {
        assert!(Kernel::read_csv(space(2), "1,0\n0\n".as_bytes()).is_err());
        assert!(Kernel::read_csv(space(2), "1,x\n0,1\n".as_bytes()).is_err());
    }
}
