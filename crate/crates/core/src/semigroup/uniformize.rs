//! Action of `e^{tQ}` on a single vector without forming the dense
//! exponential, for Metzler generators: with `Λ ≥ max |Q_ii|` and
//! `P = I + Q/Λ ≥ 0`, `e^{tQ} v = Σ_k Pois(k; Λt) P^k v`.

use super::generator::GeneratorMatrix;

/// Largest Poisson mean handled in one substep.
const SUBSTEP_MEAN: f64 = 30.0;
const TAIL_TOL: f64 = 1e-17;

/// Non-negative uniformized matrix `P` in CSR form, already oriented for the
/// requested action.
#[derive(Debug, Clone)]
pub struct Uniformizer {
    lambda: f64,
    diag: Vec<f64>,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    growth: f64,
}

impl Uniformizer {
    /// `transpose = false` acts on functions (`Pv`), `true` on measures (`Pᵀv`).
    pub fn new(q: &GeneratorMatrix, transpose: bool) -> Self {
        let n = q.len();
        let mut lambda = q.diag().iter().fold(0.0_f64, |m, d| m.max(d.abs()));
        if lambda == 0.0 {
            lambda = (0..n).map(|i| q.row(i).map(|(_, v)| v.abs()).sum::<f64>()).fold(0.0, f64::max);
        }
        let scale = if lambda > 0.0 { 1.0 / lambda } else { 0.0 };
        let diag: Vec<f64> = q.diag().iter().map(|d| 1.0 + d * scale).collect();
        // ‖P‖∞ bounds P^k on functions and ‖Pᵀ‖₁ = ‖P‖∞ bounds it on measures.
        let growth = (0..n)
            .map(|i| diag[i].abs() + q.row(i).map(|(_, v)| (v * scale).abs()).sum::<f64>())
            .fold(1.0_f64, f64::max);
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for i in 0..n {
            for (j, v) in q.row(i) {
                if transpose {
                    rows[j].push((i, v * scale));
                } else {
                    rows[i].push((j, v * scale));
                }
            }
        }
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for row in rows {
            for (j, v) in row {
                cols.push(j);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        Uniformizer { lambda, diag, row_ptr, cols, vals, growth }
    }

    pub fn rate(&self) -> f64 {
        self.lambda
    }

    fn mul(&self, v: &[f64], out: &mut [f64]) {
        for i in 0..v.len() {
            let mut s = self.diag[i] * v[i];
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.vals[k] * v[self.cols[k]];
            }
            out[i] = s;
        }
    }

    /// `e^{tQ} v` (or `e^{tQᵀ} v`).
    pub fn apply(&self, t: f64, v: &[f64]) -> Vec<f64> {
        if self.lambda == 0.0 || t == 0.0 {
            return v.to_vec();
        }
        let total = self.lambda * t;
        let steps = (total / SUBSTEP_MEAN).ceil().max(1.0) as usize;
        let m = total / steps as f64;
        let mut cur = v.to_vec();
        for _ in 0..steps {
            cur = self.substep(m, &cur);
        }
        cur
    }

    fn substep(&self, m: f64, v: &[f64]) -> Vec<f64> {
        let n = v.len();
        let scale = v.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
        if scale == 0.0 {
            return vec![0.0; n];
        }
        let mut w = (-m).exp();
        let mut acc: Vec<f64> = v.iter().map(|x| w * x).collect();
        let mut term = v.to_vec();
        let mut next = vec![0.0; n];
        let cap = (m + 60.0 * m.sqrt() + 60.0) as usize;
        let mut bound = 1.0_f64;
        for k in 1..=cap {
            self.mul(&term, &mut next);
            std::mem::swap(&mut term, &mut next);
            w *= m / k as f64;
            bound *= self.growth;
            for (a, x) in acc.iter_mut().zip(&term) {
                *a += w * x;
            }
            // Remaining tail ≤ w·Σ_j (m·g)^j/(k+1)_j; stop once it is negligible.
            if (k as f64) > m * self.growth && w * bound * 2.0 < TAIL_TOL {
                break;
            }
        }
        acc
    }
}
