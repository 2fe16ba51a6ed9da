//! Dense matrix exponential by scaling and squaring with a fixed degree-13
//! Padé approximant (coefficients and θ₁₃ from Higham 2005).

use nalgebra::DMatrix;

use crate::error::{Error, Result};

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

const THETA13: f64 = 5.371920351148152;

fn norm1(a: &DMatrix<f64>) -> f64 {
    (0..a.ncols()).map(|j| a.column(j).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Number of squarings needed so that `‖A / 2^s‖₁ ≤ θ₁₃`.
pub(crate) fn squarings_for(a: &DMatrix<f64>) -> u32 {
    let nrm = norm1(a);
    if nrm <= THETA13 {
        0
    } else {
        (nrm / THETA13).log2().ceil().max(0.0) as u32
    }
}

/// `e^A` for a scaled matrix with `‖A‖₁ ≤ θ₁₃`.
fn pade13(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let b = &PADE13;
    let id = DMatrix::<f64>::identity(n, n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let inner_u = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9]);
    let u = a * (inner_u + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &id * b[1]);
    let inner_v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8]);
    let v = inner_v + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &id * b[0];
    let p = &v + &u;
    let q = v - u;
    q.lu()
        .solve(&p)
        .ok_or_else(|| Error::Numerical("Padé denominator is singular".into()))
}

/// `e^{tA}` by scaling and squaring.
pub fn expm_scaled(a: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    let ta = a * t;
    let s = squarings_for(&ta);
    let scaled = ta * 0.5_f64.powi(s as i32);
    let mut e = pade13(&scaled)?;
    for _ in 0..s {
        e = &e * &e;
    }
    if e.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("matrix exponential overflowed".into()));
    }
    Ok(e)
}

pub fn expm(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    expm_scaled(a, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gives_identity() {
        let z = DMatrix::<f64>::zeros(4, 4);
        assert_eq!(expm(&z).unwrap(), DMatrix::identity(4, 4));
    }

    #[test]
    fn diagonal_matches_scalar_exponentials() {
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-30.0, -1.0, 0.5, 2.0]));
        let e = expm(&d).unwrap();
        for (i, x) in [-30.0_f64, -1.0, 0.5, 2.0].iter().enumerate() {
            assert!((e[(i, i)] - x.exp()).abs() <= 1e-14 * x.exp().max(1.0));
        }
    }

    #[test]
    fn rotation_generator_gives_rotation() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        for &t in &[0.3, 2.0, 40.0] {
            let e = expm_scaled(&a, t).unwrap();
            let expect = DMatrix::from_row_slice(2, 2, &[t.cos(), t.sin(), -t.sin(), t.cos()]);
            assert!((e - expect).amax() < 1e-12 * t.max(1.0));
        }
    }

    #[test]
    fn nilpotent_closed_form() {
        let a = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
        let e = expm_scaled(&a, 3.0).unwrap();
        let expect = DMatrix::from_row_slice(3, 3, &[1.0, 3.0, 4.5, 0.0, 1.0, 3.0, 0.0, 0.0, 1.0]);
        assert!((e - expect).amax() < 1e-13);
    }
}
