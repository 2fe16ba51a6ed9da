use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A user-supplied coefficient function.
#[derive(Clone)]
pub struct CustomFn(pub Arc<dyn Fn(f64) -> f64 + Send + Sync>);

impl fmt::Debug for CustomFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("CustomFn")
    }
}

/// Coefficient of the operator, as a function of position.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Coefficient {
    /// `num(x) / den(x)`, both in ascending powers of `x`.
    Rational { num: Vec<f64>, den: Vec<f64> },
    #[serde(skip)]
    Custom(CustomFn),
}

fn horner(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &k| acc * x + k)
}

impl Coefficient {
    pub fn constant(c: f64) -> Self {
        Coefficient::Rational { num: vec![c], den: vec![1.0] }
    }

    pub fn polynomial(coeffs: Vec<f64>) -> Self {
        Coefficient::Rational { num: coeffs, den: vec![1.0] }
    }

    pub fn rational(num: Vec<f64>, den: Vec<f64>) -> Result<Self> {
        if den.iter().all(|&d| d == 0.0) {
            return Err(Error::Precondition("rational coefficient has zero denominator".into()));
        }
        Ok(Coefficient::Rational { num, den })
    }

    pub fn custom(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Coefficient::Custom(CustomFn(Arc::new(f)))
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Coefficient::Rational { num, den } => horner(num, x) / horner(den, x),
            Coefficient::Custom(f) => (f.0)(x),
        }
    }

    /// `s · self`.
    pub fn scaled(&self, s: f64) -> Self {
        match self {
            Coefficient::Rational { num, den } => {
                Coefficient::Rational { num: num.iter().map(|c| c * s).collect(), den: den.clone() }
            }
            Coefficient::Custom(f) => {
                let f = f.0.clone();
                Coefficient::custom(move |x| s * f(x))
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Coefficient::Rational { num, .. } if num.iter().all(|&c| c == 0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluates_rational_and_custom() {
        let b = Coefficient::rational(vec![0.0, 2.0], vec![1.0, 0.0, 1.0]).unwrap();
        assert!((b.eval(1.0) - 1.0).abs() < 1e-15);
        assert_eq!(Coefficient::polynomial(vec![1.0, 0.0, 3.0]).eval(2.0), 13.0);
        assert_eq!(Coefficient::custom(|x| x.sin()).eval(0.0), 0.0);
        assert!(Coefficient::constant(0.0).is_zero());
        assert!(Coefficient::rational(vec![1.0], vec![0.0]).is_err());
        assert_eq!(b.scaled(-2.0).eval(1.0), -2.0);
        assert_eq!(Coefficient::custom(|x| x + 1.0).scaled(3.0).eval(1.0), 6.0);
    }

    #[test]
    fn serde_roundtrip() {
        let c = Coefficient::polynomial(vec![0.0, -1.0]);
        let s = serde_json::to_string(&c).unwrap();
        assert_eq!(s, r#"{"kind":"rational","num":[0.0,-1.0],"den":[1.0]}"#);
        let back: Coefficient = serde_json::from_str(&s).unwrap();
        assert_eq!(back.eval(3.0), -3.0);
    }
}
