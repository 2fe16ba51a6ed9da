//! Real functions of one variable `x` written as expressions in configs.

use std::fmt;
use std::sync::Arc;

use evalexpr::{build_operator_tree, ContextWithMutableVariables, DefaultNumericTypes, HashMapContext, Node, Value};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Compiled expression in `x`, e.g. `"1 - math::exp(-x)"`.
#[derive(Clone)]
pub struct Expr {
    source: String,
    tree: Arc<Node<DefaultNumericTypes>>,
}

impl Expr {
    pub fn parse(source: &str) -> Result<Self, String> {
        let tree = build_operator_tree::<DefaultNumericTypes>(source).map_err(|e| format!("expression {source:?}: {e}"))?;
        let expr = Expr { source: source.to_string(), tree: Arc::new(tree) };
        // Catch unknown identifiers and type errors before any run.
        expr.try_eval(0.5)?;
        Ok(expr)
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    fn try_eval(&self, x: f64) -> Result<f64, String> {
        let mut ctx = HashMapContext::<DefaultNumericTypes>::new();
        ctx.set_value("x".into(), Value::Float(x)).map_err(|e| e.to_string())?;
        self.tree.eval_number_with_context(&ctx).map_err(|e| format!("expression {:?}: {e}", self.source))
    }

    /// Value at `x`; evaluation failures (e.g. a domain error) give NaN.
    pub fn eval(&self, x: f64) -> f64 {
        self.try_eval(x).unwrap_or(f64::NAN)
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({:?})", self.source)
    }
}

impl Serialize for Expr {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.source)
    }
}

impl<'de> Deserialize<'de> for Expr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let source = String::deserialize(d)?;
        Expr::parse(&source).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluates_in_x() {
        let e = Expr::parse("1 - math::exp(-x)").unwrap();
        assert!((e.eval(1.0) - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
        let p = Expr::parse("x^2 + 1").unwrap();
        assert_eq!(p.eval(3.0), 10.0);
    }

    #[test]
    fn rejects_unknown_identifiers() {
        assert!(Expr::parse("y + 1").is_err());
        assert!(Expr::parse("1 +").is_err());
    }
}
