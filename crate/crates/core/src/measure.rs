//! Finite models of a measurable space, signed measures with the total
//! variation norm, bounded functions with the sup norm, and the pairing
//! between them.
//!
//! Every σ-algebra here is the power set of a finite atom list, so a measure
//! is a vector of atom masses and a function a vector of atom values. Grid
//! functions store point values; grid measures store mass per cell (density
//! times cell width), which keeps the pairing exact without quadrature
//! corrections.

use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Position of an atom in an underlying continuum, when it has one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Coordinate {
    /// A point of the real line.
    Line(f64),
    /// A point `(k, x)` of `{0, .., m-1} × ℝ` (component index, position).
    Component(usize, f64),
}

impl Coordinate {
    pub fn position(&self) -> f64 {
        match *self {
            Coordinate::Line(x) | Coordinate::Component(_, x) => x,
        }
    }

    pub fn component(&self) -> Option<usize> {
        match *self {
            Coordinate::Line(_) => None,
            Coordinate::Component(k, _) => Some(k),
        }
    }
}

#[derive(Deserialize)]
struct RawSpace {
    atoms: Vec<String>,
    #[serde(default)]
    embedding: Option<Vec<Coordinate>>,
    #[serde(default)]
    weights: Option<Vec<f64>>,
    #[serde(default)]
    escape: Vec<usize>,
}

impl TryFrom<RawSpace> for StateSpace {
    type Error = Error;

    fn try_from(raw: RawSpace) -> Result<Self> {
        let mut space = StateSpace::new(raw.atoms)?;
        if let Some(e) = raw.embedding {
            space = space.with_embedding(e)?;
        }
        if let Some(w) = raw.weights {
            space = space.with_weights(w)?;
        }
        space.with_escape(raw.escape)
    }
}

/// A finite measurable space: an ordered list of distinct atoms.
///
/// Atoms may carry a coordinate (grid position, or component and position
/// for product spaces) and a quadrature weight (cell width). Some atoms may
/// be flagged as *escape* atoms: absorbing states that stand for the points
/// at infinity of a truncated unbounded domain. Mass that reaches them has
/// left every compact subset of the modeled domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpace")]
pub struct StateSpace {
    atoms: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    embedding: Option<Vec<Coordinate>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    weights: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    escape: Vec<usize>,
}

impl StateSpace {
    pub fn new(atoms: Vec<String>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidSpace("a state space needs at least one atom".into()));
        }
        let mut seen = std::collections::HashSet::with_capacity(atoms.len());
        for a in &atoms {
            if !seen.insert(a.as_str()) {
                return Err(Error::InvalidSpace(format!("duplicate atom identifier {a:?}")));
            }
        }
        Ok(StateSpace { atoms, embedding: None, weights: None, escape: Vec::new() })
    }

    /// Atoms labelled `0, 1, .., n-1`.
    pub fn indexed(n: usize) -> Result<Self> {
        Self::new((0..n).map(|i| i.to_string()).collect())
    }

    /// Grid atoms at the given positions with a common cell width.
    pub fn grid(positions: &[f64], width: f64) -> Result<Self> {
        let atoms = (0..positions.len()).map(|i| format!("x{i}")).collect();
        Self::new(atoms)?
            .with_embedding(positions.iter().map(|&x| Coordinate::Line(x)).collect())?
            .with_weights(vec![width; positions.len()])
    }

    pub fn with_embedding(mut self, embedding: Vec<Coordinate>) -> Result<Self> {
        if embedding.len() != self.len() {
            return Err(Error::InvalidSpace(format!(
                "embedding has {} entries for {} atoms",
                embedding.len(),
                self.len()
            )));
        }
        self.embedding = Some(embedding);
        Ok(self)
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.len() {
            return Err(Error::InvalidSpace(format!(
                "{} weights for {} atoms",
                weights.len(),
                self.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0)) {
            return Err(Error::InvalidSpace(format!("quadrature weight {w} is not positive")));
        }
        self.weights = Some(weights);
        Ok(self)
    }

    pub fn with_escape(mut self, mut escape: Vec<usize>) -> Result<Self> {
        escape.sort_unstable();
        escape.dedup();
        if let Some(&i) = escape.iter().find(|&&i| i >= self.len()) {
            return Err(Error::InvalidSpace(format!("escape atom {i} out of range")));
        }
        if escape.len() == self.len() {
            return Err(Error::InvalidSpace("every atom is an escape atom".into()));
        }
        self.escape = escape;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atoms(&self) -> &[String] {
        &self.atoms
    }

    pub fn embedding(&self) -> Option<&[Coordinate]> {
        self.embedding.as_deref()
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    pub fn escape_atoms(&self) -> &[usize] {
        &self.escape
    }

    pub fn is_escape(&self, i: usize) -> bool {
        self.escape.binary_search(&i).is_ok()
    }

    pub fn position(&self, i: usize) -> Option<f64> {
        self.embedding.as_ref().map(|e| e[i].position())
    }

    /// Whether two handles describe the same space.
    pub fn same(a: &Arc<StateSpace>, b: &Arc<StateSpace>) -> bool {
        Arc::ptr_eq(a, b) || **a == **b
    }
}

pub(crate) fn ensure_same(a: &Arc<StateSpace>, b: &Arc<StateSpace>, what: &str) -> Result<()> {
    if StateSpace::same(a, b) {
        Ok(())
    } else {
        Err(Error::Dimension(format!(
            "{what}: spaces differ ({} vs {} atoms)",
            a.len(),
            b.len()
        )))
    }
}

fn check_len(space: &StateSpace, values: &[f64]) -> Result<()> {
    if values.len() != space.len() {
        return Err(Error::Dimension(format!(
            "{} values for a space of {} atoms",
            values.len(),
            space.len()
        )));
    }
    Ok(())
}

/// A finite signed measure, stored as atom masses.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedMeasure {
    space: Arc<StateSpace>,
    values: Vec<f64>,
}

impl SignedMeasure {
    pub fn new(space: Arc<StateSpace>, values: Vec<f64>) -> Result<Self> {
        check_len(&space, &values)?;
        Ok(SignedMeasure { space, values })
    }

    pub fn zero(space: Arc<StateSpace>) -> Self {
        let n = space.len();
        SignedMeasure { space, values: vec![0.0; n] }
    }

    pub fn dirac(space: Arc<StateSpace>, atom: usize) -> Result<Self> {
        if atom >= space.len() {
            return Err(Error::Dimension(format!("atom {atom} out of range")));
        }
        let mut m = Self::zero(space);
        m.values[atom] = 1.0;
        Ok(m)
    }

    /// Mass per cell of a density sampled at the grid atoms.
    pub fn from_density(space: Arc<StateSpace>, density: &[f64]) -> Result<Self> {
        check_len(&space, density)?;
        let weights = space
            .weights()
            .ok_or_else(|| Error::Precondition("density needs quadrature weights".into()))?;
        let values = density.iter().zip(weights).map(|(d, w)| d * w).collect();
        Ok(SignedMeasure { space, values })
    }

    pub fn space(&self) -> &Arc<StateSpace> {
        &self.space
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_nonnegative(&self) -> bool {
        self.values.iter().all(|&v| v >= 0.0)
    }

    pub fn total_mass(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn abs(&self) -> SignedMeasure {
        SignedMeasure {
            space: self.space.clone(),
            values: self.values.iter().map(|v| v.abs()).collect(),
        }
    }

    pub fn scaled(&self, s: f64) -> SignedMeasure {
        SignedMeasure { space: self.space.clone(), values: self.values.iter().map(|v| v * s).collect() }
    }

    pub fn add(&self, other: &SignedMeasure) -> Result<SignedMeasure> {
        ensure_same(&self.space, &other.space, "measure sum")?;
        Ok(SignedMeasure {
            space: self.space.clone(),
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn sub(&self, other: &SignedMeasure) -> Result<SignedMeasure> {
        self.add(&other.scaled(-1.0))
    }

    pub fn to_document(&self) -> ValueDocument {
        ValueDocument::new(&self.space, self.values.clone())
    }
}

/// A bounded real function on the atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundedFunction {
    space: Arc<StateSpace>,
    values: Vec<f64>,
}

impl BoundedFunction {
    pub fn new(space: Arc<StateSpace>, values: Vec<f64>) -> Result<Self> {
        check_len(&space, &values)?;
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Precondition(format!("function value {v} is not finite")));
        }
        Ok(BoundedFunction { space, values })
    }

    pub fn constant(space: Arc<StateSpace>, c: f64) -> Self {
        let n = space.len();
        BoundedFunction { space, values: vec![c; n] }
    }

    pub fn indicator(space: Arc<StateSpace>, atom: usize) -> Result<Self> {
        if atom >= space.len() {
            return Err(Error::Dimension(format!("atom {atom} out of range")));
        }
        let mut f = Self::constant(space, 0.0);
        f.values[atom] = 1.0;
        Ok(f)
    }

    /// Samples `g` at the atom positions.
    pub fn sample(space: Arc<StateSpace>, g: impl Fn(f64) -> f64) -> Result<Self> {
        let emb = space
            .embedding()
            .ok_or_else(|| Error::Precondition("sampling needs an embedding".into()))?;
        let values = emb.iter().map(|c| g(c.position())).collect();
        Self::new(space, values)
    }

    pub fn space(&self) -> &Arc<StateSpace> {
        &self.space
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn sub(&self, other: &BoundedFunction) -> Result<BoundedFunction> {
        ensure_same(&self.space, &other.space, "function difference")?;
        Ok(BoundedFunction {
            space: self.space.clone(),
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn to_document(&self) -> ValueDocument {
        ValueDocument::new(&self.space, self.values.clone())
    }
}

/// Finite stand-in for a compact subset: a non-empty set of atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct CompactWindow {
    space: Arc<StateSpace>,
    members: Vec<bool>,
}

impl CompactWindow {
    pub fn new(space: Arc<StateSpace>, members: Vec<bool>) -> Result<Self> {
        if members.len() != space.len() {
            return Err(Error::Dimension(format!(
                "window has {} flags for {} atoms",
                members.len(),
                space.len()
            )));
        }
        if !members.iter().any(|&m| m) {
            return Err(Error::Precondition("compact window is empty".into()));
        }
        Ok(CompactWindow { space, members })
    }

    pub fn whole(space: Arc<StateSpace>) -> Self {
        let n = space.len();
        CompactWindow { space, members: vec![true; n] }
    }

    /// Non-escape atoms with `lo <= position <= hi`.
    pub fn interval(space: Arc<StateSpace>, lo: f64, hi: f64) -> Result<Self> {
        let emb = space
            .embedding()
            .ok_or_else(|| Error::Precondition("window by position needs an embedding".into()))?;
        let members = emb
            .iter()
            .enumerate()
            .map(|(i, c)| !space.is_escape(i) && c.position() >= lo && c.position() <= hi)
            .collect();
        Self::new(space, members)
    }

    /// Non-escape atoms with `|position| <= radius`.
    pub fn radius(space: Arc<StateSpace>, radius: f64) -> Result<Self> {
        Self::interval(space, -radius, radius)
    }

    pub fn space(&self) -> &Arc<StateSpace> {
        &self.space
    }

    pub fn contains(&self, i: usize) -> bool {
        self.members[i]
    }

    pub fn members(&self) -> impl Iterator<Item = usize> + '_ {
        self.members.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i)
    }
}

/// `⟨μ, f⟩ = Σ_x f(x) μ({x})`.
pub fn pairing(mu: &SignedMeasure, f: &BoundedFunction) -> Result<f64> {
    ensure_same(&mu.space, &f.space, "pairing")?;
    Ok(dot(&mu.values, &f.values))
}

/// Total variation norm: the sum of absolute atom masses.
pub fn tv_norm(mu: &SignedMeasure) -> f64 {
    l1(&mu.values)
}

pub fn sup_norm(f: &BoundedFunction) -> f64 {
    linf(&f.values)
}

/// Sup of `|f|` over the window atoms.
pub fn window_seminorm(f: &BoundedFunction, w: &CompactWindow) -> Result<f64> {
    ensure_same(&f.space, &w.space, "window seminorm")?;
    Ok(window_max(&f.values, w))
}

pub(crate) fn window_max(values: &[f64], w: &CompactWindow) -> f64 {
    w.members().fold(0.0, |m, i| m.max(values[i].abs()))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        s += x * y;
    }
    s
}

pub(crate) fn l1(v: &[f64]) -> f64 {
    let mut s = 0.0;
    for x in v {
        s += x.abs();
    }
    s
}

pub(crate) fn linf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// JSON form of a measure or function: the space plus one value per atom.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValueDocument {
    pub atoms: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<Vec<Coordinate>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub escape: Vec<usize>,
    pub values: Vec<f64>,
}

impl ValueDocument {
    fn new(space: &StateSpace, values: Vec<f64>) -> Self {
        ValueDocument {
            atoms: space.atoms.clone(),
            embedding: space.embedding.clone(),
            weights: space.weights.clone(),
            escape: space.escape.clone(),
            values,
        }
    }

    pub fn space(&self) -> Result<StateSpace> {
        StateSpace::try_from(RawSpace {
            atoms: self.atoms.clone(),
            embedding: self.embedding.clone(),
            weights: self.weights.clone(),
            escape: self.escape.clone(),
        })
    }

    pub fn into_measure(self) -> Result<SignedMeasure> {
        let space = Arc::new(self.space()?);
        SignedMeasure::new(space, self.values)
    }

    pub fn into_function(self) -> Result<BoundedFunction> {
        let space = Arc::new(self.space()?);
        BoundedFunction::new(space, self.values)
    }

    /// One atom per row: `atom,component,x,value` (empty cells when the
    /// space has no embedding).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["atom", "component", "x", "value"])?;
        for (i, atom) in self.atoms.iter().enumerate() {
            let (k, x) = match self.embedding.as_ref().map(|e| e[i]) {
                Some(Coordinate::Line(x)) => (String::new(), x.to_string()),
                Some(Coordinate::Component(k, x)) => (k.to_string(), x.to_string()),
                None => (String::new(), String::new()),
            };
            w.write_record([atom.as_str(), &k, &x, &self.values[i].to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}
