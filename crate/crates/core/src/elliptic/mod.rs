//! Positivity-preserving finite differences for `Au = a u″ + b u′ + c u` on
//! a line, half-line, interval or the radial line of an exterior domain.

mod coefficient;
mod lyapunov;
mod probes;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{CompactWindow, StateSpace};
use crate::semigroup::{GeneratorMatrix, Semigroup};

pub use coefficient::{Coefficient, CustomFn};
pub use lyapunov::{check_lyapunov, liouville_check, LiouvilleReport, LyapunovCertificate, LyapunovKind};
pub use probes::{
    annuli_indicator, boundary_leak, consistency_residual, gaussian_cell_masses, heat_probe, HeatProbe,
};

pub const MIN_GRID: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Domain {
    /// `ℝ`, truncated to `[−L, L]`.
    WholeLine,
    /// `(left, ∞)` with a Dirichlet condition at `left`, truncated at `L`.
    HalfLine { left: f64 },
    /// `(left, right)` with Dirichlet conditions at both ends.
    Interval { left: f64, right: f64 },
    /// Radial line `ρ > radius` of `{|x| > radius} ⊂ ℝ^d`, Dirichlet at the
    /// sphere, truncated at `ρ = L`.
    RadialExterior { dimension: u32, radius: f64 },
}

/// Treatment of a truncation end that stands in for infinity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FarField {
    /// Mass reaching the end is killed.
    Absorbing,
    /// Zero-flux ghost node.
    Reflecting,
    /// The end node is an escape atom: a trap standing for the point at infinity.
    Escape,
}

/// How one end of the grid is closed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EndKind {
    Dirichlet,
    Absorbing,
    Reflecting,
    Escape,
}

impl EndKind {
    fn retains_node(self) -> bool {
        matches!(self, EndKind::Reflecting | EndKind::Escape)
    }

    fn is_far_field(self) -> bool {
        !matches!(self, EndKind::Dirichlet)
    }
}

impl From<FarField> for EndKind {
    fn from(f: FarField) -> Self {
        match f {
            FarField::Absorbing => EndKind::Absorbing,
            FarField::Reflecting => EndKind::Reflecting,
            FarField::Escape => EndKind::Escape,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EllipticProblem {
    pub a: Coefficient,
    pub b: Coefficient,
    pub c: Coefficient,
    pub domain: Domain,
    /// Half-width for the whole line, far end otherwise. Ignored for intervals.
    pub truncation: f64,
    /// Number of grid atoms.
    pub n: usize,
    /// Far-end treatment; `None` picks the domain default (absorbing on the
    /// whole line, reflecting on the half-line, escape for exterior domains
    /// with `d ≥ 3` where the process is transient, reflecting for `d ≤ 2`).
    #[serde(default)]
    pub far_field: Option<FarField>,
}

impl EllipticProblem {
    pub fn new(a: Coefficient, b: Coefficient, c: Coefficient, domain: Domain, truncation: f64, n: usize) -> Self {
        EllipticProblem { a, b, c, domain, truncation, n, far_field: None }
    }

    pub fn with_far_field(mut self, far: FarField) -> Self {
        self.far_field = Some(far);
        self
    }

    pub fn with_grid(mut self, n: usize) -> Self {
        self.n = n;
        self
    }

    pub fn far_field(&self) -> FarField {
        self.far_field.unwrap_or(match self.domain {
            Domain::WholeLine | Domain::Interval { .. } => FarField::Absorbing,
            Domain::HalfLine { .. } => FarField::Reflecting,
            Domain::RadialExterior { dimension, .. } if dimension >= 3 => FarField::Escape,
            Domain::RadialExterior { .. } => FarField::Reflecting,
        })
    }

    fn ends(&self) -> Result<(f64, EndKind, f64, EndKind)> {
        let far = EndKind::from(self.far_field());
        let l = self.truncation;
        let (lo, left, hi, right) = match self.domain {
            Domain::WholeLine => (-l, far, l, far),
            Domain::HalfLine { left } => (left, EndKind::Dirichlet, l, far),
            Domain::Interval { left, right } => (left, EndKind::Dirichlet, right, EndKind::Dirichlet),
            Domain::RadialExterior { dimension, radius } => {
                if dimension < 1 || !(radius > 0.0) {
                    return Err(Error::Precondition("exterior domain needs d ≥ 1 and r > 0".into()));
                }
                (radius, EndKind::Dirichlet, l, far)
            }
        };
        if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Precondition(format!("empty or unbounded domain [{lo}, {hi}]")));
        }
        Ok((lo, left, hi, right))
    }

    /// Effective drift, including `a(d − 1)/ρ` on the radial line.
    pub fn drift(&self, x: f64) -> f64 {
        let b = self.b.eval(x);
        match self.domain {
            Domain::RadialExterior { dimension, .. } => b + self.a.eval(x) * (dimension as f64 - 1.0) / x,
            _ => b,
        }
    }
}

/// Per-row stencil: rates to the left and right neighbours and the zeroth
/// order coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StencilRow {
    pub left: f64,
    pub right: f64,
    pub c: f64,
    /// Local truncation order: 2 central, 1 upwind or reflecting, 0 trap.
    pub order: u8,
}

/// Assembled discretization with its grid.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub generator: GeneratorMatrix,
    pub positions: Vec<f64>,
    pub h: f64,
    pub lo: f64,
    pub hi: f64,
    pub left: EndKind,
    pub right: EndKind,
    pub stencil: Vec<StencilRow>,
}

impl Discretization {
    pub fn space(&self) -> &Arc<StateSpace> {
        self.generator.space()
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn semigroup(&self) -> Semigroup {
        Semigroup::continuous(self.generator.clone())
    }

    pub fn upwind_rows(&self) -> usize {
        self.stencil.iter().filter(|r| r.order == 1).count()
    }

    /// Index of the non-escape atom closest to `x`.
    pub fn nearest(&self, x: f64) -> usize {
        let space = self.space();
        (0..self.len())
            .filter(|&i| !space.is_escape(i))
            .min_by(|&i, &j| (self.positions[i] - x).abs().total_cmp(&(self.positions[j] - x).abs()))
            .expect("grid has genuine atoms")
    }

    pub fn window(&self, lo: f64, hi: f64) -> Result<CompactWindow> {
        CompactWindow::interval(self.space().clone(), lo, hi)
    }

    /// Grid samples of `g` (escape atoms included, at their end position).
    pub fn sample(&self, g: impl Fn(f64) -> f64) -> Vec<f64> {
        self.positions.iter().map(|&x| g(x)).collect()
    }

    /// Whether row `i` lies next to a truncation end (within two nodes).
    pub fn near_far_end(&self, i: usize) -> bool {
        (self.left.is_far_field() && i < 2) || (self.right.is_far_field() && i + 2 >= self.len())
    }
}

/// Generator of the discretized operator.
pub fn assemble(p: &EllipticProblem) -> Result<GeneratorMatrix> {
    Ok(discretize(p)?.generator)
}

/// Assembles the generator with central differences where `h|b| ≤ 2a` and
/// upwind differences elsewhere, so that off-diagonal rates are never negative.
pub fn discretize(p: &EllipticProblem) -> Result<Discretization> {
    let n = p.n;
    if n < MIN_GRID {
        return Err(Error::Precondition(format!("grid needs at least {MIN_GRID} atoms, got {n}")));
    }
    let (lo, left, hi, right) = p.ends()?;
    let retained = left.retains_node() as usize + right.retains_node() as usize;
    let h = (hi - lo) / (n + 1 - retained) as f64;
    let start = if left.retains_node() { lo } else { lo + h };
    let positions: Vec<f64> = (0..n).map(|i| if i + 1 == n && right.retains_node() { hi } else { start + i as f64 * h }).collect();

    let mut stencil = Vec::with_capacity(n);
    for (i, &x) in positions.iter().enumerate() {
        let a = p.a.eval(x);
        let c = p.c.eval(x);
        if !(a > 0.0) || !a.is_finite() {
            return Err(Error::Precondition(format!("diffusion coefficient a({x}) = {a} is not positive")));
        }
        if !(c <= 1e-12) || !c.is_finite() {
            return Err(Error::Precondition(format!("zeroth-order coefficient c({x}) = {c} must be ≤ 0")));
        }
        let end = if i == 0 && left.retains_node() {
            Some((left, true))
        } else if i + 1 == n && right.retains_node() {
            Some((right, false))
        } else {
            None
        };
        let row = match end {
            Some((EndKind::Escape, _)) => StencilRow { left: 0.0, right: 0.0, c: 0.0, order: 0 },
            Some((_, at_left)) => {
                let r = 2.0 * a / (h * h);
                if at_left {
                    StencilRow { left: 0.0, right: r, c, order: 1 }
                } else {
                    StencilRow { left: r, right: 0.0, c, order: 1 }
                }
            }
            None => {
                let b = p.drift(x);
                if !b.is_finite() {
                    return Err(Error::Precondition(format!("drift b({x}) is not finite")));
                }
                let diff = a / (h * h);
                if h * b.abs() <= 2.0 * a {
                    StencilRow { left: diff - b / (2.0 * h), right: diff + b / (2.0 * h), c, order: 2 }
                } else if b > 0.0 {
                    StencilRow { left: diff, right: diff + b / h, c, order: 1 }
                } else {
                    StencilRow { left: diff - b / h, right: diff, c, order: 1 }
                }
            }
        };
        stencil.push(row);
    }

    let mut rows = Vec::with_capacity(n);
    let mut killing = Vec::with_capacity(n);
    for (i, r) in stencil.iter().enumerate() {
        let mut row = Vec::with_capacity(2);
        let mut kill = -r.c;
        if i > 0 {
            row.push((i - 1, r.left));
        } else {
            kill += r.left;
        }
        if i + 1 < n {
            row.push((i + 1, r.right));
        } else {
            kill += r.right;
        }
        row.retain(|&(_, v)| v != 0.0);
        rows.push(row);
        killing.push(if kill == 0.0 { 0.0 } else { kill });
    }

    let mut escape = Vec::new();
    if left == EndKind::Escape {
        escape.push(0);
    }
    if right == EndKind::Escape {
        escape.push(n - 1);
    }
    let space = StateSpace::grid(&positions, h)?.with_escape(escape)?;
    let generator = GeneratorMatrix::from_rates(Arc::new(space), rows, killing)?;
    Ok(Discretization { generator, positions, h, lo, hi, left, right, stencil })
}

/// `a = 1`, `b = 0`.
pub fn laplace(domain: Domain, truncation: f64, n: usize) -> EllipticProblem {
    EllipticProblem::new(Coefficient::constant(1.0), Coefficient::constant(0.0), Coefficient::constant(0.0), domain, truncation, n)
}

/// Ornstein–Uhlenbeck operator `u″ − x u′` on the whole line; its invariant
/// density is the standard Gaussian.
pub fn ou(truncation: f64, n: usize) -> EllipticProblem {
    EllipticProblem::new(
        Coefficient::constant(1.0),
        Coefficient::polynomial(vec![0.0, -1.0]),
        Coefficient::constant(0.0),
        Domain::WholeLine,
        truncation,
        n,
    )
}

/// `u″ + 2x/(1 + x²) u′`, which annihilates `arctan`. Ends are escape atoms.
pub fn arctan_drift(truncation: f64, n: usize) -> EllipticProblem {
    EllipticProblem::new(
        Coefficient::constant(1.0),
        Coefficient::Rational { num: vec![0.0, 2.0], den: vec![1.0, 0.0, 1.0] },
        Coefficient::constant(0.0),
        Domain::WholeLine,
        truncation,
        n,
    )
    .with_far_field(FarField::Escape)
}

/// `u″ + x² u′` with absorbing ends.
pub fn cubic_drift(truncation: f64, n: usize) -> EllipticProblem {
    EllipticProblem::new(
        Coefficient::constant(1.0),
        Coefficient::polynomial(vec![0.0, 0.0, 1.0]),
        Coefficient::constant(0.0),
        Domain::WholeLine,
        truncation,
        n,
    )
}

/// `u″ + b u′` on `(0, ∞)` with a Dirichlet condition at 0.
pub fn halfline_drift(b: f64, truncation: f64, n: usize) -> EllipticProblem {
    EllipticProblem::new(
        Coefficient::constant(1.0),
        Coefficient::constant(b),
        Coefficient::constant(0.0),
        Domain::HalfLine { left: 0.0 },
        truncation,
        n,
    )
}

/// Radial Laplacian outside the ball of radius `r` in `ℝ^d`.
pub fn radial_exterior(dimension: u32, radius: f64, truncation: f64, n: usize) -> EllipticProblem {
    EllipticProblem::new(
        Coefficient::constant(1.0),
        Coefficient::constant(0.0),
        Coefficient::constant(0.0),
        Domain::RadialExterior { dimension, radius },
        truncation,
        n,
    )
}

/// Named coefficient presets for configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Preset {
    Laplace {
        #[serde(default = "whole_line")]
        domain: Domain,
    },
    Ou,
    ArctanDrift,
    CubicDrift,
    HalflineDrift { b: f64 },
    RadialExterior { dimension: u32, radius: f64 },
}

fn whole_line() -> Domain {
    Domain::WholeLine
}

/// A problem described by a preset name or by explicit coefficients.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProblemSpec {
    Preset {
        preset: Preset,
        truncation: f64,
        n: usize,
        #[serde(default)]
        far_field: Option<FarField>,
    },
    Explicit(EllipticProblem),
}

impl ProblemSpec {
    pub fn build(&self) -> EllipticProblem {
        match self {
            ProblemSpec::Explicit(p) => p.clone(),
            ProblemSpec::Preset { preset, truncation, n, far_field } => {
                let (l, n) = (*truncation, *n);
                let p = match preset {
                    Preset::Laplace { domain } => laplace(*domain, l, n),
                    Preset::Ou => ou(l, n),
                    Preset::ArctanDrift => arctan_drift(l, n),
                    Preset::CubicDrift => cubic_drift(l, n),
                    Preset::HalflineDrift { b } => halfline_drift(*b, l, n),
                    Preset::RadialExterior { dimension, radius } => radial_exterior(*dimension, *radius, l, n),
                };
                match far_field {
                    Some(f) => p.with_far_field(*f),
                    None => p,
                }
            }
        }
    }
}
