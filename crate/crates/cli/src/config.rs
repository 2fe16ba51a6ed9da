//! Scenario configuration: TOML documents with a JSON-equivalent schema.
//!
//! ```toml
//! [[scenario]]
//! name = "two-block"
//! kind = "raw_generator"
//! problem = { generator = [[-1, 1, 0, 0], [1, -1, 0, 0], [0, 0, -2, 2], [0, 0, 3, -3]] }
//!
//! [[scenario.plan]]
//! op = "doob"
//! expect = { rank_one_predicted = false, fix_dimension = 2 }
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use semiflow_core::coupled::LemmaMode;
use semiflow_core::elliptic::{Domain, FarField, LyapunovKind, Preset};
use serde::de::{self, MapAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize};

use crate::expr::Expr;

/// Rank threshold of the fixed-space computations.
pub const DEFAULT_RANK_TOL: f64 = 1e-9;
/// Distance below which a diagnostics orbit counts as converged.
pub const DEFAULT_DIAGNOSTICS_TOL: f64 = 1e-6;
/// Hard cap on the diagnostics horizon.
pub const DEFAULT_CAP: f64 = 1048576.0;

/// A configuration that failed to parse or validate.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub origin: String,
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub message: String,
}

impl ConfigError {
    pub fn new(origin: &str, message: impl Into<String>) -> Self {
        ConfigError { origin: origin.to_string(), line: None, column: None, message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.line, self.column) {
            (Some(l), Some(c)) => write!(f, "{}:{l}:{c}: {}", self.origin, self.message),
            _ => write!(f, "{}: {}", self.origin, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    scenario: Vec<Scenario>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub kind: Kind,
    pub problem: ProblemDoc,
    pub plan: Vec<Operation>,
    /// Output subdirectory; defaults to the scenario name.
    #[serde(default)]
    pub output: Option<String>,
    /// Directory that relative matrix paths are resolved against.
    #[serde(skip)]
    pub base: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    RawKernel,
    RawGenerator,
    Elliptic,
    Coupled,
}

impl Kind {
    pub fn is_continuous(self) -> bool {
        !matches!(self, Kind::RawKernel)
    }

    pub fn has_positions(self) -> bool {
        matches!(self, Kind::Elliptic | Kind::Coupled)
    }
}

/// Problem payload; which fields apply depends on the scenario kind.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemDoc {
    /// Dense step kernel (`raw_kernel`).
    pub kernel: Option<Vec<Vec<f64>>>,
    /// Dense generator (`raw_generator`).
    pub generator: Option<Vec<Vec<f64>>>,
    /// Matrix file instead of an inline matrix: dense CSV or a JSON envelope.
    pub path: Option<String>,
    /// Escape atoms of an inline generator.
    #[serde(default)]
    pub escape: Vec<usize>,
    pub atoms: Option<Vec<String>>,
    pub preset: Option<Preset>,
    pub a: Option<CoefSpec>,
    pub b: Option<CoefSpec>,
    pub c: Option<CoefSpec>,
    pub domain: Option<Domain>,
    pub truncation: Option<f64>,
    pub n: Option<usize>,
    pub far_field: Option<FarField>,
    /// Scalar operator of a coupled system.
    pub scalar: Option<EllipticDoc>,
    pub potential: Option<PotentialDoc>,
}

impl ProblemDoc {
    fn has_elliptic_fields(&self) -> bool {
        self.preset.is_some()
            || self.a.is_some()
            || self.b.is_some()
            || self.c.is_some()
            || self.domain.is_some()
            || self.truncation.is_some()
            || self.n.is_some()
            || self.far_field.is_some()
    }

    /// The elliptic payload of an `elliptic` scenario.
    pub fn elliptic_doc(&self) -> Result<EllipticDoc, String> {
        Ok(EllipticDoc {
            preset: self.preset.clone(),
            a: self.a.clone(),
            b: self.b.clone(),
            c: self.c.clone(),
            domain: self.domain,
            truncation: self.truncation.ok_or("missing `truncation`")?,
            n: self.n.ok_or("missing `n`")?,
            far_field: self.far_field,
        })
    }
}

/// Elliptic problem: a named preset, or explicit coefficients and a domain.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EllipticDoc {
    pub preset: Option<Preset>,
    pub a: Option<CoefSpec>,
    pub b: Option<CoefSpec>,
    pub c: Option<CoefSpec>,
    pub domain: Option<Domain>,
    pub truncation: f64,
    pub n: usize,
    pub far_field: Option<FarField>,
}

impl EllipticDoc {
    fn check(&self) -> Result<(), String> {
        let explicit = self.a.is_some() || self.b.is_some() || self.c.is_some() || self.domain.is_some();
        match (&self.preset, explicit) {
            (Some(_), true) => Err("give either `preset` or explicit coefficients, not both".into()),
            (None, false) => Err("missing `preset` or explicit coefficients `a`, `b`, `domain`".into()),
            (None, true) if self.a.is_none() || self.b.is_none() || self.domain.is_none() => {
                Err("explicit problems need `a`, `b` and `domain`".into())
            }
            _ => Ok(()),
        }
    }
}

/// Coefficient: a number, an expression in `x`, or `{ num, den }` ascending
/// polynomial coefficients of a rational function.
#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum CoefSpec {
    Number(f64),
    Expr(Expr),
    Rational { num: Vec<f64>, den: Vec<f64> },
}

impl<'de> Deserialize<'de> for CoefSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;

        impl<'de> Visitor<'de> for V {
            type Value = CoefSpec;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a number, an expression in x, or a table { num, den }")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<CoefSpec, E> {
                Ok(CoefSpec::Number(v))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<CoefSpec, E> {
                Ok(CoefSpec::Number(v as f64))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<CoefSpec, E> {
                Ok(CoefSpec::Number(v as f64))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<CoefSpec, E> {
                Expr::parse(v).map(CoefSpec::Expr).map_err(E::custom)
            }

            fn visit_map<A: MapAccess<'de>>(self, map: A) -> Result<CoefSpec, A::Error> {
                #[derive(Deserialize)]
                #[serde(deny_unknown_fields)]
                struct Rational {
                    num: Vec<f64>,
                    #[serde(default = "unit")]
                    den: Vec<f64>,
                }
                let r = Rational::deserialize(de::value::MapAccessDeserializer::new(map))?;
                Ok(CoefSpec::Rational { num: r.num, den: r.den })
            }
        }

        d.deserialize_any(V)
    }
}

fn unit() -> Vec<f64> {
    vec![1.0]
}

/// Coupling matrix `C(x)`: exactly one of the fields.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialDoc {
    /// Two components exchanging mass at this rate.
    pub exchange: Option<CoefSpec>,
    /// `m` uncoupled components.
    pub zero: Option<usize>,
    pub partial: Option<PartialDoc>,
    /// Explicit `m × m` array.
    pub matrix: Option<Vec<Vec<CoefSpec>>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialDoc {
    pub m: usize,
    pub coupled: Vec<usize>,
    pub rate: CoefSpec,
}

/// Measure probe: a point mass at an atom or at the grid point nearest `at`,
/// or a sampled profile normalized to unit total variation. In coupled
/// scenarios a probe without `component` is repeated on every component.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureProbe {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub atom: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub at: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub density: Option<Expr>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub component: Option<usize>,
}

/// Function probe: a constant, the indicator of an atom, or a sampled
/// expression. Component handling as for measure probes.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionProbe {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constant: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub indicator: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expr: Option<Expr>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub component: Option<usize>,
}

/// Comparison of a grid vector with a closed form on `[window[0], window[1]]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Compare {
    pub expr: Expr,
    pub window: [f64; 2],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LemmaCase {
    pub mode: LemmaMode,
    pub matrix: Vec<Vec<f64>>,
}

/// Expected value of one result field. Numbers compare exactly unless given
/// as a `{ min, max }` range or `{ approx, tol }`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Expectation {
    Bool(bool),
    Int(i64),
    Float(f64),
    Text(String),
    Range(Range),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub approx: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
}

/// Assertions keyed by a dotted path into the operation result.
pub type Expect = BTreeMap<String, Expectation>;

fn rank_tol() -> f64 {
    DEFAULT_RANK_TOL
}

fn diagnostics_tol() -> f64 {
    DEFAULT_DIAGNOSTICS_TOL
}

fn cap() -> f64 {
    DEFAULT_CAP
}

fn one() -> f64 {
    1.0
}

fn default_horizon() -> f64 {
    16.0
}

fn bounded_horizon() -> f64 {
    4096.0
}

fn eight() -> usize {
    8
}

fn thirteen() -> usize {
    13
}

fn heat_h() -> f64 {
    0.5
}

fn heat_samples() -> usize {
    24
}

/// One step of the analysis plan.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum Operation {
    /// Fixed spaces and whether the fixed measures separate the fixed functions.
    Separation {
        #[serde(default = "rank_tol")]
        tol: f64,
        #[serde(default)]
        expect: Expect,
    },
    /// Eigenvalue reference for continuous-time convergence.
    Oracle {
        #[serde(default)]
        expect: Expect,
    },
    /// Limit projection; its kernel is written next to the report.
    Project {
        #[serde(default = "rank_tol")]
        tol: f64,
        #[serde(default)]
        expect: Expect,
    },
    /// Invariant measure dominating the rows of `S_{t0}`.
    Doob {
        #[serde(default = "one")]
        t0: f64,
        #[serde(default = "rank_tol")]
        tol: f64,
        #[serde(default)]
        expect: Expect,
    },
    /// Orbits of the probes at doubling horizons; one CSV per probe pair.
    Diagnose {
        #[serde(default = "default_horizon")]
        horizon: f64,
        #[serde(default = "diagnostics_tol")]
        tol: f64,
        #[serde(default = "cap")]
        cap: f64,
        #[serde(default = "eight")]
        samples: usize,
        #[serde(default = "rank_tol")]
        rank_tol: f64,
        #[serde(default)]
        measures: Vec<MeasureProbe>,
        #[serde(default)]
        functions: Vec<FunctionProbe>,
        #[serde(default)]
        window: Option<[f64; 2]>,
        #[serde(default)]
        expect: Expect,
    },
    /// `‖S_t μ − Pμ‖` against `amplitude · e^(−rate t)`.
    OrbitDecay {
        measure: MeasureProbe,
        times: Vec<f64>,
        rate: f64,
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default = "rank_tol")]
        tol: f64,
        #[serde(default)]
        expect: Expect,
    },
    /// Empirical `sup_t ‖S_t‖`.
    Boundedness {
        #[serde(default = "bounded_horizon")]
        horizon: f64,
        #[serde(default = "thirteen")]
        samples: usize,
        #[serde(default)]
        expect: Expect,
    },
    /// Mass absorbed at the truncation ends from a point mass at `at`.
    Leak {
        at: f64,
        #[serde(default = "default_horizon")]
        horizon: f64,
        #[serde(default = "eight")]
        samples: usize,
        #[serde(default)]
        expect: Expect,
    },
    /// Perron fixed measure against standard Gaussian cell masses.
    GaussianStationary {
        #[serde(default)]
        expect: Expect,
    },
    /// Null space of the generator, optionally fitted to a closed form.
    Liouville {
        #[serde(default = "rank_tol")]
        tol: f64,
        #[serde(default)]
        compare: Option<Compare>,
        #[serde(default)]
        expect: Expect,
    },
    /// `lim T_t f` from the limit projection, compared with a closed form.
    Limit {
        function: FunctionProbe,
        compare: Compare,
        #[serde(default = "rank_tol")]
        tol: f64,
        #[serde(default)]
        expect: Expect,
    },
    /// Lyapunov inequality for `v` on the grid.
    Lyapunov {
        certificate: LyapunovKind,
        v: Expr,
        #[serde(default)]
        expect: Expect,
    },
    /// Stencil residual of `u` on refined grids and the observed orders.
    Consistency {
        u: Expr,
        #[serde(default)]
        grids: Vec<usize>,
        #[serde(default)]
        expect: Expect,
    },
    /// Heat orbit of the annuli indicator at the origin.
    HeatProbe {
        truncation: f64,
        #[serde(default = "heat_h")]
        h: f64,
        #[serde(default = "heat_samples")]
        samples: usize,
        #[serde(default)]
        expect: Expect,
    },
    /// Structural hypotheses of the coupling matrix.
    Hypotheses {
        #[serde(default)]
        expect: Expect,
    },
    /// Fixed vectors of the coupled semigroup and their product structure.
    InvariantStructure {
        #[serde(default)]
        expect: Expect,
    },
    /// `dim F` against the rank of the limit projection.
    RankLaw {
        #[serde(default)]
        expect: Expect,
    },
    /// Fixed spaces of `e^{tA}` and its adjoint for explicit matrices.
    MatrixLemmas {
        cases: Vec<LemmaCase>,
        #[serde(default)]
        expect: Expect,
    },
}

impl Operation {
    pub fn name(&self) -> &'static str {
        match self {
            Operation::Separation { .. } => "separation",
            Operation::Oracle { .. } => "oracle",
            Operation::Project { .. } => "project",
            Operation::Doob { .. } => "doob",
            Operation::Diagnose { .. } => "diagnose",
            Operation::OrbitDecay { .. } => "orbit_decay",
            Operation::Boundedness { .. } => "boundedness",
            Operation::Leak { .. } => "leak",
            Operation::GaussianStationary { .. } => "gaussian_stationary",
            Operation::Liouville { .. } => "liouville",
            Operation::Limit { .. } => "limit",
            Operation::Lyapunov { .. } => "lyapunov",
            Operation::Consistency { .. } => "consistency",
            Operation::HeatProbe { .. } => "heat_probe",
            Operation::Hypotheses { .. } => "hypotheses",
            Operation::InvariantStructure { .. } => "invariant_structure",
            Operation::RankLaw { .. } => "rank_law",
            Operation::MatrixLemmas { .. } => "matrix_lemmas",
        }
    }

    pub fn expect(&self) -> &Expect {
        match self {
            Operation::Separation { expect, .. }
            | Operation::Oracle { expect }
            | Operation::Project { expect, .. }
            | Operation::Doob { expect, .. }
            | Operation::Diagnose { expect, .. }
            | Operation::OrbitDecay { expect, .. }
            | Operation::Boundedness { expect, .. }
            | Operation::Leak { expect, .. }
            | Operation::GaussianStationary { expect }
            | Operation::Liouville { expect, .. }
            | Operation::Limit { expect, .. }
            | Operation::Lyapunov { expect, .. }
            | Operation::Consistency { expect, .. }
            | Operation::HeatProbe { expect, .. }
            | Operation::Hypotheses { expect }
            | Operation::InvariantStructure { expect }
            | Operation::RankLaw { expect }
            | Operation::MatrixLemmas { expect, .. } => expect,
        }
    }

    /// Tolerances named by this step, for the provenance block.
    pub fn tolerances(&self) -> Vec<(&'static str, f64)> {
        match self {
            Operation::Separation { tol, .. }
            | Operation::Project { tol, .. }
            | Operation::Doob { tol, .. }
            | Operation::OrbitDecay { tol, .. }
            | Operation::Liouville { tol, .. }
            | Operation::Limit { tol, .. } => vec![("rank_tol", *tol)],
            Operation::Diagnose { tol, rank_tol, cap, .. } => {
                vec![("diagnostics_tol", *tol), ("rank_tol", *rank_tol), ("cap", *cap)]
            }
            _ => vec![],
        }
    }

    fn measure_probes(&self) -> Vec<&MeasureProbe> {
        match self {
            Operation::Diagnose { measures, .. } => measures.iter().collect(),
            Operation::OrbitDecay { measure, .. } => vec![measure],
            _ => vec![],
        }
    }

    fn function_probes(&self) -> Vec<&FunctionProbe> {
        match self {
            Operation::Diagnose { functions, .. } => functions.iter().collect(),
            Operation::Limit { function, .. } => vec![function],
            _ => vec![],
        }
    }

    /// Kinds this operation applies to.
    fn admits(&self, kind: Kind) -> bool {
        match self {
            Operation::Oracle { .. } | Operation::Liouville { .. } => kind.is_continuous(),
            Operation::Leak { .. } | Operation::Limit { .. } => kind.has_positions(),
            Operation::GaussianStationary { .. } | Operation::Lyapunov { .. } | Operation::Consistency { .. } => {
                kind == Kind::Elliptic
            }
            Operation::Hypotheses { .. } | Operation::InvariantStructure { .. } | Operation::RankLaw { .. } => {
                kind == Kind::Coupled
            }
            _ => true,
        }
    }
}

fn line_column(source: &str, offset: usize) -> (usize, usize) {
    let before = &source[..offset.min(source.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

/// Parses and validates a configuration document.
pub fn parse_config(source: &str, origin: &str, base: &Path) -> Result<Vec<Scenario>, ConfigError> {
    let file: ConfigFile = toml::from_str(source).map_err(|e| {
        let (line, column) = e.span().map(|s| line_column(source, s.start)).unzip();
        ConfigError { origin: origin.to_string(), line, column, message: e.message().trim().to_string() }
    })?;
    let mut scenarios = file.scenario;
    for s in &mut scenarios {
        s.base = base.to_path_buf();
    }
    validate(&scenarios).map_err(|m| ConfigError::new(origin, m))?;
    Ok(scenarios)
}

pub fn load_config(path: &Path) -> Result<Vec<Scenario>, ConfigError> {
    let origin = path.display().to_string();
    let source = std::fs::read_to_string(path).map_err(|e| ConfigError::new(&origin, e.to_string()))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_config(&source, &origin, &base)
}

fn valid_name(name: &str) -> bool {
    !name.is_empty()
        && !name.starts_with('.')
        && name.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

/// Run-level invariants: unique names, non-empty plans, payloads matching
/// the kind and operations admitted by it.
pub fn validate(scenarios: &[Scenario]) -> Result<(), String> {
    if scenarios.is_empty() {
        return Err("no scenarios".into());
    }
    let mut names = BTreeSet::new();
    let mut outputs = BTreeSet::new();
    for s in scenarios {
        let ctx = |m: String| format!("scenario `{}`: {m}", s.name);
        if !valid_name(&s.name) {
            return Err(ctx("names use letters, digits, `-`, `_` and `.`".into()));
        }
        if !names.insert(s.name.as_str()) {
            return Err(ctx("duplicate name".into()));
        }
        if let Some(out) = &s.output {
            if !valid_name(out) {
                return Err(ctx(format!("invalid output directory {out:?}")));
            }
        }
        if !outputs.insert(s.output.as_deref().unwrap_or(&s.name)) {
            return Err(ctx("output directory shared with another scenario".into()));
        }
        if s.plan.is_empty() {
            return Err(ctx("empty plan".into()));
        }
        check_problem(s.kind, &s.problem).map_err(ctx)?;
        for (i, op) in s.plan.iter().enumerate() {
            check_operation(s.kind, op).map_err(|m| ctx(format!("step {i} ({}): {m}", op.name())))?;
        }
    }
    Ok(())
}

fn check_problem(kind: Kind, p: &ProblemDoc) -> Result<(), String> {
    let raw = p.kernel.is_some() || p.generator.is_some() || p.path.is_some() || !p.escape.is_empty() || p.atoms.is_some();
    let coupled = p.scalar.is_some() || p.potential.is_some();
    let elliptic = p.has_elliptic_fields();
    match kind {
        Kind::RawKernel | Kind::RawGenerator => {
            if elliptic || coupled {
                return Err("raw problems take `kernel`/`generator` or `path` only".into());
            }
            let inline = if kind == Kind::RawKernel { p.kernel.is_some() } else { p.generator.is_some() };
            let wrong = if kind == Kind::RawKernel { p.generator.is_some() } else { p.kernel.is_some() };
            if wrong {
                return Err("matrix field does not match the kind".into());
            }
            if inline == p.path.is_some() {
                return Err("give exactly one of an inline matrix or `path`".into());
            }
            if kind == Kind::RawKernel && !p.escape.is_empty() {
                return Err("escape atoms belong to generators".into());
            }
            Ok(())
        }
        Kind::Elliptic => {
            if raw || coupled {
                return Err("elliptic problems take coefficient fields only".into());
            }
            p.elliptic_doc()?.check()
        }
        Kind::Coupled => {
            if raw || elliptic {
                return Err("coupled problems take `scalar` and `potential` only".into());
            }
            p.scalar.as_ref().ok_or("missing `scalar`")?.check()?;
            let pot = p.potential.as_ref().ok_or("missing `potential`")?;
            let set = [pot.exchange.is_some(), pot.zero.is_some(), pot.partial.is_some(), pot.matrix.is_some()];
            if set.iter().filter(|&&b| b).count() != 1 {
                return Err("`potential` takes exactly one of exchange, zero, partial, matrix".into());
            }
            Ok(())
        }
    }
}

fn check_operation(kind: Kind, op: &Operation) -> Result<(), String> {
    if !op.admits(kind) {
        return Err(format!("not available for {kind:?} scenarios"));
    }
    for m in op.measure_probes() {
        let set = [m.atom.is_some(), m.at.is_some(), m.density.is_some()];
        if set.iter().filter(|&&b| b).count() != 1 {
            return Err("measure probes take exactly one of atom, at, density".into());
        }
        if (m.at.is_some() || m.density.is_some()) && !kind.has_positions() {
            return Err("`at`/`density` probes need a grid".into());
        }
        if m.component.is_some() && kind != Kind::Coupled {
            return Err("`component` applies to coupled scenarios".into());
        }
    }
    for f in op.function_probes() {
        let set = [f.constant.is_some(), f.indicator.is_some(), f.expr.is_some()];
        if set.iter().filter(|&&b| b).count() != 1 {
            return Err("function probes take exactly one of constant, indicator, expr".into());
        }
        if f.expr.is_some() && !kind.has_positions() {
            return Err("`expr` probes need a grid".into());
        }
        if f.component.is_some() && kind != Kind::Coupled {
            return Err("`component` applies to coupled scenarios".into());
        }
    }
    match op {
        Operation::Diagnose { window: Some(_), .. } if !kind.has_positions() => {
            return Err("`window` needs a grid".into());
        }
        Operation::Liouville { compare: Some(_), .. } if kind != Kind::Elliptic => {
            return Err("`compare` needs an elliptic grid".into());
        }
        Operation::OrbitDecay { times, .. } if times.is_empty() => return Err("no times".into()),
        Operation::MatrixLemmas { cases, .. } if cases.is_empty() => return Err("no cases".into()),
        _ => {}
    }
    for (key, e) in op.expect() {
        if let Expectation::Range(r) = e {
            let ok = match (r.approx, r.tol) {
                (Some(_), Some(t)) => t >= 0.0 && r.min.is_none() && r.max.is_none(),
                (None, None) => r.min.is_some() || r.max.is_some(),
                _ => false,
            };
            if !ok {
                return Err(format!("expectation `{key}` takes `{{ min, max }}` or `{{ approx, tol }}`"));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(src: &str) -> Result<Vec<Scenario>, ConfigError> {
        parse_config(src, "test.toml", Path::new("."))
    }

    const SWAP: &str = r#"
[[scenario]]
name = "swap"
kind = "raw_generator"
problem = { generator = [[-1, 1], [1, -1]] }

[[scenario.plan]]
op = "separation"
expect = { predicted_convergence = true, rank = 1 }
"#;

    #[test]
    fn parses_a_minimal_scenario() {
        let s = parse(SWAP).unwrap();
        assert_eq!(s[0].kind, Kind::RawGenerator);
        match &s[0].plan[0] {
            Operation::Separation { tol, expect } => {
                assert_eq!(*tol, DEFAULT_RANK_TOL);
                assert_eq!(expect.len(), 2);
            }
            op => panic!("{op:?}"),
        }
    }

    #[test]
    fn syntax_errors_carry_line_and_column() {
        let e = parse("[[scenario]]\nname = \"x\"\nkind = = 3\n").unwrap_err();
        assert_eq!(e.line, Some(3));
        assert!(e.column.is_some());
        assert!(e.to_string().starts_with("test.toml:3:"), "{e}");
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let src = SWAP.replace("op = \"separation\"", "op = \"separation\"\ntolerance = 1e-3");
        let e = parse(&src).unwrap_err();
        assert!(e.message.contains("tolerance"), "{e}");
        assert!(e.line.is_some());
    }

    #[test]
    fn unknown_presets_are_rejected() {
        let src = r#"
[[scenario]]
name = "x"
kind = "elliptic"
problem = { preset = { name = "nope" }, truncation = 5.0, n = 40 }
plan = [{ op = "separation" }]
"#;
        let e = parse(src).unwrap_err();
        assert!(e.message.contains("nope"), "{e}");
    }

    #[test]
    fn run_invariants_are_enforced() {
        let dup = format!("{SWAP}\n{SWAP}");
        assert!(parse(&dup).unwrap_err().message.contains("duplicate"));
        let empty = "[[scenario]]\nname = \"x\"\nkind = \"raw_kernel\"\nproblem = { kernel = [[1]] }\nplan = []\n";
        assert!(parse(empty).unwrap_err().message.contains("empty plan"));
        let wrong = SWAP.replace("op = \"separation\"", "op = \"hypotheses\"");
        assert!(parse(&wrong).unwrap_err().message.contains("not available"));
        let mixed = SWAP.replace("generator = ", "kernel = ");
        assert!(parse(&mixed).is_err());
    }

    #[test]
    fn coefficients_accept_numbers_expressions_and_rationals() {
        let src = r#"
[[scenario]]
name = "x"
kind = "elliptic"
problem = { a = 1, b = "-x", c = { num = [0.0] }, domain = { type = "whole_line" }, truncation = 5.0, n = 41 }
plan = [{ op = "separation" }]
"#;
        let s = parse(src).unwrap();
        let f = &s[0].problem;
        assert!(matches!(f.a, Some(CoefSpec::Number(v)) if v == 1.0));
        assert!(matches!(f.b, Some(CoefSpec::Expr(_))));
        assert!(matches!(&f.c, Some(CoefSpec::Rational { den, .. }) if den == &vec![1.0]));
        let bad = src.replace("\"-x\"", "\"-y\"");
        assert!(parse(&bad).is_err());
    }

    #[test]
    fn ranges_need_a_bound() {
        let src = SWAP.replace("rank = 1", "rank = { tol = 1 }");
        assert!(parse(&src).unwrap_err().message.contains("expectation"));
    }
}
