//! Systems of `m` diffusion equations coupled by a matrix potential `C(x)`,
//! modeled as one generator on `{0, .., m−1} × grid`.

mod lemmas;

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{limit_projection, perron_fixed_measure, serialize_columns, DEFAULT_TOL};
use crate::elliptic::{discretize, Coefficient, Discretization, EllipticProblem};
use crate::error::{Error, Result};
use crate::linalg::{self, RankGap, RANK_TOL};
use crate::measure::{l1, CompactWindow, Coordinate, StateSpace};
use crate::semigroup::{GeneratorMatrix, Semigroup};

pub use lemmas::{matrix_lemmas, LemmaMode, MatrixLemmaReport};

/// Upper bound on the symmetric part of `C(x)`.
pub const DISSIPATIVE_TOL: f64 = 1e-10;
/// Lower bound on the off-diagonal entries of `C(x)`.
pub const OFF_DIAGONAL_TOL: f64 = 1e-12;
/// TV distance below which the invariant measure counts as factorized.
pub const FACTOR_TOL: f64 = 1e-4;

/// `m × m` matrix of coefficient functions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixPotential {
    pub entries: Vec<Vec<Coefficient>>,
}

impl MatrixPotential {
    pub fn new(entries: Vec<Vec<Coefficient>>) -> Result<Self> {
        let m = entries.len();
        if m < 2 {
            return Err(Error::Precondition(format!("a coupled system needs m ≥ 2 components, got {m}")));
        }
        if entries.iter().any(|r| r.len() != m) {
            return Err(Error::Dimension("matrix potential is not square".into()));
        }
        Ok(MatrixPotential { entries })
    }

    pub fn constant(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(rows.iter().map(|r| r.iter().map(|&c| Coefficient::constant(c)).collect()).collect())
    }

    pub fn zero(m: usize) -> Result<Self> {
        Self::constant(&vec![vec![0.0; m]; m])
    }

    /// `rate(x) · (−1 1; 1 −1)`.
    pub fn exchange(rate: Coefficient) -> Self {
        Self::partial(2, &[0, 1], rate).expect("two components")
    }

    /// Symmetric exchange at `rate(x)` among the listed components; the
    /// others are uncoupled.
    pub fn partial(m: usize, coupled: &[usize], rate: Coefficient) -> Result<Self> {
        if coupled.iter().any(|&k| k >= m) {
            return Err(Error::Dimension(format!("coupled component out of range for m = {m}")));
        }
        let zero = Coefficient::constant(0.0);
        let s = coupled.len() as f64;
        let entries = (0..m)
            .map(|k| {
                (0..m)
                    .map(|l| match (coupled.contains(&k), coupled.contains(&l)) {
                        (true, true) if k == l => rate.scaled(-(s - 1.0)),
                        (true, true) => rate.clone(),
                        _ => zero.clone(),
                    })
                    .collect()
            })
            .collect();
        Self::new(entries)
    }

    pub fn m(&self) -> usize {
        self.entries.len()
    }

    pub fn eval(&self, x: f64) -> DMatrix<f64> {
        let m = self.m();
        DMatrix::from_fn(m, m, |k, l| self.entries[k][l].eval(x))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoupledProblem {
    pub scalar: EllipticProblem,
    pub potential: MatrixPotential,
}

impl CoupledProblem {
    pub fn new(scalar: EllipticProblem, potential: MatrixPotential) -> Self {
        CoupledProblem { scalar, potential }
    }
}

/// One clause of the coupling hypotheses with its worst sampled value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Clause {
    pub pass: bool,
    pub worst: f64,
    /// Position of the worst sample.
    pub at: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CouplingStructureReport {
    pub m: usize,
    pub samples: usize,
    /// Largest eigenvalue of `(C + Cᵀ)/2` over the samples.
    pub dissipative: Clause,
    /// Smallest off-diagonal entry over the samples.
    pub off_diagonal_nonnegative: Clause,
    /// Some nonzero `ξ` lies in every `ker C(x)`.
    pub common_kernel: Clause,
    pub irreducible: bool,
    /// Edges `k → l` with `c_kl ≢ 0`.
    pub edges: Vec<(usize, usize)>,
    pub dim_f: usize,
    #[serde(serialize_with = "serialize_columns")]
    pub f_basis: DMatrix<f64>,
    pub f_gap: RankGap,
    /// Sign-normalized kernel vector when `dim F = 1`.
    pub xi: Option<Vec<f64>>,
    pub xi_nonnegative: Option<bool>,
}

impl CouplingStructureReport {
    pub fn all_pass(&self) -> bool {
        self.dissipative.pass && self.off_diagonal_nonnegative.pass && self.common_kernel.pass && self.irreducible
    }

    /// `χ(k, x) = ξ_k` on a product grid with `n` positions per component.
    pub fn chi(&self, n: usize) -> Option<Vec<f64>> {
        self.xi.as_ref().map(|xi| xi.iter().flat_map(|&v| std::iter::repeat_n(v, n)).collect())
    }
}

/// Scalar discretization and the assembled product generator. Atom `(k, i)`
/// has index `k·n + i`.
#[derive(Debug, Clone)]
pub struct CoupledDiscretization {
    pub scalar: Discretization,
    pub generator: GeneratorMatrix,
    pub m: usize,
}

impl CoupledDiscretization {
    pub fn n(&self) -> usize {
        self.scalar.len()
    }

    pub fn index(&self, k: usize, i: usize) -> usize {
        k * self.n() + i
    }

    pub fn space(&self) -> &Arc<StateSpace> {
        self.generator.space()
    }

    pub fn semigroup(&self) -> Semigroup {
        Semigroup::continuous(self.generator.clone())
    }

    /// Genuine atoms of every component with position in `[lo, hi]`.
    pub fn window(&self, lo: f64, hi: f64) -> Result<CompactWindow> {
        CompactWindow::interval(self.space().clone(), lo, hi)
    }

    pub fn component<'a>(&self, v: &'a [f64], k: usize) -> &'a [f64] {
        &v[k * self.n()..(k + 1) * self.n()]
    }
}

fn genuine_positions(d: &Discretization) -> Vec<f64> {
    (0..d.len()).filter(|&i| !d.space().is_escape(i)).map(|i| d.positions[i]).collect()
}

/// Checks dissipativity, off-diagonal signs, the common kernel `F` and
/// irreducibility of `C` on the scalar grid. Failures are reported, not raised.
pub fn validate_hypotheses(p: &CoupledProblem) -> Result<CouplingStructureReport> {
    let d = discretize(&p.scalar)?;
    Ok(validate_on(&p.potential, &genuine_positions(&d)))
}

fn validate_on(pot: &MatrixPotential, xs: &[f64]) -> CouplingStructureReport {
    let m = pot.m();
    let mats: Vec<DMatrix<f64>> = xs.iter().map(|&x| pot.eval(x)).collect();
    let mut dissipative = Clause { pass: true, worst: f64::NEG_INFINITY, at: None };
    let mut offdiag = Clause { pass: true, worst: f64::INFINITY, at: None };
    let mut scale = 0.0_f64;
    for (c, &x) in mats.iter().zip(xs) {
        let e = linalg::max_symmetric_eigenvalue(c);
        if e > dissipative.worst {
            dissipative = Clause { pass: true, worst: e, at: Some(x) };
        }
        for k in 0..m {
            for l in 0..m {
                scale = scale.max(c[(k, l)].abs());
                if k != l && c[(k, l)] < offdiag.worst {
                    offdiag = Clause { pass: true, worst: c[(k, l)], at: Some(x) };
                }
            }
        }
    }
    dissipative.pass = dissipative.worst <= DISSIPATIVE_TOL;
    offdiag.pass = offdiag.worst >= -OFF_DIAGONAL_TOL;

    let mut edges = Vec::new();
    let mut adj = vec![vec![false; m]; m];
    for k in 0..m {
        for l in 0..m {
            if k != l && mats.iter().any(|c| c[(k, l)].abs() > 1e-12 * scale) {
                adj[k][l] = true;
                edges.push((k, l));
            }
        }
    }
    let irreducible = strongly_connected(&adj);

    let mut stacked = DMatrix::zeros(m * mats.len(), m);
    for (j, c) in mats.iter().enumerate() {
        stacked.view_mut((j * m, 0), (m, m)).copy_from(c);
    }
    // R of a thin QR has the singular values of the stacked matrix.
    let r = if stacked.nrows() > m { stacked.qr().r() } else { stacked };
    let ns = linalg::null_space(&r, RANK_TOL).expect("small SVD");
    let dim_f = ns.dim();
    let mut common = Clause { pass: dim_f > 0, worst: ns.gap.largest_dropped.unwrap_or(0.0), at: None };
    if dim_f == 0 {
        common.worst = ns.gap.smallest_kept.unwrap_or(0.0);
    }
    let (xi, xi_nonnegative) = if dim_f == 1 {
        let mut v = linalg::column(&ns.basis, 0);
        let big = v.iter().copied().fold(0.0, |a: f64, b| if b.abs() > a.abs() { b } else { a });
        if big < 0.0 {
            v.iter_mut().for_each(|c| *c = -*c);
        }
        let nonneg = v.iter().all(|&c| c >= -1e-10);
        (Some(v), Some(nonneg))
    } else {
        (None, None)
    };
    CouplingStructureReport {
        m,
        samples: xs.len(),
        dissipative,
        off_diagonal_nonnegative: offdiag,
        common_kernel: common,
        irreducible,
        edges,
        dim_f,
        f_basis: ns.basis,
        f_gap: ns.gap,
        xi,
        xi_nonnegative,
    }
}

fn reach(adj: &[Vec<bool>], start: usize, reverse: bool) -> Vec<bool> {
    let m = adj.len();
    let mut seen = vec![false; m];
    seen[start] = true;
    let mut stack = vec![start];
    while let Some(k) = stack.pop() {
        for l in 0..m {
            let edge = if reverse { adj[l][k] } else { adj[k][l] };
            if edge && !seen[l] {
                seen[l] = true;
                stack.push(l);
            }
        }
    }
    seen
}

/// Strong connectivity of the digraph with adjacency `adj`.
pub fn strongly_connected(adj: &[Vec<bool>]) -> bool {
    adj.is_empty() || (reach(adj, 0, false).iter().all(|&s| s) && reach(adj, 0, true).iter().all(|&s| s))
}

/// No proper nonempty `K` with `adj[k][l] = false` for all `k ∈ K`, `l ∉ K`,
/// by enumeration of all subsets.
pub fn irreducible_by_subsets(adj: &[Vec<bool>]) -> bool {
    let m = adj.len();
    assert!(m <= 20, "subset enumeration is exponential");
    (1u32..(1 << m) - 1).all(|mask| {
        let inside = |k: usize| mask & (1 << k) != 0;
        (0..m).any(|k| inside(k) && (0..m).any(|l| !inside(l) && adj[k][l]))
    })
}

/// Discretizes the scalar operator and adds the coupling block at every
/// genuine grid atom.
pub fn discretize_coupled(p: &CoupledProblem) -> Result<CoupledDiscretization> {
    let d = discretize(&p.scalar)?;
    let m = p.potential.m();
    let n = d.len();
    let scalar = &d.generator;
    let mut names = Vec::with_capacity(m * n);
    let mut embedding = Vec::with_capacity(m * n);
    let mut escape = Vec::new();
    let mut rows = Vec::with_capacity(m * n);
    let mut killing = Vec::with_capacity(m * n);
    let blocks: Vec<Option<DMatrix<f64>>> =
        (0..n).map(|i| (!d.space().is_escape(i)).then(|| p.potential.eval(d.positions[i]))).collect();
    for k in 0..m {
        for i in 0..n {
            names.push(format!("{k}:x{i}"));
            embedding.push(Coordinate::Component(k, d.positions[i]));
            let mut row: Vec<(usize, f64)> = scalar.row(i).map(|(j, v)| (k * n + j, v)).collect();
            let mut kill = scalar.killing()[i];
            match &blocks[i] {
                None => escape.push(k * n + i),
                Some(c) => {
                    for l in 0..m {
                        let v = c[(k, l)];
                        if !v.is_finite() {
                            return Err(Error::Precondition(format!("c_{k}{l}({}) is not finite", d.positions[i])));
                        }
                        if l == k {
                            kill -= v;
                            continue;
                        }
                        if v < -OFF_DIAGONAL_TOL {
                            return Err(Error::Hypothesis(format!(
                                "c_{k}{l}({}) = {v} < 0 makes the generator non-Metzler",
                                d.positions[i]
                            )));
                        }
                        let v = v.max(0.0);
                        if v > 0.0 {
                            row.push((l * n + i, v));
                            kill -= v;
                        }
                    }
                }
            }
            rows.push(row);
            killing.push(kill);
        }
    }
    let space = StateSpace::new(names)?
        .with_embedding(embedding)?
        .with_weights(vec![d.h; m * n])?
        .with_escape(escape)?;
    let generator = GeneratorMatrix::from_rates(Arc::new(space), rows, killing)?;
    Ok(CoupledDiscretization { scalar: d, generator, m })
}

pub fn assemble_coupled(p: &CoupledProblem) -> Result<GeneratorMatrix> {
    Ok(discretize_coupled(p)?.generator)
}

#[derive(Debug, Clone, Serialize)]
pub struct InvariantStructure {
    /// Fixed probability measure of the coupled semigroup.
    pub mu: Vec<f64>,
    /// Fixed probability measure of the scalar semigroup.
    pub nu: Vec<f64>,
    pub xi: Vec<f64>,
    /// `‖μ − ξ⊗ν / Σξ‖_TV`.
    pub defect: f64,
    pub factorized: bool,
    /// `⟨μ, χ⟩`.
    pub pairing_chi: f64,
}

/// Perron measure of the coupled semigroup compared with `ξ ⊗ ν`.
pub fn invariant_structure(p: &CoupledProblem) -> Result<InvariantStructure> {
    let report = validate_hypotheses(p)?;
    if !report.all_pass() {
        return Err(Error::Precondition("coupling hypotheses fail; invariant structure needs all of them".into()));
    }
    let xi = report.xi.clone().ok_or_else(|| Error::Precondition("dim F must be 1".into()))?;
    let cd = discretize_coupled(p)?;
    let coupled = perron_fixed_measure(&cd.semigroup())?;
    let mu = coupled.measure.ok_or(Error::NoFixedMeasure(coupled.ratio))?;
    let scalar = perron_fixed_measure(&cd.scalar.semigroup())?;
    let nu = scalar.measure.ok_or(Error::NoFixedMeasure(scalar.ratio))?;
    let total: f64 = xi.iter().sum();
    let n = cd.n();
    let expect: Vec<f64> = xi.iter().flat_map(|&w| nu.iter().map(move |v| v * w / total)).collect();
    let defect = l1(&mu.iter().zip(&expect).map(|(a, b)| a - b).collect::<Vec<_>>());
    let chi = report.chi(n).expect("xi present");
    let pairing_chi = mu.iter().zip(&chi).map(|(a, b)| a * b).sum::<f64>();
    if !(pairing_chi > 0.0) {
        return Err(Error::Numerical(format!("pairing of μ with χ is {pairing_chi}, expected positive")));
    }
    Ok(InvariantStructure { mu, nu, xi, defect, factorized: defect <= FACTOR_TOL, pairing_chi })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LimitRankLaw {
    pub dim_f: usize,
    pub projection_rank: usize,
    pub agree: bool,
}

/// Rank of the limit projection of the coupled semigroup against `dim F`.
pub fn limit_rank_law(p: &CoupledProblem) -> Result<LimitRankLaw> {
    let report = validate_hypotheses(p)?;
    let cd = discretize_coupled(p)?;
    let proj = limit_projection(&cd.semigroup(), DEFAULT_TOL)?;
    Ok(LimitRankLaw { dim_f: report.dim_f, projection_rank: proj.rank, agree: report.dim_f == proj.rank })
}
