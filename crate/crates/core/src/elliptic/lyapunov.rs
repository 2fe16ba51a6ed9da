use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{discretize, Discretization, EllipticProblem};
use crate::asymptotics::serialize_columns;
use crate::error::{Error, Result};
use crate::linalg::{self, RankGap, RANK_TOL};
use crate::semigroup::GeneratorMatrix;

/// Inequality certified by a Lyapunov function `V`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LyapunovKind {
    /// `(λ₀ − A)V ≥ 0`.
    Domain { lambda0: f64 },
    /// `AV ≤ α − βV`.
    WholeSpace { alpha: f64, beta: f64 },
    /// `AV ≤ 0`; a pass also requires `ker A = {0}` on the grid.
    Liouville,
}

#[derive(Debug, Clone, Serialize)]
pub struct LyapunovCertificate {
    pub kind: LyapunovKind,
    /// `V` at the grid atoms.
    pub values: Vec<f64>,
    /// `V` at the left and right boundary points that are not grid atoms.
    pub boundary: [Option<f64>; 2],
    /// Smallest slack of the inequality over the checked rows.
    pub margin: Option<f64>,
    pub scale: Option<f64>,
    pub pass: Option<bool>,
    /// `V` at the outermost checked rows is at least ten times its grid median.
    pub v_to_infinity: Option<bool>,
    pub liouville_kernel_dim: Option<usize>,
    pub rows_checked: usize,
}

impl LyapunovCertificate {
    /// Samples `v` on the grid of `problem`, including boundary points.
    pub fn sample(problem: &EllipticProblem, kind: LyapunovKind, v: impl Fn(f64) -> f64) -> Result<Self> {
        let d = discretize(problem)?;
        Ok(Self::on(&d, kind, v))
    }

    pub fn on(d: &Discretization, kind: LyapunovKind, v: impl Fn(f64) -> f64) -> Self {
        let left = (!d.left.retains_node()).then(|| v(d.lo));
        let right = (!d.right.retains_node()).then(|| v(d.hi));
        LyapunovCertificate {
            kind,
            values: d.sample(&v),
            boundary: [left, right],
            margin: None,
            scale: None,
            pass: None,
            v_to_infinity: None,
            liouville_kernel_dim: None,
            rows_checked: 0,
        }
    }
}

/// Evaluates the certified inequality row by row, skipping escape atoms and
/// the two rows next to each truncation end.
pub fn check_lyapunov(problem: &EllipticProblem, mut cert: LyapunovCertificate) -> Result<LyapunovCertificate> {
    let d = discretize(problem)?;
    let n = d.len();
    if cert.values.len() != n {
        return Err(Error::Dimension(format!("certificate has {} values for {n} atoms", cert.values.len())));
    }
    let v = &cert.values;
    let left_bc = cert.boundary[0].unwrap_or(0.0);
    let right_bc = cert.boundary[1].unwrap_or(0.0);
    let mut margin = f64::INFINITY;
    let mut scale = 1.0_f64;
    let mut checked = Vec::new();
    for i in 0..n {
        if d.space().is_escape(i) || d.near_far_end(i) {
            continue;
        }
        let r = d.stencil[i];
        let vl = if i > 0 { v[i - 1] } else { left_bc };
        let vr = if i + 1 < n { v[i + 1] } else { right_bc };
        let av = r.left * (vl - v[i]) + r.right * (vr - v[i]) + r.c * v[i];
        let (slack, size) = match cert.kind {
            LyapunovKind::Domain { lambda0 } => (lambda0 * v[i] - av, (lambda0 * v[i]).abs() + av.abs()),
            LyapunovKind::WholeSpace { alpha, beta } => {
                (alpha - beta * v[i] - av, alpha.abs() + (beta * v[i]).abs() + av.abs())
            }
            LyapunovKind::Liouville => (-av, av.abs()),
        };
        margin = margin.min(slack);
        scale = scale.max(size);
        checked.push(i);
    }
    if checked.is_empty() {
        return Err(Error::Precondition("grid has no interior rows to check".into()));
    }
    let mut pass = margin >= -1e-8 * scale;
    if cert.kind == LyapunovKind::Liouville {
        let dim = liouville_check(&d.generator, RANK_TOL)?.kernel_dim;
        cert.liouville_kernel_dim = Some(dim);
        pass = pass && dim == 0;
    }
    let mut sorted: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[n / 2];
    let mut far_rows = Vec::new();
    if d.left.is_far_field() {
        far_rows.push(checked[0]);
    }
    if d.right.is_far_field() {
        far_rows.push(*checked.last().unwrap());
    }
    cert.v_to_infinity = Some(!far_rows.is_empty() && far_rows.iter().all(|&i| v[i] >= 10.0 * median));
    cert.margin = Some(margin);
    cert.scale = Some(scale);
    cert.pass = Some(pass);
    cert.rows_checked = checked.len();
    Ok(cert)
}

#[derive(Debug, Clone, Serialize)]
pub struct LiouvilleReport {
    pub kernel_dim: usize,
    #[serde(serialize_with = "serialize_columns")]
    pub kernel_basis: DMatrix<f64>,
    pub gap: RankGap,
}

/// Numerical null space of `Q`.
pub fn liouville_check(q: &GeneratorMatrix, tol: f64) -> Result<LiouvilleReport> {
    let ns = linalg::null_space(&q.to_dense(), tol)?;
    Ok(LiouvilleReport { kernel_dim: ns.dim(), kernel_basis: ns.basis, gap: ns.gap })
}
