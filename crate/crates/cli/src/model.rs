//! Semigroups built from scenario payloads.

use std::path::Path;
use std::sync::Arc;

use semiflow_core::coupled::{discretize_coupled, CoupledDiscretization, CoupledProblem, MatrixPotential};
use semiflow_core::elliptic::{discretize, Coefficient, Discretization, EllipticProblem, ProblemSpec};
use semiflow_core::{GeneratorMatrix, Kernel, MatrixDocument, Semigroup, StateSpace};

use crate::config::{CoefSpec, EllipticDoc, Kind, PotentialDoc, ProblemDoc, Scenario};

pub enum Model {
    Raw {
        s: Semigroup,
    },
    Elliptic {
        problem: EllipticProblem,
        disc: Discretization,
        s: Semigroup,
    },
    Coupled {
        problem: CoupledProblem,
        disc: CoupledDiscretization,
        s: Semigroup,
    },
}

impl CoefSpec {
    pub fn coefficient(&self) -> Result<Coefficient, String> {
        match self {
            CoefSpec::Number(c) => Ok(Coefficient::constant(*c)),
            CoefSpec::Expr(e) => {
                let e = e.clone();
                Ok(Coefficient::custom(move |x| e.eval(x)))
            }
            CoefSpec::Rational { num, den } => Coefficient::rational(num.clone(), den.clone()).map_err(|e| e.to_string()),
        }
    }
}

impl EllipticDoc {
    pub fn build(&self) -> Result<EllipticProblem, String> {
        let p = match &self.preset {
            Some(preset) => ProblemSpec::Preset {
                preset: preset.clone(),
                truncation: self.truncation,
                n: self.n,
                far_field: self.far_field,
            }
            .build(),
            None => {
                let coef = |c: &Option<CoefSpec>| c.as_ref().map_or(Ok(Coefficient::constant(0.0)), CoefSpec::coefficient);
                let domain = self.domain.ok_or("missing `domain`")?;
                let p = EllipticProblem::new(coef(&self.a)?, coef(&self.b)?, coef(&self.c)?, domain, self.truncation, self.n);
                match self.far_field {
                    Some(f) => p.with_far_field(f),
                    None => p,
                }
            }
        };
        Ok(p)
    }
}

impl PotentialDoc {
    pub fn build(&self) -> Result<MatrixPotential, String> {
        let err = |e: semiflow_core::Error| e.to_string();
        if let Some(rate) = &self.exchange {
            return Ok(MatrixPotential::exchange(rate.coefficient()?));
        }
        if let Some(m) = self.zero {
            return MatrixPotential::zero(m).map_err(err);
        }
        if let Some(p) = &self.partial {
            return MatrixPotential::partial(p.m, &p.coupled, p.rate.coefficient()?).map_err(err);
        }
        let rows = self.matrix.as_ref().ok_or("empty potential")?;
        let entries = rows
            .iter()
            .map(|r| r.iter().map(CoefSpec::coefficient).collect::<Result<Vec<_>, _>>())
            .collect::<Result<Vec<_>, _>>()?;
        MatrixPotential::new(entries).map_err(err)
    }
}

fn raw_space(doc: &ProblemDoc, n: usize) -> Result<Arc<StateSpace>, String> {
    let space = match &doc.atoms {
        Some(a) if a.len() != n => return Err(format!("{} atom names for {n} atoms", a.len())),
        Some(a) => StateSpace::new(a.clone()),
        None => StateSpace::indexed(n),
    }
    .and_then(|s| s.with_escape(doc.escape.clone()))
    .map_err(|e| e.to_string())?;
    Ok(Arc::new(space))
}

fn read_matrix(base: &Path, path: &str) -> Result<MatrixSource, String> {
    let full = base.join(path);
    let text = std::fs::read_to_string(&full).map_err(|e| format!("{}: {e}", full.display()))?;
    if full.extension().is_some_and(|e| e == "json") {
        let doc: MatrixDocument = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", full.display()))?;
        Ok(MatrixSource::Document(doc))
    } else {
        Ok(MatrixSource::Csv(text))
    }
}

enum MatrixSource {
    Csv(String),
    Document(MatrixDocument),
}

impl Model {
    /// Builds the semigroup of a validated scenario.
    pub fn build(scn: &Scenario) -> Result<Model, String> {
        let doc = &scn.problem;
        match scn.kind {
            Kind::RawKernel => {
                let k = match (&doc.kernel, &doc.path) {
                    (Some(rows), _) => Kernel::from_rows(raw_space(doc, rows.len())?, rows),
                    (None, Some(p)) => match read_matrix(&scn.base, p)? {
                        MatrixSource::Csv(text) => {
                            let n = text.lines().filter(|l| !l.trim().is_empty()).count();
                            Kernel::read_csv(raw_space(doc, n)?, text.as_bytes())
                        }
                        MatrixSource::Document(d) => d.into_kernel(),
                    },
                    (None, None) => return Err("missing kernel".into()),
                }
                .map_err(|e| e.to_string())?;
                Ok(Model::Raw { s: Semigroup::discrete(k) })
            }
            Kind::RawGenerator => {
                let q = match (&doc.generator, &doc.path) {
                    (Some(rows), _) => GeneratorMatrix::from_rows(raw_space(doc, rows.len())?, rows),
                    (None, Some(p)) => match read_matrix(&scn.base, p)? {
                        MatrixSource::Csv(text) => {
                            let n = text.lines().filter(|l| !l.trim().is_empty()).count();
                            GeneratorMatrix::read_csv(raw_space(doc, n)?, text.as_bytes())
                        }
                        MatrixSource::Document(d) => GeneratorMatrix::from_document(d),
                    },
                    (None, None) => return Err("missing generator".into()),
                }
                .map_err(|e| e.to_string())?;
                Ok(Model::Raw { s: Semigroup::continuous(q) })
            }
            Kind::Elliptic => {
                let problem = doc.elliptic_doc()?.build()?;
                let disc = discretize(&problem).map_err(|e| e.to_string())?;
                let s = disc.semigroup();
                Ok(Model::Elliptic { problem, disc, s })
            }
            Kind::Coupled => {
                let scalar = doc.scalar.as_ref().ok_or("missing `scalar`")?.build()?;
                let potential = doc.potential.as_ref().ok_or("missing `potential`")?.build()?;
                let problem = CoupledProblem::new(scalar, potential);
                let disc = discretize_coupled(&problem).map_err(|e| e.to_string())?;
                let s = disc.semigroup();
                Ok(Model::Coupled { problem, disc, s })
            }
        }
    }

    pub fn semigroup(&self) -> &Semigroup {
        match self {
            Model::Raw { s } | Model::Elliptic { s, .. } | Model::Coupled { s, .. } => s,
        }
    }

    pub fn space(&self) -> &Arc<StateSpace> {
        self.semigroup().space()
    }

    /// Number of components (1 outside coupled scenarios).
    pub fn components(&self) -> usize {
        match self {
            Model::Coupled { disc, .. } => disc.m,
            _ => 1,
        }
    }

    /// Genuine atom nearest `x` on component `k`.
    pub fn nearest(&self, x: f64, k: usize) -> Option<usize> {
        match self {
            Model::Raw { .. } => None,
            Model::Elliptic { disc, .. } => Some(disc.nearest(x)),
            Model::Coupled { disc, .. } => Some(disc.index(k, disc.scalar.nearest(x))),
        }
    }

    /// Atoms belonging to component `k`.
    pub fn component_atoms(&self, k: usize) -> Vec<usize> {
        match self {
            Model::Coupled { disc, .. } => (0..disc.n()).map(|i| disc.index(k, i)).collect(),
            _ => (0..self.space().len()).collect(),
        }
    }

    /// Grid size summary for the provenance block.
    pub fn grid(&self) -> serde_json::Value {
        let s = self.semigroup();
        let base = serde_json::json!({
            "atoms": s.len(),
            "escape_atoms": s.space().escape_atoms().len(),
            "time": if s.is_discrete() { "discrete" } else { "continuous" },
        });
        let mut map = match base {
            serde_json::Value::Object(m) => m,
            _ => unreachable!(),
        };
        let mut grid = |d: &Discretization| {
            map.insert("grid_points".into(), d.len().into());
            map.insert("h".into(), d.h.into());
            map.insert("interval".into(), serde_json::json!([d.lo, d.hi]));
        };
        match self {
            Model::Raw { .. } => {}
            Model::Elliptic { disc, .. } => grid(disc),
            Model::Coupled { disc, .. } => {
                grid(&disc.scalar);
                map.insert("components".into(), disc.m.into());
            }
        }
        serde_json::Value::Object(map)
    }

    /// The generator or step kernel as dense CSV and as a JSON envelope.
    pub fn write_matrices_to(&self, files: &mut Vec<(String, Vec<u8>)>) -> semiflow_core::Result<()> {
        let s = self.semigroup();
        let (stem, doc, mut csv) = match (s.generator(), s.step_kernel()) {
            (Some(q), _) => {
                let mut csv = Vec::new();
                q.write_csv(&mut csv)?;
                ("generator", q.to_document(), csv)
            }
            (None, Some(k)) => {
                let mut csv = Vec::new();
                k.write_csv(&mut csv)?;
                ("kernel", k.to_document(), csv)
            }
            (None, None) => return Ok(()),
        };
        if csv.last() != Some(&b'\n') {
            csv.push(b'\n');
        }
        let mut json = serde_json::to_vec(&doc)?;
        json.push(b'\n');
        files.push((format!("{stem}.csv"), csv));
        files.push((format!("{stem}.json"), json));
        Ok(())
    }
}
