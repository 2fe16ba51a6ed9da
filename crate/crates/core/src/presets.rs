//! Small reference models used by the examples, the scenario registry and
//! the test corpus.

use std::sync::Arc;

use crate::coupled::{assemble_coupled, CoupledProblem, MatrixPotential};
use crate::elliptic::{
    arctan_drift, assemble, cubic_drift, halfline_drift, laplace, ou, radial_exterior, Coefficient, Domain,
    EllipticProblem, FarField,
};
use crate::error::Result;
use crate::kernel::Kernel;
use crate::measure::StateSpace;
use crate::semigroup::GeneratorMatrix;

fn indexed(n: usize) -> Arc<StateSpace> {
    Arc::new(StateSpace::indexed(n).expect("n > 0"))
}

/// The swap of two atoms.
pub fn swap_kernel() -> Kernel {
    Kernel::from_rows(indexed(2), &[vec![0.0, 1.0], vec![1.0, 0.0]]).expect("valid kernel")
}

/// `swap − I`; its TV distance to the limit from `δ_0` is `e^{−2t}`.
pub fn swap_generator() -> GeneratorMatrix {
    GeneratorMatrix::from_rows(indexed(2), &[vec![-1.0, 1.0], vec![1.0, -1.0]]).expect("valid generator")
}

/// Two closed classes with stationary laws `(2/3, 1/3)` and `(1/4, 3/4)`.
pub fn two_block() -> GeneratorMatrix {
    let q = [
        vec![-1.0, 1.0, 0.0, 0.0],
        vec![2.0, -2.0, 0.0, 0.0],
        vec![0.0, 0.0, -3.0, 3.0],
        vec![0.0, 0.0, 1.0, -1.0],
    ];
    GeneratorMatrix::from_rows(indexed(4), &q).expect("valid generator")
}

/// Irreducible chain whose kernels are strictly positive for every `t > 0`.
pub fn positive_chain() -> GeneratorMatrix {
    let q = [vec![-3.0, 1.0, 2.0], vec![1.0, -2.0, 1.0], vec![0.5, 0.5, -1.0]];
    GeneratorMatrix::from_rows(indexed(3), &q).expect("valid generator")
}

/// Ornstein–Uhlenbeck operator on `[−6, 6]` with absorbing ends. The exit
/// rate is below every rank threshold, so the model behaves as conservative.
pub fn ou_doob(n: usize) -> EllipticProblem {
    ou(6.0, n)
}

/// Ornstein–Uhlenbeck scalar part with reflecting ends, for coupled systems.
pub fn ou_reflecting(n: usize) -> EllipticProblem {
    ou(6.0, n).with_far_field(FarField::Reflecting)
}

/// Two components exchanging mass at a constant rate.
pub fn coupled_irreducible(n: usize) -> CoupledProblem {
    CoupledProblem::new(ou_reflecting(n), MatrixPotential::exchange(Coefficient::constant(1.0)))
}

/// Exchange at rate `1 + x²`.
pub fn coupled_varying(n: usize) -> CoupledProblem {
    CoupledProblem::new(ou_reflecting(n), MatrixPotential::exchange(Coefficient::polynomial(vec![1.0, 0.0, 1.0])))
}

/// Two uncoupled components.
pub fn coupled_zero(n: usize) -> CoupledProblem {
    CoupledProblem::new(ou_reflecting(n), MatrixPotential::zero(2).expect("m = 2"))
}

/// Three components, the first two exchanging mass and the third uncoupled.
pub fn coupled_partial(n: usize) -> CoupledProblem {
    let pot = MatrixPotential::partial(3, &[0, 1], Coefficient::constant(1.0)).expect("valid components");
    CoupledProblem::new(ou_reflecting(n), pot)
}

/// Every preset generator at a small grid size, by name.
pub fn catalog() -> Result<Vec<(String, GeneratorMatrix)>> {
    let mut out = vec![
        ("swap-minus-identity".to_string(), swap_generator()),
        ("two-block".to_string(), two_block()),
        ("positive-chain".to_string(), positive_chain()),
    ];
    let elliptic: Vec<(&str, EllipticProblem)> = vec![
        ("laplace-whole-line", laplace(Domain::WholeLine, 10.0, 99)),
        ("laplace-interval", laplace(Domain::Interval { left: 0.0, right: 1.0 }, 1.0, 49)),
        ("ou", ou_doob(121)),
        ("arctan-drift", arctan_drift(20.0, 121)),
        ("cubic-drift", cubic_drift(6.0, 121)),
        ("halfline-drift-plus", halfline_drift(1.0, 30.0, 150)),
        ("halfline-drift-zero", halfline_drift(0.0, 30.0, 150)),
        ("halfline-drift-minus", halfline_drift(-1.0, 30.0, 150)),
        ("radial-exterior-3", radial_exterior(3, 1.0, 20.0, 150)),
        ("radial-exterior-1", radial_exterior(1, 1.0, 20.0, 150)),
    ];
    for (name, p) in elliptic {
        out.push((name.to_string(), assemble(&p)?));
    }
    for (name, p) in [
        ("coupled-irreducible", coupled_irreducible(41)),
        ("coupled-varying", coupled_varying(41)),
        ("coupled-zero", coupled_zero(41)),
        ("coupled-partial", coupled_partial(41)),
    ] {
        out.push((name.to_string(), assemble_coupled(&p)?));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_builds_metzler_generators() {
        let cat = catalog().unwrap();
        assert_eq!(cat.len(), 17);
        for (name, q) in &cat {
            assert!(q.is_metzler(), "{name}");
        }
    }
}
