use semiflow_core::asymptotics::{limit_projection, DEFAULT_TOL};
use semiflow_core::coupled::{discretize_coupled, invariant_structure, validate_hypotheses, CoupledProblem, MatrixPotential};
use semiflow_core::presets;
use semiflow_core::{boundedness_report, BoundedFunction};

#[test]
fn varying_exchange_rate_factorizes() {
    let inv = invariant_structure(&presets::coupled_varying(81)).unwrap();
    assert!(inv.factorized && inv.defect <= 1e-4, "defect {}", inv.defect);
    assert!(inv.pairing_chi > 0.0);
}

#[test]
fn coupled_semigroups_are_positive_and_bounded() {
    for p in [presets::coupled_irreducible(41), presets::coupled_partial(41), presets::coupled_zero(41)] {
        let s = discretize_coupled(&p).unwrap().semigroup();
        assert!(s.evaluate(2.0).unwrap().is_positive_within(1e-12));
        assert!(boundedness_report(&s, 4096.0, 13).unwrap() <= 1.0 + 1e-10);
    }
}

#[test]
fn dissipative_potential_with_positive_row_sum_is_bounded_not_contractive() {
    let pot = MatrixPotential::constant(&[vec![-1.0, 2.0], vec![2.0, -4.0]]).unwrap();
    let p = CoupledProblem::new(presets::ou_reflecting(41), pot);
    let report = validate_hypotheses(&p).unwrap();
    assert!(report.all_pass());
    let xi = report.xi.clone().unwrap();
    assert!((xi[0] / xi[1] - 2.0).abs() < 1e-10);
    let cd = discretize_coupled(&p).unwrap();
    let s = cd.semigroup();
    assert!(!s.is_contractive());
    let m = boundedness_report(&s, 4096.0, 13).unwrap();
    assert!(m > 1.0 && m < 10.0, "M = {m}");
    // T_t f tends to ⟨μ, f⟩χ with ⟨μ, χ⟩ = 1.
    let proj = limit_projection(&s, DEFAULT_TOL).unwrap();
    assert_eq!(proj.rank, 1);
    let inv = invariant_structure(&p).unwrap();
    assert!(inv.factorized);
    let chi = report.chi(cd.n()).unwrap();
    let f: Vec<f64> = (0..2 * cd.n()).map(|i| (i as f64 * 0.1).sin()).collect();
    let tf = s.act_backward(200.0, &BoundedFunction::new(s.space().clone(), f.clone()).unwrap()).unwrap();
    let pair: f64 = inv.mu.iter().zip(&f).map(|(a, b)| a * b).sum::<f64>() / inv.pairing_chi;
    let err = tf.values().iter().zip(&chi).map(|(v, c)| (v - pair * c).abs()).fold(0.0, f64::max);
    assert!(err < 1e-8, "{err}");
}
