use semiflow_core::asymptotics::{limit_projection, DEFAULT_TOL};
use semiflow_core::elliptic::{
    assemble, check_lyapunov, consistency_residual, cubic_drift, discretize, halfline_drift, heat_probe, laplace, ou,
    radial_exterior, Coefficient, Domain, EllipticProblem, FarField, LyapunovCertificate, LyapunovKind,
};
use semiflow_core::BoundedFunction;

#[test]
fn dirichlet_rows_are_substochastic() {
    let problems = [
        laplace(Domain::Interval { left: -1.0, right: 2.0 }, 0.0, 40),
        halfline_drift(2.0, 15.0, 60),
        radial_exterior(3, 1.0, 10.0, 60).with_far_field(FarField::Absorbing),
        cubic_drift(5.0, 80),
    ];
    for p in &problems {
        let q = assemble(p).unwrap().to_dense();
        assert!(q.is_metzler_like());
        for i in 0..q.nrows() {
            assert!(q.row(i).sum() <= 1e-12);
        }
    }
}

trait MetzlerLike {
    fn is_metzler_like(&self) -> bool;
}

impl MetzlerLike for nalgebra::DMatrix<f64> {
    fn is_metzler_like(&self) -> bool {
        (0..self.nrows()).all(|i| (0..self.ncols()).all(|j| i == j || self[(i, j)] >= 0.0))
    }
}

#[test]
fn strong_drift_is_upwinded_and_stays_metzler() {
    let b = Coefficient::custom(|x: f64| 40.0 * (3.0 * x).sin());
    let p = EllipticProblem::new(Coefficient::constant(0.5), b, Coefficient::constant(0.0), Domain::WholeLine, 5.0, 101);
    let d = discretize(&p).unwrap();
    assert!(d.upwind_rows() > 0);
    for (i, r) in d.stencil.iter().enumerate() {
        let bx = 40.0 * (3.0 * d.positions[i]).sin();
        assert_eq!(r.order == 1, d.h * bx.abs() > 2.0 * 0.5, "row {i}");
    }
    assert!(d.generator.is_metzler());
}

#[test]
fn radial_harmonic_is_annihilated_by_the_stencil() {
    // The three-point stencil of u″ + 2u′/ρ is exact on 1/ρ.
    for n in [101, 201, 401] {
        let q = assemble(&radial_exterior(3, 1.0, 10.0, n)).unwrap();
        let u: Vec<f64> = (0..q.len()).map(|i| 1.0 - 1.0 / q.space().position(i).unwrap()).collect();
        assert!(consistency_residual(&q, &u).unwrap() < 1e-10);
    }
}

#[test]
fn survival_function_residual_is_second_order() {
    let residual = |n: usize| {
        let q = assemble(&halfline_drift(1.0, 10.0, n)).unwrap();
        let u: Vec<f64> = (0..q.len()).map(|i| 1.0 - (-q.space().position(i).unwrap()).exp()).collect();
        consistency_residual(&q, &u).unwrap()
    };
    let (r1, r2, r3) = (residual(400), residual(801), residual(1603));
    assert!(r1 / r2 >= 3.5 && r2 / r3 >= 3.5, "{r1} {r2} {r3}");
}

#[test]
fn constants_are_annihilated_exactly() {
    let q = assemble(&cubic_drift(6.0, 121)).unwrap();
    assert_eq!(consistency_residual(&q, &vec![1.0; q.len()]).unwrap(), 0.0);
}

#[test]
fn cubic_drift_has_trivial_kernel_and_decays() {
    let d = discretize(&cubic_drift(6.0, 121)).unwrap();
    let p = limit_projection(&d.semigroup(), DEFAULT_TOL).unwrap();
    assert_eq!(p.rank, 0);
}

#[test]
fn survival_grows_with_truncation() {
    // Absorbing truncations exhaust the line monotonically.
    let survival = |l: f64| {
        let d = discretize(&laplace(Domain::WholeLine, l, (20.0 * l) as usize - 1)).unwrap();
        let s = d.semigroup();
        let one = BoundedFunction::constant(s.space().clone(), 1.0);
        s.act_backward(4.0, &one).unwrap().values()[d.nearest(0.0)]
    };
    let (a, b, c) = (survival(3.0), survival(6.0), survival(12.0));
    assert!(a < b && b < c && c <= 1.0, "{a} {b} {c}");
}

#[test]
fn lyapunov_examples() {
    let p = ou(8.0, 201);
    let cert = LyapunovCertificate::sample(&p, LyapunovKind::Domain { lambda0: 3.0 }, |x| x * x + 1.0).unwrap();
    let c = check_lyapunov(&p, cert).unwrap();
    assert_eq!(c.pass, Some(true));
    // A quadratic grows by less than 4x over the median on a uniform grid.
    assert_eq!(c.v_to_infinity, Some(false));
    let cert = LyapunovCertificate::sample(&p, LyapunovKind::Domain { lambda0: 2.0 }, f64::cosh).unwrap();
    let c = check_lyapunov(&p, cert).unwrap();
    assert_eq!(c.pass, Some(true));
    assert_eq!(c.v_to_infinity, Some(true));
    let plus = halfline_drift(1.0, 30.0, 300);
    let cert = LyapunovCertificate::sample(&plus, LyapunovKind::Liouville, |x| x).unwrap();
    let c = check_lyapunov(&plus, cert).unwrap();
    assert_eq!(c.pass, Some(false));
    assert!(c.margin.unwrap() < -0.5);
}

#[test]
fn heat_probe_oscillates_at_every_truncation() {
    for l in [50.0, 100.0, 200.0] {
        let p = heat_probe(l, 0.5, 24).unwrap();
        assert!(p.amplitude >= 0.1, "L = {l}: amplitude {}", p.amplitude);
        assert!(p.max_leak < 1e-6, "L = {l}: leak {}", p.max_leak);
    }
}

#[test]
fn problem_documents_roundtrip() {
    let p = halfline_drift(-0.5, 20.0, 64);
    let json = serde_json::to_string(&p).unwrap();
    let back: EllipticProblem = serde_json::from_str(&json).unwrap();
    assert_eq!(assemble(&back).unwrap().to_dense(), assemble(&p).unwrap().to_dense());
}
