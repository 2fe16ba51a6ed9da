mod common;

use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use semiflow_core::asymptotics::{dominating_fixed_measure, limit_projection, DEFAULT_TOL};
use semiflow_core::{compose, duality_check, duality_tolerance, Semigroup, SignedMeasure};

use common::*;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |a, v| a.max(v.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn duality_holds(seed in any::<u64>(), n in 1usize..=32) {
        let mut r = rng(seed);
        let k = random_kernel(&mut r, n);
        let mu = random_measure(&mut r, k.space());
        let f = random_function(&mut r, k.space());
        prop_assert!(duality_check(&k, &mu, &f).unwrap() <= duality_tolerance(&k, &mu, &f));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn composition_is_associative(seed in any::<u64>(), n in 1usize..=16) {
        let mut r = rng(seed);
        let (a, b, c) = (random_kernel(&mut r, n), random_kernel(&mut r, n), random_kernel(&mut r, n));
        let left = compose(&compose(&a, &b).unwrap(), &c).unwrap();
        let right = compose(&a, &compose(&b, &c).unwrap()).unwrap();
        prop_assert!(max_abs(&(left.matrix() - right.matrix())) <= 1e-12 * (n as f64).powi(2));
    }

    #[test]
    fn semigroup_law_and_positivity(seed in any::<u64>(), s in 0.05f64..3.0, t in 0.05f64..3.0) {
        let mut r = rng(seed);
        let q = random_block_generator(&mut r, 24);
        let sg = Semigroup::continuous(q);
        let ks = sg.evaluate(s).unwrap();
        let kt = sg.evaluate(t).unwrap();
        let kst = sg.evaluate(s + t).unwrap();
        let prod = compose(&ks, &kt).unwrap();
        prop_assert!(max_abs(&(prod.matrix() - kst.matrix())) <= 1e-10);
        for k in [&ks, &kt, &kst] {
            prop_assert!(k.is_positive_within(1e-12));
            prop_assert!(k.forward_operator_norm() <= 1.0 + 1e-10);
        }
    }

    #[test]
    fn discrete_semigroup_law(seed in any::<u64>(), n in 1usize..=12, a in 1u32..20, b in 1u32..20) {
        let mut r = rng(seed);
        let sg = Semigroup::discrete(random_markov(&mut r, n));
        let prod = compose(&sg.evaluate(a as f64).unwrap(), &sg.evaluate(b as f64).unwrap()).unwrap();
        let direct = sg.evaluate((a + b) as f64).unwrap();
        prop_assert!(max_abs(&(prod.matrix() - direct.matrix())) <= 1e-12);
        prop_assert!(direct.is_positive());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn projection_laws(seed in any::<u64>()) {
        let mut r = rng(seed);
        let q = random_block_generator(&mut r, 20);
        prop_assume!(q.space().escape_atoms().is_empty());
        let sg = Semigroup::continuous(q.clone());
        let p = limit_projection(&sg, DEFAULT_TOL).unwrap();
        let pm = p.kernel.matrix();
        prop_assert!(max_abs(&(pm * pm - pm)) <= 1e-9);
        let k = sg.evaluate(1.0).unwrap();
        prop_assert!(max_abs(&(pm * k.matrix() - pm)) <= 1e-9);
        prop_assert!(max_abs(&(k.matrix() * pm - pm)) <= 1e-9);
        prop_assert!(max_abs(&(q.to_dense() * pm)) <= 1e-9 * q.norm_inf().max(1.0));
        prop_assert!(p.min_entry >= -1e-10);
    }

    #[test]
    fn fixed_measures_are_dominated(seed in any::<u64>()) {
        let mut r = rng(seed);
        let q = random_block_generator(&mut r, 20);
        prop_assume!(q.space().escape_atoms().is_empty());
        let sg = Semigroup::continuous(q.clone());
        let p = limit_projection(&sg, DEFAULT_TOL).unwrap();
        let mu = random_measure(&mut r, q.space());
        let x = SignedMeasure::new(q.space().clone(), p.forward(mu.values())).unwrap();
        let y = dominating_fixed_measure(&p, &x).unwrap();
        let scale = x.values().iter().fold(1.0_f64, |a, v| a.max(v.abs()));
        for (yi, xi) in y.values().iter().zip(x.values()) {
            prop_assert!(*yi >= xi.abs() - 1e-9 * scale);
        }
        let drift = q.apply_transpose(y.values());
        prop_assert!(drift.iter().all(|v| v.abs() <= 1e-9 * scale * q.norm_inf().max(1.0)));
    }
}
