//! Random instances shared by the integration tests.

#![allow(dead_code)]

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use semiflow_core::{BoundedFunction, GeneratorMatrix, Kernel, SignedMeasure, StateSpace};

pub fn space(n: usize) -> Arc<StateSpace> {
    Arc::new(StateSpace::indexed(n).unwrap())
}

/// Signed kernel with entries in `[−1, 1]`.
pub fn random_kernel<R: Rng>(rng: &mut R, n: usize) -> Kernel {
    let m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    Kernel::new(space(n), m).unwrap()
}

/// Row-substochastic non-negative kernel.
pub fn random_markov<R: Rng>(rng: &mut R, n: usize) -> Kernel {
    let mut m = DMatrix::from_fn(n, n, |_, _| if rng.gen_bool(0.6) { rng.gen_range(0.0..1.0) } else { 0.0 });
    for i in 0..n {
        let s: f64 = m.row(i).sum();
        let mass = rng.gen_range(0.5..=1.0);
        if s > 0.0 {
            for j in 0..n {
                m[(i, j)] *= mass / s;
            }
        }
    }
    Kernel::new(space(n), m).unwrap()
}

pub fn random_measure<R: Rng>(rng: &mut R, space: &Arc<StateSpace>) -> SignedMeasure {
    SignedMeasure::new(space.clone(), (0..space.len()).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

pub fn random_function<R: Rng>(rng: &mut R, space: &Arc<StateSpace>) -> BoundedFunction {
    BoundedFunction::new(space.clone(), (0..space.len()).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

/// Block-structured Metzler substochastic generator on `n ≤ max_n` atoms:
/// a few closed classes (some killed, some of them escape traps), transient
/// atoms that feed them and sometimes an extra escape trap.
pub fn random_block_generator<R: Rng>(rng: &mut R, max_n: usize) -> GeneratorMatrix {
    let n = rng.gen_range(2..=max_n);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let classes = rng.gen_range(0..=3.min(n));
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); classes];
    let mut transient = Vec::new();
    for (pos, &i) in order.iter().enumerate() {
        if pos < classes {
            members[pos].push(i);
        } else if classes > 0 && rng.gen_bool(0.6) {
            let c = rng.gen_range(0..classes);
            members[c].push(i);
        } else {
            transient.push(i);
        }
    }
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut killing = vec![0.0; n];
    let mut escape = Vec::new();
    let rate = |rng: &mut R| rng.gen_range(0.2..2.0);
    for class in &members {
        if class.len() == 1 && rng.gen_bool(0.3) {
            escape.push(class[0]);
            continue;
        }
        // A ring keeps the class irreducible; extra edges vary the spectrum.
        for (k, &i) in class.iter().enumerate() {
            if class.len() > 1 {
                rows[i].push((class[(k + 1) % class.len()], rate(rng)));
            }
            for &j in class {
                if j != i && rng.gen_bool(0.3) {
                    rows[i].push((j, rate(rng)));
                }
            }
        }
        if rng.gen_bool(0.25) {
            let i = class[rng.gen_range(0..class.len())];
            killing[i] = rate(rng);
        }
    }
    // Transient atoms leave towards later transient atoms, the classes or the cemetery.
    for (k, &i) in transient.iter().enumerate() {
        let later = &transient[k + 1..];
        let mut exit = false;
        if classes > 0 && rng.gen_bool(0.7) {
            let c = rng.gen_range(0..classes);
            let j = members[c][rng.gen_range(0..members[c].len())];
            rows[i].push((j, rate(rng)));
            exit = true;
        }
        if !later.is_empty() && rng.gen_bool(0.6) {
            rows[i].push((later[rng.gen_range(0..later.len())], rate(rng)));
        }
        for &j in &transient[..k] {
            if rng.gen_bool(0.15) {
                rows[i].push((j, rate(rng)));
            }
        }
        if !exit || rng.gen_bool(0.3) {
            killing[i] = rate(rng);
        }
    }
    let mut n = n;
    if n < max_n && rng.gen_bool(0.35) {
        rows.push(Vec::new());
        killing.push(0.0);
        escape.push(n);
        n += 1;
    }
    // Escape traps must be reachable; feed each from random genuine atoms.
    let genuine: Vec<usize> = (0..n).filter(|i| !escape.contains(i)).collect();
    if genuine.is_empty() {
        escape.clear();
    }
    for &e in &escape {
        for _ in 0..rng.gen_range(1..=3) {
            let i = genuine[rng.gen_range(0..genuine.len())];
            rows[i].push((e, rate(rng)));
        }
    }
    let space = StateSpace::indexed(n).unwrap().with_escape(escape).unwrap();
    GeneratorMatrix::from_rates(Arc::new(space), rows, killing).unwrap()
}

/// Orthonormal `m × m` matrix from the QR factor of a Gaussian-like matrix.
pub fn random_orthogonal<R: Rng>(rng: &mut R, m: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(m, m, |_, _| rng.gen_range(-1.0..1.0));
    a.qr().q()
}

/// `U (I_r ⊕ A) Uᵀ` with `‖A‖₂ < 1`.
pub fn random_contraction<R: Rng>(rng: &mut R, m: usize) -> DMatrix<f64> {
    let r = rng.gen_range(0..=m);
    let mut inner = DMatrix::zeros(m, m);
    for i in 0..r {
        inner[(i, i)] = 1.0;
    }
    if r < m {
        let k = m - r;
        let a = DMatrix::from_fn(k, k, |_, _| rng.gen_range(-1.0..1.0));
        let norm: f64 = a.clone().svd(false, false).singular_values.max();
        let target = rng.gen_range(0.1..0.95);
        inner.view_mut((r, r), (k, k)).copy_from(&(a * (target / norm.max(1e-12))));
    }
    let u = random_orthogonal(rng, m);
    &u * inner * u.transpose()
}

/// `U (0_r ⊕ (S − BBᵀ − εI)) Uᵀ` with `S` skew-symmetric.
pub fn random_dissipative<R: Rng>(rng: &mut R, m: usize) -> DMatrix<f64> {
    let r = rng.gen_range(0..=m);
    let mut inner = DMatrix::zeros(m, m);
    if r < m {
        let k = m - r;
        let b = DMatrix::from_fn(k, k, |_, _| rng.gen_range(-1.0..1.0));
        let s = DMatrix::from_fn(k, k, |_, _| rng.gen_range(-1.0..1.0));
        let skew = &s - s.transpose();
        let block = skew - &b * b.transpose() - DMatrix::identity(k, k) * rng.gen_range(0.1..1.0);
        inner.view_mut((r, r), (k, k)).copy_from(&block);
    }
    let u = random_orthogonal(rng, m);
    &u * inner * u.transpose()
}
