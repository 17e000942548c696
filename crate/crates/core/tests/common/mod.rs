#![allow(dead_code)]

use ifx_core::linalg::{self, Matrix};
use ifx_core::{c64, CoefficientProfile, InterfaceOperator, Lattice, Shift, TruncationBox};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Matrix {
    Matrix::from_fn(n, n, |_, _| c64::new(rng.random_range(-scale..scale), rng.random_range(-scale..scale)))
}

pub fn random_hermitian(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Matrix {
    let m = random_matrix(rng, n, scale);
    linalg::scale(&linalg::add(&m, &linalg::adjoint(&m)), c64::new(0.5, 0.0))
}

pub fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<c64> {
    (0..n).map(|_| c64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()
}

/// Compactly supported profile with random values on sites within `radius`.
pub fn random_compact(rng: &mut ChaCha8Rng, fiber: usize, radius: i64, scale: f64) -> CoefficientProfile {
    let mut entries = Vec::new();
    for x in -radius..=radius {
        if rng.random_bool(0.6) {
            entries.push((vec![x], random_matrix(rng, fiber, scale)));
        }
    }
    CoefficientProfile::compact(1, fiber, entries).unwrap()
}

/// Random 1D operator of shift radius ≤ 2 mixing constant, wall and
/// compact coefficients.
pub fn random_wall_operator(seed: u64, fiber: usize) -> InterfaceOperator {
    let mut r = rng(seed);
    let lattice = Lattice::new(1, fiber).unwrap();
    let mut op = InterfaceOperator::new(lattice);
    for g in -2i64..=2 {
        let f = match r.random_range(0..3) {
            0 => CoefficientProfile::uniform(1, random_matrix(&mut r, fiber, 1.0)),
            1 => {
                let (a, b) = (random_matrix(&mut r, fiber, 1.0), random_matrix(&mut r, fiber, 1.0));
                CoefficientProfile::domain_wall_tanh(a, b, r.random_range(0.5..3.0)).unwrap()
            }
            _ => random_compact(&mut r, fiber, 3, 1.0),
        };
        op.add_term(Shift(vec![g]), f).unwrap();
    }
    op
}

/// Random translation-invariant 1D operator (shift radius ≤ 2).
pub fn random_bulk(seed: u64, fiber: usize, hermitian: bool) -> InterfaceOperator {
    let mut r = rng(seed);
    let lattice = Lattice::new(1, fiber).unwrap();
    let mut op = InterfaceOperator::new(lattice);
    let b0 = if hermitian { random_hermitian(&mut r, fiber, 1.0) } else { random_matrix(&mut r, fiber, 1.0) };
    op.add_term(Shift(vec![0]), CoefficientProfile::uniform(1, b0)).unwrap();
    for g in 1..=2i64 {
        let b = random_matrix(&mut r, fiber, 1.0);
        let back = if hermitian { linalg::adjoint(&b) } else { random_matrix(&mut r, fiber, 1.0) };
        op.add_term(Shift(vec![g]), CoefficientProfile::uniform(1, b)).unwrap();
        op.add_term(Shift(vec![-g]), CoefficientProfile::uniform(1, back)).unwrap();
    }
    if hermitian {
        op.claim_hermitian()
    } else {
        op
    }
}

/// Vector supported at depth ≥ `depth` inside the box.
pub fn interior_vector(rng: &mut ChaCha8Rng, bx: &TruncationBox, fiber: usize, depth: usize) -> Vec<c64> {
    let mut v = random_vector(rng, bx.space_dim(fiber));
    for (i, chunk) in v.chunks_mut(fiber).enumerate() {
        if bx.depth(&bx.site(i)) < depth {
            chunk.iter_mut().for_each(|z| *z = c64::new(0.0, 0.0));
        }
    }
    v
}

pub fn inner(a: &[c64], b: &[c64]) -> c64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn sorted_real(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| a.total_cmp(b));
    v
}
