mod common;

use common::*;
use ifx_core::asymptotics::quasi_orbits;
use ifx_core::linalg::{self, Matrix};
use ifx_core::{
    c64, fold_cocompact, CoefficientProfile, Crystal, Hopping, InterfaceOperator, Lattice, Shift, TruncationBox,
};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn adjointness(seed in any::<u64>(), fiber in 1usize..=2) {
        let t = random_wall_operator(seed, fiber);
        let bx = TruncationBox::new(1, 15).unwrap();
        let mut r = rng(seed ^ 0x5a5a);
        let phi = interior_vector(&mut r, &bx, fiber, 3);
        let psi = interior_vector(&mut r, &bx, fiber, 3);
        let lhs = inner(&t.apply(&phi, &bx).unwrap(), &psi);
        let rhs = inner(&phi, &t.adjoint().apply(&psi, &bx).unwrap());
        prop_assert!((lhs - rhs).norm() < 1e-13 * (1.0 + lhs.norm()), "{lhs} vs {rhs}");
    }

    #[test]
    fn truncation_columns_are_applications(seed in any::<u64>(), fiber in 1usize..=2) {
        let t = random_wall_operator(seed, fiber);
        let bx = TruncationBox::new(1, 6).unwrap();
        let a = t.assemble_truncation(&bx).unwrap();
        let n = bx.space_dim(fiber);
        for j in 0..n {
            let mut e = vec![c64::new(0.0, 0.0); n];
            e[j] = c64::new(1.0, 0.0);
            let col = t.apply(&e, &bx).unwrap();
            for i in 0..n {
                prop_assert_eq!(a.get(i, j), col[i]);
            }
        }
    }

    #[test]
    fn composition_is_matrix_product_inside(s1 in any::<u64>(), s2 in any::<u64>(), fiber in 1usize..=2) {
        let t1 = random_wall_operator(s1, fiber);
        let t2 = random_wall_operator(s2, fiber);
        let bx = TruncationBox::new(1, 12).unwrap();
        let prod = t1.compose(&t2).unwrap().assemble_truncation(&bx).unwrap().to_dense();
        let direct = linalg::mul(
            &t1.assemble_truncation(&bx).unwrap().to_dense(),
            &t2.assemble_truncation(&bx).unwrap().to_dense(),
        );
        let depth = t1.shift_radius() + t2.shift_radius();
        for i in 0..prod.nrows() {
            if bx.depth(&bx.site(i / fiber)) < depth {
                continue;
            }
            for j in 0..prod.ncols() {
                prop_assert!((prod[(i, j)] - direct[(i, j)]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn compact_terms_do_not_change_bulks(seed in any::<u64>(), fiber in 1usize..=2) {
        let t = random_wall_operator(seed, fiber);
        let mut r = rng(seed.wrapping_add(7));
        let mut p = t.clone();
        for g in -3i64..=3 {
            p.add_term(Shift(vec![g]), random_compact(&mut r, fiber, 5, 1.0)).unwrap();
        }
        let (a, b) = (quasi_orbits(&t).unwrap(), quasi_orbits(&p).unwrap());
        prop_assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            prop_assert_eq!(&x.label, &y.label);
            prop_assert_eq!(x.symbol(), y.symbol());
        }
    }

    #[test]
    fn translation_keeps_bulks(seed in any::<u64>(), v in -20i64..=20) {
        let t = random_wall_operator(seed, 2);
        let moved = t.translate(&[v]);
        let (a, b) = (quasi_orbits(&t).unwrap(), quasi_orbits(&moved).unwrap());
        for (x, y) in a.iter().zip(&b) {
            prop_assert_eq!(&x.label, &y.label);
            prop_assert_eq!(x.symbol(), y.symbol());
        }
    }
}

#[test]
fn laplacian_truncation_on_delta() {
    let l = Lattice::new(1, 1).unwrap();
    let lap = InterfaceOperator::shift(l, Shift(vec![1]))
        .unwrap()
        .add(&InterfaceOperator::shift(l, Shift(vec![-1])).unwrap())
        .unwrap();
    let bx = TruncationBox::new(1, 2).unwrap();
    let mut d0 = vec![c64::new(0.0, 0.0); 5];
    d0[2] = c64::new(1.0, 0.0);
    let out = lap.apply(&d0, &bx).unwrap();
    let expect: Vec<f64> = vec![0.0, 1.0, 0.0, 1.0, 0.0];
    assert_eq!(out.iter().map(|z| z.re).collect::<Vec<_>>(), expect);
    assert!(out.iter().all(|z| z.im == 0.0));
}

#[test]
fn ssh_wall_truncation_matches_apply() {
    let t = ifx_core::models::ssh_wall(0.5, 2.0, 2.0, false).unwrap();
    let bx = TruncationBox::new(1, 2).unwrap();
    let a = t.assemble_truncation(&bx).unwrap();
    assert_eq!(a.dim(), 10);
    for j in 0..10 {
        let mut e = vec![c64::new(0.0, 0.0); 10];
        e[j] = c64::new(1.0, 0.0);
        let col = t.apply(&e, &bx).unwrap();
        for i in 0..10 {
            assert_eq!(a.get(i, j), col[i]);
        }
    }
    assert!(t.adjoint().approx_eq(&t, 0.0));
}

#[test]
fn composition_term_is_pointwise_product() {
    let l = Lattice::new(1, 1).unwrap();
    let f = CoefficientProfile::domain_wall_tanh(linalg::scalar(1, c64::new(1.0, 0.0)), linalg::scalar(1, c64::new(3.0, 0.0)), 1.5).unwrap();
    let k = CoefficientProfile::domain_wall_tanh(linalg::scalar(1, c64::new(-2.0, 1.0)), linalg::scalar(1, c64::new(0.5, 0.0)), 2.5).unwrap();
    let t1 = InterfaceOperator::from_terms(l, [(Shift(vec![1]), f.clone())]).unwrap();
    let t2 = InterfaceOperator::from_terms(l, [(Shift(vec![0]), k.clone())]).unwrap();
    let p = t1.compose(&t2).unwrap();
    let term = p.term(&Shift(vec![1])).unwrap();
    for x in -6..=6 {
        let expect = f.evaluate(&[x])[(0, 0)] * k.evaluate(&[x - 1])[(0, 0)];
        assert!((term.evaluate(&[x])[(0, 0)] - expect).norm() < 1e-15);
    }
    // expand on δ-vectors
    let bx = TruncationBox::new(1, 8).unwrap();
    for j in 1..16 {
        let mut e = vec![c64::new(0.0, 0.0); 17];
        e[j] = c64::new(1.0, 0.0);
        let direct = t1.apply(&t2.apply(&e, &bx).unwrap(), &bx).unwrap();
        let via = p.apply(&e, &bx).unwrap();
        assert!(direct.iter().zip(&via).all(|(a, b)| (a - b).norm() < 1e-14));
    }
}

/// Dense Hamiltonian of a crystal restricted to cells in the box, built
/// directly on crystal sites (cell, a) in lexicographic order.
fn crystal_matrix(c: &Crystal, bx: &TruncationBox) -> Matrix {
    let n = c.fiber;
    let size = bx.num_sites() * c.cell_size * n;
    let mut m = Matrix::zeros(size, size);
    let idx = |cell: usize, a: usize, comp: usize| (cell * c.cell_size + a) * n + comp;
    for (xi, x) in bx.sites().enumerate() {
        for h in &c.hoppings {
            let y: Vec<i64> = x.iter().zip(h.offset.as_slice()).map(|(a, b)| a - b).collect();
            let Some(yi) = bx.index(&y) else { continue };
            let f = h.profile.evaluate(&x);
            for p in 0..n {
                for q in 0..n {
                    m[(idx(xi, h.to, p), idx(yi, h.from, q))] += f[(p, q)];
                }
            }
        }
    }
    m
}

fn real(v: f64) -> Matrix {
    linalg::scalar(1, c64::new(v, 0.0))
}

fn hop(from: usize, to: usize, offset: Vec<i64>, v: f64) -> Hopping {
    let dim = offset.len();
    Hopping { from, to, offset: Shift(offset), profile: CoefficientProfile::uniform(dim, real(v)) }
}

#[test]
fn two_site_chain_folds_to_ssh_form() {
    // sites (x, 0), (x, 1); intra-cell t1, inter-cell t2
    let c = Crystal {
        dim: 1,
        cell_size: 2,
        fiber: 1,
        hoppings: vec![hop(0, 1, vec![0], 0.7), hop(1, 0, vec![0], 0.7), hop(1, 0, vec![-1], 1.0), hop(0, 1, vec![1], 1.0)],
    };
    let folded = fold_cocompact(&c).unwrap();
    assert_eq!(folded.lattice().fiber(), 2);
    let bx = TruncationBox::new(1, 4).unwrap();
    let a = linalg::hermitian_eigenvalues(&folded.assemble_truncation(&bx).unwrap().to_dense()).unwrap();
    let b = linalg::hermitian_eigenvalues(&crystal_matrix(&c, &bx)).unwrap();
    assert_eq!(a.len(), 18);
    for (x, y) in sorted_real(a).iter().zip(sorted_real(b)) {
        assert!((x - y).abs() < 1e-12);
    }
    // same symbol as the SSH chain with m = 0.7
    let ssh = ifx_core::models::ssh_bulk(0.7).unwrap();
    assert!(folded.approx_eq(&ssh, 1e-15));
}

#[test]
fn honeycomb_cell_folds_with_matching_spectra() {
    let c = Crystal {
        dim: 2,
        cell_size: 2,
        fiber: 1,
        hoppings: vec![
            hop(0, 1, vec![0, 0], 1.0),
            hop(1, 0, vec![0, 0], 1.0),
            hop(0, 1, vec![1, 0], 0.8),
            hop(1, 0, vec![-1, 0], 0.8),
            hop(0, 1, vec![0, 1], 0.6),
            hop(1, 0, vec![0, -1], 0.6),
        ],
    };
    let folded = fold_cocompact(&c).unwrap();
    let bx = TruncationBox::new(2, 3).unwrap();
    let a = linalg::hermitian_eigenvalues(&folded.assemble_truncation(&bx).unwrap().to_dense()).unwrap();
    let b = linalg::hermitian_eigenvalues(&crystal_matrix(&c, &bx)).unwrap();
    for (x, y) in sorted_real(a).iter().zip(sorted_real(b)) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn catalog_walk_is_unitary_inside() {
    let m = ifx_core::models::build("split_step_walk_wall", &Default::default()).unwrap();
    let u = &m.operator;
    let bx = TruncationBox::new(1, 30).unwrap();
    let mut r = rng(3);
    let psi = interior_vector(&mut r, &bx, 2, 2 * u.shift_radius() + 1);
    let upsi = u.apply(&psi, &bx).unwrap();
    let back = u.adjoint().apply(&upsi, &bx).unwrap();
    let err: f64 = back.iter().zip(&psi).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
    assert!(err < 1e-12, "{err}");
}
