mod common;

use common::*;
use ifx_core::linalg::{self, Matrix};
use ifx_core::models;
use ifx_core::spectra::BlochGrid;
use ifx_core::truncation::{convergence_study, edge_layer, in_gap_states, spectrum_truncated};
use ifx_core::{c64, CoefficientProfile, InterfaceOperator, Lattice, Shift, TruncationBox};
use proptest::prelude::*;

#[test]
fn laplacian_three_sites() {
    let t = models::laplacian(1).unwrap();
    let r = spectrum_truncated(&t, &TruncationBox::new(1, 1).unwrap(), false).unwrap();
    let s = 2f64.sqrt();
    for (z, e) in r.eigenvalues.iter().zip([-s, 0.0, s]) {
        assert!((z.re - e).abs() < 1e-14 && z.im == 0.0);
    }
}

#[test]
fn ssh_wall_has_one_interface_state() {
    let t = models::ssh_wall(0.5, 2.0, 2.0, false).unwrap();
    let bx = TruncationBox::new(1, 100).unwrap();
    let s = in_gap_states(&t, &bx, (-0.4, 0.4)).unwrap();
    assert_eq!(s.count(), 1);
    assert!(s.warnings.is_empty());
    let loc = &s.report.localization[0];
    assert!(loc.peak[0].abs() <= 3, "{loc:?}");
    assert!(loc.decay_rate.unwrap() > 0.3, "{loc:?}");
    // the topological left bulk leaves one Dirichlet artifact at x = −L
    assert_eq!(s.edge_artifacts, 1);
    assert!(s.artifact_edge_weights.iter().all(|&w| w >= 0.9));
}

#[test]
fn pure_bulk_has_no_interface_state() {
    let t = models::ssh_bulk(0.5).unwrap();
    let s = in_gap_states(&t, &TruncationBox::new(1, 100).unwrap(), (-0.4, 0.4)).unwrap();
    assert_eq!(s.count(), 0);
    assert_eq!(s.edge_artifacts, 2);
}

#[test]
fn window_in_band_warns() {
    let t = models::ssh_bulk(0.5).unwrap();
    let s = in_gap_states(&t, &TruncationBox::new(1, 60).unwrap(), (0.8, 1.2)).unwrap();
    assert!(!s.warnings.is_empty());
    assert!(s.count() > 10);
}

#[test]
fn artifacts_carry_boundary_weight() {
    for t in [models::ssh_bulk(0.25).unwrap(), models::ssh_wall(2.0, 0.5, 2.0, false).unwrap()] {
        let s = in_gap_states(&t, &TruncationBox::new(1, 50).unwrap(), (-0.3, 0.3)).unwrap();
        assert!(s.edge_artifacts >= 1);
        assert_eq!(s.artifact_edge_weights.len(), s.edge_artifacts);
        assert!(s.artifact_edge_weights.iter().all(|&w| w >= 0.9));
    }
    assert_eq!(edge_layer(&models::ssh_bulk(0.25).unwrap()), 5);
}

#[test]
fn laplacian_convergence() {
    let t = models::laplacian(1).unwrap();
    let r = convergence_study(&t, &[25, 50, 100], &BlochGrid::uniform(1, 1024).unwrap()).unwrap();
    assert!(r.decreasing, "{:?}", r.rows);
    assert!(r.rows[2].distance <= 0.05);
}

#[test]
fn ssh_wall_convergence_keeps_zero_mode() {
    let t = models::ssh_wall(0.5, 2.0, 2.0, false).unwrap();
    let r = convergence_study(&t, &[25, 50, 100], &BlochGrid::uniform(1, 1024).unwrap()).unwrap();
    assert!(r.decreasing, "{:?}", r.rows);
    assert!(r.rows[2].distance <= 0.05, "{:?}", r.rows);
    assert!(r.in_gap.iter().any(|z| z.norm() < 1e-6), "{:?}", r.in_gap);
}

#[test]
fn catalog_convergence_trend() {
    let cases: Vec<(InterfaceOperator, Vec<usize>)> = vec![
        (models::ssh_wall(0.25, 4.0, 2.0, false).unwrap(), vec![20, 40, 80]),
        (models::vo_1d(0.5, 1.0, 9).unwrap(), vec![40, 80, 160]),
        (models::build("split_step_walk_wall", &Default::default()).unwrap().operator, vec![20, 40, 80]),
        (models::laplacian(2).unwrap(), vec![4, 8, 12]),
    ];
    for (t, ls) in cases {
        let g = BlochGrid::default_for(t.lattice().dim(), 0);
        let r = convergence_study(&t, &ls, &g).unwrap();
        assert!(r.decreasing, "{:?}", r.rows);
    }
}

fn chiral_wall(seed: u64) -> InterfaceOperator {
    let mut r = rng(seed);
    let l = Lattice::new(1, 2).unwrap();
    let mut op = InterfaceOperator::new(l);
    let embed = |v: &Matrix, i: usize, j: usize| {
        Matrix::from_fn(2, 2, |a, b| if (a, b) == (i, j) { v[(0, 0)] } else { c64::new(0.0, 0.0) })
    };
    for g in -1i64..=1 {
        let (a, b) = (random_matrix(&mut r, 1, 1.0), random_matrix(&mut r, 1, 1.0));
        let lower = CoefficientProfile::domain_wall_tanh(embed(&a, 1, 0), embed(&b, 1, 0), 1.5).unwrap();
        let mut part = InterfaceOperator::new(l);
        part.add_term(Shift(vec![g]), lower).unwrap();
        op = op.add(&part).unwrap().add(&part.adjoint()).unwrap();
    }
    op.claim_hermitian()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn chiral_pairing(seed in any::<u64>()) {
        let t = chiral_wall(seed);
        let r = spectrum_truncated(&t, &TruncationBox::new(1, 20).unwrap(), false).unwrap();
        let v: Vec<f64> = r.eigenvalues.iter().map(|z| z.re).collect();
        let n = v.len();
        for i in 0..n {
            prop_assert!((v[i] + v[n - 1 - i]).abs() < 1e-10);
        }
    }

    #[test]
    fn hermitian_path_is_taken(seed in any::<u64>()) {
        let t = chiral_wall(seed);
        let bx = TruncationBox::new(1, 5).unwrap();
        let r = spectrum_truncated(&t, &bx, true).unwrap();
        prop_assert!(r.hermitian_path);
        let a = t.assemble_truncation(&bx).unwrap().to_dense();
        let u = r.eigenvectors.unwrap();
        let av = linalg::mul(&a, &u);
        for c in 0..u.ncols() {
            for i in 0..u.nrows() {
                prop_assert!((av[(i, c)] - u[(i, c)] * r.eigenvalues[c]).norm() < 1e-10);
            }
        }
    }
}
