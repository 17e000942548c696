mod common;

use common::*;
use ifx_core::asymptotics::{quasi_orbits, OperatorClass};
use ifx_core::linalg::{self, Matrix};
use ifx_core::models;
use ifx_core::spectra::{bulk_spectrum, essential_spectrum, spectral_gap, BlochGrid, SpectrumKind};
use ifx_core::{c64, CoefficientProfile, InterfaceOperator, Lattice, Shift};
use proptest::prelude::*;

fn grid(n: usize) -> BlochGrid {
    BlochGrid::uniform(1, n).unwrap()
}

fn assert_hull(hull: &[(f64, f64)], expect: &[(f64, f64)], tol: f64) {
    assert_eq!(hull.len(), expect.len(), "{hull:?} vs {expect:?}");
    for (h, e) in hull.iter().zip(expect) {
        assert!((h.0 - e.0).abs() <= tol && (h.1 - e.1).abs() <= tol, "{hull:?} vs {expect:?}");
    }
}

/// Eigenvalues of the n-site periodic truncation of a 1D translation
/// invariant operator, assembled from its coefficients.
fn periodic_eigenvalues(t: &InterfaceOperator, n: usize) -> Vec<f64> {
    let f = t.lattice().fiber();
    let mut m = Matrix::zeros(n * f, n * f);
    for (g, prof) in t.terms() {
        let b = prof.evaluate(&[0]);
        for x in 0..n {
            let y = (x as i64 - g.as_slice()[0]).rem_euclid(n as i64) as usize;
            for p in 0..f {
                for q in 0..f {
                    m[(x * f + p, y * f + q)] += b[(p, q)];
                }
            }
        }
    }
    linalg::hermitian_eigenvalues(&m).unwrap()
}

#[test]
fn ssh_wall_essential_spectrum() {
    let t = models::ssh_wall(0.5, 2.0, 2.0, false).unwrap();
    let g = grid(1024);
    let ess = essential_spectrum(&t, &g).unwrap();
    assert_eq!(ess.kind, SpectrumKind::RealLine);
    // ±[0.5, 1.5] ∪ ±[1, 3]
    assert_hull(&ess.hull, &[(-3.0, -0.5), (0.5, 3.0)], 2.0 * g.pitch());
    let gap = spectral_gap(&ess, c64::new(0.0, 0.0)).unwrap();
    assert!((gap.radius - 0.5).abs() < 1e-6);
}

#[test]
fn ssh_bulk_bands_and_gaps() {
    for (m, bands) in [(0.5, [(-1.5, -0.5), (0.5, 1.5)]), (2.0, [(-3.0, -1.0), (1.0, 3.0)])] {
        let t = models::ssh_bulk(m).unwrap();
        let ess = essential_spectrum(&t, &grid(1024)).unwrap();
        assert_hull(&ess.hull, &bands, 1e-4);
        let gap = spectral_gap(&ess, c64::new(0.0, 0.0)).unwrap();
        assert!((gap.upper - (m - 1.0f64).abs()).abs() < 1e-4);
    }
    let lap = models::laplacian(1).unwrap();
    assert!(spectral_gap(&essential_spectrum(&lap, &grid(256)).unwrap(), c64::new(0.0, 0.0)).is_err());
}

#[test]
fn two_dimensional_models() {
    let g2 = BlochGrid::uniform(2, 128).unwrap();
    let lap = essential_spectrum(&models::laplacian(2).unwrap(), &g2).unwrap();
    assert_hull(&lap.hull, &[(-4.0, 4.0)], 1e-3);
    let rad = essential_spectrum(&models::radial_2d(1.0).unwrap(), &g2).unwrap();
    assert_hull(&rad.hull, &[(-5.0, 5.0)], 1e-3);
    // bulk bands [−10, −2] and [2, 10]; the wall faces may add bound-state bands
    let cart = models::cartesian_2d_wall(-6.0, 6.0, 2.0).unwrap();
    let ess = essential_spectrum(&cart, &BlochGrid::uniform(2, 64).unwrap()).unwrap();
    assert_eq!(quasi_orbits(&cart).unwrap().len(), 4);
    for x in [-9.9, -6.0, -2.1, 2.1, 6.0, 9.9] {
        assert!(ess.distance_to(c64::new(x, 0.0)) < 1e-9, "{x} not in {:?}", ess.hull);
    }
    assert!(ess.hull.first().unwrap().0 > -10.01 && ess.hull.last().unwrap().1 < 10.01);
}

#[test]
fn oscillating_potential_fills_its_range() {
    let t = models::vo_1d(0.5, 1.0, 9).unwrap();
    let ess = essential_spectrum(&t, &grid(512)).unwrap();
    assert_hull(&ess.hull, &[(-2.5, 2.5)], 1e-3);
}

#[test]
fn unitary_spectra_lie_on_the_circle() {
    let m = models::build("split_step_walk_wall", &Default::default()).unwrap();
    let ess = essential_spectrum(&m.operator, &grid(512)).unwrap();
    assert_eq!(ess.kind, SpectrumKind::UnitCircle);
    assert!(ess.points.iter().all(|z| (z.norm() - 1.0).abs() < 1e-10));
    // left bulk gap (−π/2, π/2) is filled by the right bulk, which misses (−0.2, 0.2)
    let gap = spectral_gap(&ess, c64::new(1.0, 0.0)).unwrap();
    assert!((gap.radius - 0.2).abs() < 1e-3, "{gap:?}");
}

#[test]
fn refinement_keeps_points_and_converges() {
    let t = random_bulk(11, 2, true);
    let bulk = &quasi_orbits(&t).unwrap()[0];
    let mut prev = bulk_spectrum(bulk, &grid(64)).unwrap();
    let mut distances = Vec::new();
    for n in [128, 256, 512, 1024] {
        let next = bulk_spectrum(bulk, &grid(n)).unwrap();
        for z in &prev.points {
            let d = next.points.iter().map(|w| (w - z).norm()).fold(f64::INFINITY, f64::min);
            assert!(d < 1e-12, "point {z} lost at n = {n}");
        }
        let h = prev.hausdorff(&next);
        assert!(h <= 2.0 * prev.resolution + 1e-12, "n = {n}: {h} vs {}", prev.resolution);
        distances.push(h);
        prev = next;
    }
    assert!(distances.last().unwrap() <= &distances[0]);
}

fn chiral_bulk(seed: u64) -> InterfaceOperator {
    let mut r = rng(seed);
    let l = Lattice::new(1, 2).unwrap();
    let mut op = InterfaceOperator::new(l);
    for g in -2i64..=2 {
        let a = random_matrix(&mut r, 1, 1.0)[(0, 0)];
        // [[0, a(−g)*], [a(g), 0]] assembled termwise
        let lower = Matrix::from_fn(2, 2, |i, j| if (i, j) == (1, 0) { a } else { c64::new(0.0, 0.0) });
        let upper = linalg::adjoint(&lower);
        op.add_term(Shift(vec![g]), CoefficientProfile::uniform(1, lower)).unwrap();
        op.add_term(Shift(vec![-g]), CoefficientProfile::uniform(1, upper)).unwrap();
    }
    op.claim_hermitian()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn hermitian_bulks_match_periodic_oracle(seed in any::<u64>(), fiber in 1usize..=2) {
        let t = random_bulk(seed, fiber, true);
        let g = grid(1024);
        let ess = essential_spectrum(&t, &g).unwrap();
        prop_assert_eq!(ess.kind, SpectrumKind::RealLine);
        let pts: Vec<c64> = periodic_eigenvalues(&t, 400).into_iter().map(|x| c64::new(x, 0.0)).collect();
        let tol = 2.0 * ess.resolution + 1e-9;
        let d = ess.hausdorff_to_points(&pts, &[]);
        prop_assert!(d <= tol, "{} > {}", d, tol);
    }

    #[test]
    fn chiral_spectra_are_symmetric(seed in any::<u64>()) {
        let t = chiral_bulk(seed);
        let ess = essential_spectrum(&t, &grid(512)).unwrap();
        let mirrored: Vec<(f64, f64)> = ess.hull.iter().rev().map(|&(a, b)| (-b, -a)).collect();
        for (h, m) in ess.hull.iter().zip(&mirrored) {
            prop_assert!((h.0 - m.0).abs() <= ess.resolution && (h.1 - m.1).abs() <= ess.resolution);
        }
    }

    #[test]
    fn compact_perturbations_leave_spectra_unchanged(seed in any::<u64>()) {
        let t = models::ssh_wall(0.5, 2.0, 2.0, false).unwrap();
        let mut r = rng(seed);
        let mut k = InterfaceOperator::new(t.lattice().clone());
        k.add_term(Shift(vec![1]), random_compact(&mut r, 2, 5, 1.0)).unwrap();
        let p = t.add(&k).unwrap().add(&k.adjoint()).unwrap().claim_hermitian();
        let g = grid(256);
        prop_assert_eq!(essential_spectrum(&t, &g).unwrap(), essential_spectrum(&p, &g).unwrap());
    }

    #[test]
    fn class_matches_kind(seed in any::<u64>()) {
        let t = random_bulk(seed, 2, true);
        prop_assert_eq!(OperatorClass::of(&t), OperatorClass::Hermitian);
        prop_assert_eq!(essential_spectrum(&t, &grid(64)).unwrap().kind, SpectrumKind::RealLine);
    }
}
